"""Record representative wire exchanges against the mock tool suite.

Produces one request/response pair per tool kind, as plain wire bodies.
Used to check schema conformance of the protocol and to replay the same
traffic against alternative tool servers.
"""

from __future__ import annotations

import json
from pathlib import Path

from .agent_io import build_agent_prompt
from .analysis import decompose_rule_based
from .guidance import GuidanceConfig, attention_bias_for, box_constraint_regions
from .layout import plan_layout, rasterize
from .mocks import MockToolSuite
from .policy import build_verification_questions
from .protocol import (
    CompleteRequest,
    CustomizeRequest,
    LayoutToImageRequest,
    LocalEditRequest,
    SegmentRequest,
    TextToImageRequest,
    ToolRequest,
    VerifyRequest,
    image_to_payload,
)


def record_mock_exchanges(prompt: str = "a blue horse and a brown vase") -> list[dict]:
    """Drive every tool kind once and capture the wire bodies."""
    suite = MockToolSuite()
    analysis = decompose_rule_based(prompt)
    layout = plan_layout(analysis, seed=3)
    guidance = GuidanceConfig()

    exchanges: list[dict] = []

    def call(request: ToolRequest) -> dict:
        response = suite.handle(request)
        exchanges.append(
            {"kind": request.kind.value, "request": request.to_dict(), "response": response.to_dict()}
        )
        return response.to_dict()

    call(CompleteRequest(prompt=build_agent_prompt(prompt)))

    concept_groups = []
    for obj in analysis.objects:
        response = call(TextToImageRequest(prompt=obj.phrase, seed=11))
        concept_groups.append([response["payload"]["images"][0]])

    biases = []
    for index in range(len(analysis.objects)):
        entry = layout.entry_for_object(index)
        biases.append(attention_bias_for(entry.box, layout.canvas, guidance).to_payload())

    import numpy as np

    condition = image_to_payload(np.asarray(rasterize(layout)))
    from .protocol import ImagePayload

    customize_body = call(
        CustomizeRequest(
            prompt=prompt,
            concept_images=[[ImagePayload.from_dict(im) for im in group] for group in concept_groups],
            layout=layout,
            attention_biases=biases,
            condition_image=condition,
        )
    )
    composed = ImagePayload.from_dict(customize_body["payload"]["images"][0])

    call(
        LayoutToImageRequest(
            prompt=prompt,
            layout=layout,
            region_masks=box_constraint_regions(layout, 64).to_payload(),
            seed=11,
        )
    )

    questions = build_verification_questions(analysis)
    call(VerifyRequest(image=composed, questions=questions, layout_meta=layout))

    segment_body = call(
        SegmentRequest(image=composed, caption=analysis.objects[0].phrase, layout_meta=layout)
    )

    call(
        LocalEditRequest(
            base_image=composed,
            edit_mask=segment_body["payload"]["mask"],
            target_phrase=analysis.objects[0].phrase,
            reference_images=[ImagePayload.from_dict(im) for im in concept_groups[0]],
            layout_meta=layout,
        )
    )

    # one semantic error exchange: unknown caption
    call(SegmentRequest(image=composed, caption="a unicorn", layout_meta=layout))

    return exchanges


def write_exchanges(path: str | Path, prompt: str = "a blue horse and a brown vase") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record_mock_exchanges(prompt), sort_keys=True), encoding="utf-8")
    return path
