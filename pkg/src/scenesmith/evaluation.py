"""Scoring for generated images and layouts.

Detection-style AP over an IoU sweep measures how well images respect
their conditioning layout; attribute accuracy asks a pluggable verifier
the generated yes/no questions; relation accuracy checks the spatial
predicates against detected boxes.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .analysis import PromptAnalysis
from .layout import BBox, SceneLayout, caption_noun, iou, relation_satisfied
from .mocks import caption_style
from .policy import VerificationQuestion, build_verification_questions
from .protocol import ImagePayload, ToolEndpoint, VerifyRequest
from .dispatch import dispatch

logger = logging.getLogger(__name__)

AP_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class Detection:
    label: str
    box: BBox
    score: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} outside [0, 1]")


def normalize_label(label: str) -> str:
    """Lowercase and strip articles/adjectives so captions match detector labels."""
    return caption_noun(label)


@dataclass(frozen=True)
class APResult:
    ap: float
    ap50: float
    ap75: float


def _interpolated_ap(recalls: list[float], precisions: list[float]) -> float:
    """All-point interpolation of the precision-recall curve."""
    mrec = [0.0] + recalls + [1.0]
    mpre = [0.0] + precisions + [0.0]
    for i in range(len(mpre) - 1, 0, -1):
        mpre[i - 1] = max(mpre[i - 1], mpre[i])
    ap = 0.0
    for i in range(1, len(mrec)):
        if mrec[i] != mrec[i - 1]:
            ap += (mrec[i] - mrec[i - 1]) * mpre[i]
    return ap


def _ap_at_threshold(
    detections: list[Detection], gt: list[tuple[str, BBox]], threshold: float
) -> float:
    if not detections or not gt:
        return 0.0
    order = sorted(range(len(detections)), key=lambda i: -detections[i].score)
    matched: set[int] = set()
    tp_flags: list[bool] = []
    for det_index in order:
        det = detections[det_index]
        best_iou, best_gt = 0.0, -1
        for gi, (label, box) in enumerate(gt):
            if gi in matched or label != normalize_label(det.label):
                continue
            candidate_iou = iou(det.box, box)
            if candidate_iou >= threshold and candidate_iou > best_iou:
                best_iou, best_gt = candidate_iou, gi
        if best_gt >= 0:
            matched.add(best_gt)
            tp_flags.append(True)
        else:
            tp_flags.append(False)
    recalls, precisions = [], []
    tp = 0
    for i, flag in enumerate(tp_flags, start=1):
        tp += int(flag)
        recalls.append(tp / len(gt))
        precisions.append(tp / i)
    return _interpolated_ap(recalls, precisions)


def average_precision(
    detections: list[Detection],
    ground_truth: SceneLayout,
    thresholds: tuple[float, ...] = AP_THRESHOLDS,
) -> APResult:
    """Greedy same-label matching per threshold, all-point interpolated AP.

    AP is the mean over the 0.5:0.05:0.95 sweep; AP50/AP75 sit at the
    fixed thresholds.  Empty inputs score 0.
    """
    gt = [(normalize_label(entry.caption), entry.box) for entry in ground_truth.entries]
    per_threshold = {t: _ap_at_threshold(detections, gt, t) for t in thresholds}
    ap = sum(per_threshold.values()) / len(thresholds) if thresholds else 0.0
    return APResult(
        ap=ap,
        ap50=per_threshold.get(0.5, _ap_at_threshold(detections, gt, 0.5)),
        ap75=per_threshold.get(0.75, _ap_at_threshold(detections, gt, 0.75)),
    )


# --- detector stub over mock renders ------------------------------------------------


def detector_legend(layout: SceneLayout) -> list[tuple[str, list[tuple[int, int, int]]]]:
    """Noun -> paint colors (fill plus hatch) classes for the detector stub.

    Distinct nouns should use distinct fill colors; same-color classes
    merge and would cross-fire detections.
    """
    legend: dict[str, list[tuple[int, int, int]]] = {}
    for entry in layout.entries:
        style = caption_style(entry.caption)
        colors = legend.setdefault(caption_noun(entry.caption), [])
        for color in [style.fill] + ([style.hatch] if style.hatch else []):
            if color not in colors:
                colors.append(color)
    return sorted(legend.items())


def detect_rectangles(
    image: np.ndarray, legend: list[tuple[str, list[tuple[int, int, int]]]]
) -> list[Detection]:
    """Fit a box around each connected same-class color region."""
    detections: list[Detection] = []
    for noun, colors in legend:
        mask = np.zeros(image.shape[:2], dtype=bool)
        for color in colors:
            mask |= (image == np.array(color, dtype=np.uint8)).all(axis=-1)
        labeled, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
        for component in range(1, count + 1):
            ys, xs = np.nonzero(labeled == component)
            x0, x1 = int(xs.min()), int(xs.max()) + 1
            y0, y1 = int(ys.min()), int(ys.max()) + 1
            box = BBox(x0, y0, x1 - x0, y1 - y0)
            density = len(xs) / box.area
            detections.append(Detection(label=noun, box=box, score=min(1.0, density)))
    return detections


# --- attribute / relation accuracy ---------------------------------------------------


def attribute_accuracy(
    images: list[ImagePayload],
    analyses: list[PromptAnalysis],
    verifier_endpoint: ToolEndpoint,
    layouts: list[SceneLayout] | None = None,
) -> float:
    """Fraction of attribute questions answered yes, averaged per prompt
    then over the suite.  Prompts with no questions are skipped."""
    per_prompt: list[float] = []
    for index, (image, analysis) in enumerate(zip(images, analyses)):
        questions = build_verification_questions(analysis)
        if not questions:
            continue
        layout_meta = layouts[index] if layouts else None
        response = dispatch(
            VerifyRequest(image=image, questions=questions, layout_meta=layout_meta),
            verifier_endpoint,
        )
        if not response.ok:
            raise RuntimeError(f"verifier error: {response.error_message}")
        yes = sum(1 for a in response.answers if a.answer)
        per_prompt.append(yes / len(questions))
    return sum(per_prompt) / len(per_prompt) if per_prompt else 1.0


def relation_accuracy(
    detections_per_image: list[list[Detection]],
    analyses: list[PromptAnalysis],
    canvas: tuple[int, int] = (512, 512),
) -> float:
    """Fraction of spatial relations satisfied over detected boxes.

    Non-spatial relations are excluded here; ``relation_coverage`` reports
    how much of the relation set was geometrically decidable.
    """
    satisfied = 0
    total = 0
    for detections, analysis in zip(detections_per_image, analyses):
        layout = _layout_from_detections(detections, analysis, canvas)
        for relation in analysis.relations:
            if not relation.is_spatial:
                continue
            total += 1
            try:
                if relation_satisfied(layout, relation):
                    satisfied += 1
            except ValueError:
                pass  # object not detected: relation counts as unsatisfied
    return satisfied / total if total else 1.0


def relation_coverage(analyses: list[PromptAnalysis]) -> float:
    total = sum(len(a.relations) for a in analyses)
    spatial = sum(1 for a in analyses for r in a.relations if r.is_spatial)
    return spatial / total if total else 1.0


def _layout_from_detections(
    detections: list[Detection], analysis: PromptAnalysis, canvas: tuple[int, int]
) -> SceneLayout:
    from .layout import LayoutEntry

    entries = []
    used: set[int] = set()
    for object_index, obj in enumerate(analysis.objects):
        best = None
        for di, det in enumerate(detections):
            if di in used or normalize_label(det.label) != obj.noun:
                continue
            if best is None or det.score > detections[best].score:
                best = di
        if best is not None:
            used.add(best)
            entries.append(
                LayoutEntry(
                    object_ref=object_index,
                    instance_index=0,
                    caption=obj.phrase,
                    box=detections[best].box,
                )
            )
    return SceneLayout(canvas=canvas, entries=entries)


# --- suite runner ----------------------------------------------------------------------


@dataclass
class PromptRow:
    prompt_id: int
    prompt: str
    category: str
    status: str  # ok | failed
    attribute_accuracy: float | None = None
    ap50: float | None = None
    ap75: float | None = None
    ap: float | None = None
    relations_total: int = 0
    relations_satisfied: int = 0
    edit_rounds: int = 0
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "prompt_id": self.prompt_id,
            "prompt": self.prompt,
            "category": self.category,
            "status": self.status,
            "attribute_accuracy": self.attribute_accuracy,
            "ap50": self.ap50,
            "ap75": self.ap75,
            "ap": self.ap,
            "relations_total": self.relations_total,
            "relations_satisfied": self.relations_satisfied,
            "edit_rounds": self.edit_rounds,
            "detail": self.detail,
        }


@dataclass
class EvalReport:
    ap: float
    ap50: float
    ap75: float
    attribute_accuracy: float
    relation_accuracy: float
    rows: list[PromptRow] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ap": self.ap,
            "ap50": self.ap50,
            "ap75": self.ap75,
            "attribute_accuracy": self.attribute_accuracy,
            "relation_accuracy": self.relation_accuracy,
            "rows": [row.to_dict() for row in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def rows_csv(self) -> str:
        buffer = io.StringIO()
        fields = list(PromptRow(0, "", "", "").to_dict().keys())
        writer = csv.DictWriter(buffer, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow(row.to_dict())
        return buffer.getvalue()


def read_prompt_file(path: str | Path) -> list[tuple[str, str | None]]:
    """One prompt per line, optional tab-separated category override."""
    prompts: list[tuple[str, str | None]] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.rstrip()
        if not line or line.startswith("#"):
            continue
        if "\t" in line:
            prompt, category = line.split("\t", 1)
            prompts.append((prompt.strip(), category.strip() or None))
        else:
            prompts.append((line, None))
    return prompts


def run_suite(prompt_file: str | Path, pipeline_config, out_dir: str | Path) -> EvalReport:
    """Run the full pipeline per prompt and score the results.

    Deterministic under fixed seeds and mock tools: identical inputs
    produce byte-identical report files.  Failed prompts are marked and
    the suite continues.
    """
    from . import engine as engine_module
    from .config import EngineConfig
    from .layout import validate

    assert isinstance(pipeline_config, EngineConfig)
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)

    prompts = read_prompt_file(prompt_file)
    rows: list[PromptRow] = []
    images: list[ImagePayload] = []
    analyses: list[PromptAnalysis] = []
    layouts: list[SceneLayout] = []
    detections_all: list[list[Detection]] = []

    for prompt_id, (prompt, category_override) in enumerate(prompts):
        prompt_dir = out_path / f"prompt_{prompt_id:04d}"
        prompt_dir.mkdir(parents=True, exist_ok=True)
        try:
            engine = engine_module.Engine(pipeline_config.with_storage(prompt_dir / "sessions"))
            session = engine.create_session(prompt, mode="rule_decompose",
                                            category_override=category_override)
            session = engine.advance(session.id)
            row, image, analysis, layout, dets = _score_session(
                engine, session, prompt_id, prompt, prompt_dir
            )
        except Exception as exc:  # partial failure: mark the row, keep going
            logger.warning("prompt %d failed: %s", prompt_id, exc)
            rows.append(
                PromptRow(prompt_id, prompt, category_override or "", "failed", detail=str(exc))
            )
            continue
        rows.append(row)
        if image is not None:
            images.append(image)
            analyses.append(analysis)
            layouts.append(layout)
            detections_all.append(dets)

    attr_acc = (
        attribute_accuracy(images, analyses, pipeline_config.endpoint_for("verify"), layouts)
        if images
        else 1.0
    )
    rel_acc = relation_accuracy(detections_all, analyses, pipeline_config.canvas)
    scored = [row for row in rows if row.status == "ok"]
    report = EvalReport(
        ap=_mean([row.ap for row in scored]),
        ap50=_mean([row.ap50 for row in scored]),
        ap75=_mean([row.ap75 for row in scored]),
        attribute_accuracy=attr_acc,
        relation_accuracy=rel_acc,
        rows=rows,
    )
    (out_path / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out_path / "rows.csv").write_text(report.rows_csv(), encoding="utf-8")
    return report


def _mean(values: list[float | None]) -> float:
    clean = [v for v in values if v is not None]
    return sum(clean) / len(clean) if clean else 0.0


def _score_session(engine, session, prompt_id: int, prompt: str, prompt_dir: Path):
    from .protocol import png_bytes

    analysis = session.analysis
    layout = session.layout
    image_payload = engine.latest_composed_image(session)
    if image_payload is None:
        return (
            PromptRow(
                prompt_id,
                prompt,
                analysis.category.value if analysis else "",
                "failed",
                detail=f"no composed image (phase {session.state.phase.value})",
            ),
            None,
            analysis,
            layout,
            [],
        )
    if layout is None:
        # direct text-to-image prompts carry no layout: nothing to score
        # against; the row stays ok with empty metrics
        (prompt_dir / "image.png").write_bytes(png_bytes(image_payload.to_array()))
        row = PromptRow(
            prompt_id,
            prompt,
            analysis.category.value,
            "ok",
            detail="no layout-conditioned composition",
        )
        return row, None, analysis, None, []
    image = image_payload.to_array()
    (prompt_dir / "image.png").write_bytes(png_bytes(image))
    (prompt_dir / "layout.txt").write_text(layout.to_text(), encoding="utf-8")

    detections = detect_rectangles(image, detector_legend(layout))
    ap_result = average_precision(detections, layout)

    questions = build_verification_questions(analysis)
    attr = None
    if questions:
        response = dispatch(
            VerifyRequest(image=image_payload, questions=questions, layout_meta=layout),
            engine.config.endpoint_for("verify"),
        )
        attr = sum(1 for a in response.answers if a.answer) / len(questions)

    satisfied = 0
    spatial_total = 0
    for relation in analysis.relations:
        if relation.is_spatial:
            spatial_total += 1
            if relation_satisfied(layout, relation):
                satisfied += 1

    row = PromptRow(
        prompt_id=prompt_id,
        prompt=prompt,
        category=analysis.category.value,
        status="ok",
        attribute_accuracy=attr,
        ap50=ap_result.ap50,
        ap75=ap_result.ap75,
        ap=ap_result.ap,
        relations_total=spatial_total,
        relations_satisfied=satisfied,
        edit_rounds=session.state.edit_round,
    )
    return row, image_payload, analysis, layout, detections
