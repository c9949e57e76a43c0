"""Acceptance criteria, one test per criterion, each printing a PASS line.

All checks run in mock mode with no network access and no secondary
component present.
"""

import itertools
import random
import threading
import time

import numpy as np
import pytest

from scenesmith.agent_io import default_examples, parse_agent_response, serialize_agent_response
from scenesmith.analysis import Relation, decompose_rule_based
from scenesmith.config import EngineConfig
from scenesmith.engine import Engine
from scenesmith.errors import IllegalTransition
from scenesmith.evaluation import (
    attribute_accuracy,
    average_precision,
    detect_rectangles,
    detector_legend,
    iou,
)
from scenesmith.guidance import GuidanceConfig, attention_bias_for, average_embeddings
from scenesmith.layout import (
    BBox,
    LayoutEntry,
    SceneLayout,
    plan_layout,
    relation_satisfied,
    validate,
)
from scenesmith.mocks import render_layout
from scenesmith.policy import Phase, StepKind, make_plan

from test_eval_harness import constructed_cases, exhaustive_ap, pixel_iou

APPENDIX_BOXES = [
    [("a blue horse", (50, 70, 220, 300)), ("a brown vase", (300, 113, 150, 250))],
    [("a fabric rug", (20, 200, 470, 150)), ("a leather belt", (100, 250, 300, 20))],
    [
        ("a cat", (120, 150, 300, 300)),
        ("a collar", (120, 300, 300, 50)),
        ("a bell", (250, 320, 110, 100)),
    ],
    [("a rectangular mirror", (170, 80, 172, 100)), ("a white sink", (150, 200, 212, 150))],
    [("a red apple", (235, 230, 60, 60)), ("a plate", (175, 210, 180, 180))],
]


def report(line: str) -> None:
    print(f"\nACCEPTANCE {line}")


def test_appendix_fidelity():
    started = time.perf_counter()
    examples = default_examples()
    assert len(examples) == 5
    for example, expected in zip(examples, APPENDIX_BOXES):
        analysis, layout = parse_agent_response(example.answer)
        got = [(e.caption, (e.box.x, e.box.y, e.box.w, e.box.h)) for e in layout.entries]
        assert got == expected
        reparsed_analysis, reparsed_layout = parse_agent_response(
            serialize_agent_response(analysis, layout)
        )
        assert reparsed_layout.to_dict() == layout.to_dict()
        assert reparsed_analysis.category == analysis.category
        assert [o.to_dict() for o in reparsed_analysis.objects] == [
            o.to_dict() for o in analysis.objects
        ]
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    report(f"PASS: appendix fidelity (5/5 answers exact, round-trip identity, {elapsed:.3f}s)")


GOLDEN_PROMPTS = {
    "attribute-only": [
        "a blue horse and a brown vase",
        "a black guitar and a brown amplifier",
        "a fabric rug and a leather belt",
        "a rectangular mirror and a white sink",
        "a green bench and a red car",
        "a purple crown and a yellow book",
        "a wooden table and a glass cup",
        "a metallic clock and a plastic bottle",
        "a triangular shelf and a blue sink",
        "an oval mirror and a brown desk",
    ],
    "relationship-only": [
        "The red apple was on top of the plate",
        "A cat is wearing a collar with a bell on it",
        "a bird above a car",
        "a book below a clock",
        "a man riding a horse",
        "a woman holding an umbrella",
        "a dog chasing a ball",
        "a lamp above a bed",
        "a pillow on top of a sofa",
        "a ball below a table",
    ],
    "both": [
        "The blue bowl was on top of the white placemat",
        "a red book on top of a wooden table",
        "a blue bird above a green car",
        "a purple cup on top of a black desk",
        "a yellow ball below a glass table",
        "a pink vase on top of a wooden shelf",
        "a teal lamp above a leather sofa",
        "a brown dog chasing an orange ball",
        "a gold crown on top of a velvet pillow",
        "a maroon book below a metallic clock",
    ],
    "simple": [
        "a horse",
        "a dog and a cat",
        "a red apple",
        "the white snow",
        "a cat on the left of a dog",
        "a bench to the right of a tree",
        "a house",
        "a bicycle",
        "two dogs",
        "a boat next to a dock",
    ],
}

PLAN_SHAPES = {
    "attribute-only": (StepKind.GENERATE_CONCEPT_IMAGES, StepKind.CUSTOMIZE, StepKind.VERIFY),
    "relationship-only": (StepKind.LAYOUT_TO_IMAGE, StepKind.VERIFY),
    "both": (StepKind.GENERATE_CONCEPT_IMAGES, StepKind.LAYOUT_TO_IMAGE, StepKind.VERIFY),
    "simple": (StepKind.TEXT_TO_IMAGE,),
}


def test_policy_golden_table():
    total = 0
    for label, prompts in GOLDEN_PROMPTS.items():
        assert len(prompts) == 10
        for prompt in prompts:
            analysis = decompose_rule_based(prompt)
            assert analysis.category.value == label, (prompt, analysis.category)
            plan = make_plan(analysis)
            assert tuple(step.kind for step in plan.steps) == PLAN_SHAPES[label], prompt
            assert plan.local_edit_armed == (label == "both")
            total += 1
    assert total == 40
    report("PASS: policy golden table (40/40 prompts, 100% exact plan match)")


def _fault_suite_prompts(count: int = 50) -> list[str]:
    colors = [
        "blue", "red", "green", "yellow", "purple", "orange", "pink", "brown",
        "black", "white", "teal", "navy", "maroon", "olive", "lime", "aqua",
        "gold", "fuchsia",
    ]
    nouns = ["car", "chair", "bowl", "crown", "bench", "boat", "vase", "desk", "book", "cup"]
    rng = random.Random(41)
    prompts = []
    for _ in range(count):
        cs = rng.sample(colors, 4)
        ns = rng.sample(nouns, 4)
        parts = [f"a {c} {n}" for c, n in zip(cs, ns)]
        prompts.append(" and ".join(parts))
    return prompts


def _run_fault_suite(tmp_path, tag: str, max_edit_rounds: int):
    config = EngineConfig(
        storage_root=tmp_path / tag,
        seed=5,
        max_edit_rounds=max_edit_rounds,
        mock_fault_colors={0: "silver"},
        mock_suite_name=f"acceptance-{tag}",
    )
    engine = Engine(config)
    sessions = []
    for index, prompt in enumerate(_fault_suite_prompts()):
        session = engine.create_session(prompt, mode="rule_decompose", session_id=f"p{index:03d}")
        sessions.append(engine.advance(session.id))
    images = [engine.latest_composed_image(s) for s in sessions]
    analyses = [s.analysis for s in sessions]
    layouts = [s.layout for s in sessions]
    accuracy = attribute_accuracy(images, analyses, config.endpoint_for("verify"), layouts)
    return engine, sessions, accuracy


def test_closed_self_correction_loop(tmp_path):
    started = time.perf_counter()

    _, corrected, corrected_accuracy = _run_fault_suite(tmp_path, "corrected", max_edit_rounds=2)
    assert all(s.state.phase is Phase.DONE for s in corrected)
    assert all(s.state.edit_round <= 2 for s in corrected)
    assert corrected_accuracy == 1.0

    _, uncorrected, uncorrected_accuracy = _run_fault_suite(tmp_path, "raw", max_edit_rounds=0)
    assert abs(uncorrected_accuracy - 0.75) <= 0.05

    elapsed = time.perf_counter() - started
    assert elapsed < 60.0
    report(
        "PASS: closed self-correction loop (50/50 Done, accuracy "
        f"{corrected_accuracy:.2f} vs {uncorrected_accuracy:.2f} uncorrected, {elapsed:.1f}s)"
    )


def test_guidance_math():
    rng = random.Random(97)
    config = GuidanceConfig()

    # bias grids only contain the two constants
    for _ in range(50):
        x, y = rng.randint(0, 380), rng.randint(0, 380)
        box = BBox(x, y, rng.randint(16, 512 - x), rng.randint(16, 512 - y))
        bias = attention_bias_for(box, (512, 512), config)
        assert set(np.unique(bias.grid)) <= {2.5, -10000.0}

    # foreground fraction converges: error vs box area stays within
    # 2 * perimeter / area per unit cell at grid sizes 64, 128, 256
    for _ in range(25):
        x, y = rng.randint(0, 380), rng.randint(0, 380)
        box = BBox(x, y, rng.randint(24, 512 - x), rng.randint(24, 512 - y))
        perimeter = 2 * (box.w + box.h)
        for downsample in (8, 4, 2):
            bias = attention_bias_for(
                box, (512, 512), GuidanceConfig(latent_downsample=downsample)
            )
            covered = bias.foreground_cells * downsample * downsample
            assert abs(covered - box.area) / box.area <= 2 * (perimeter / box.area) * downsample

    # element-wise mean against a brute-force oracle on 1000 random sets
    for _ in range(1000):
        count = rng.randint(1, 6)
        length = rng.randint(1, 16)
        vectors = [[rng.uniform(-100, 100) for _ in range(length)] for _ in range(count)]
        got = average_embeddings(vectors)
        want = [sum(v[i] for v in vectors) / count for i in range(length)]
        assert max(abs(g - w) for g, w in zip(got, want)) <= 1e-12
    report("PASS: guidance math (alpha constants, fraction convergence, 1000 mean oracles)")


def test_layout_engine_criteria():
    # 1000 seeded planner runs across a template suite are validate-clean
    templates = [
        "a blue horse and a brown vase",
        "a green bench and a red car and a yellow bowl",
        "The red apple was on top of the plate",
        "a bird above a car",
        "a cat on the left of a dog",
        "a bench to the right of a tree",
        "two hot dogs and a red car",
        "a cup next to a plate",
        "three green apples and a wooden table",
        "a purple crown and a pink vase and a teal boat and a gold cup",
    ]
    runs = 0
    for prompt in templates:
        analysis = decompose_rule_based(prompt)
        for seed in range(100):
            layout = plan_layout(analysis, seed=seed)
            assert validate(layout).clean, (prompt, seed)
            runs += 1
    assert runs == 1000

    # left/right antisymmetry over 10^4 random box pairs
    rng = random.Random(13)
    for _ in range(10_000):
        a = BBox(rng.randint(0, 400), rng.randint(0, 400), rng.randint(1, 100), rng.randint(1, 100))
        b = BBox(rng.randint(0, 400), rng.randint(0, 400), rng.randint(1, 100), rng.randint(1, 100))
        layout = SceneLayout(
            entries=[LayoutEntry(0, 0, "a cat", a), LayoutEntry(1, 0, "a dog", b)]
        )
        assert relation_satisfied(layout, Relation(0, 1, "left")) == relation_satisfied(
            layout, Relation(1, 0, "right")
        )

    # the apple/plate boxes from the relationship example satisfy on_top
    layout = SceneLayout(
        entries=[
            LayoutEntry(0, 0, "a red apple", BBox(235, 230, 60, 60)),
            LayoutEntry(1, 0, "a plate", BBox(175, 210, 180, 180)),
        ]
    )
    assert relation_satisfied(layout, Relation(0, 1, "on_top"))
    report("PASS: layout engine (1000/1000 clean plans, antisymmetry on 10^4 pairs, apple-on-plate)")


def test_eval_harness_criteria():
    # iou equals the pixel-count oracle exactly on 10^4 random pairs
    rng = random.Random(29)
    for _ in range(10_000):
        a = BBox(rng.randint(0, 180), rng.randint(0, 180), rng.randint(1, 60), rng.randint(1, 60))
        b = BBox(rng.randint(0, 180), rng.randint(0, 180), rng.randint(1, 60), rng.randint(1, 60))
        assert iou(a, b) == pixel_iou(a, b)

    # AP equals the exhaustive-matching oracle on 20 constructed cases
    for detections, layout in constructed_cases(20):
        for threshold in (0.5, 0.75, 0.95):
            got = average_precision(detections, layout, thresholds=(threshold,)).ap
            assert got == pytest.approx(exhaustive_ap(detections, layout, threshold))

    # rectangle-fitting detector recovers clean mock renders at AP50 = 1.0
    prompts = [
        "a blue horse and a brown vase",
        "a green bench and a purple crown",
        "two hot dogs",
        "an oval mirror and a triangular shelf",
        "a red car and a teal boat and a gold cup",
    ]
    for prompt in prompts:
        analysis = decompose_rule_based(prompt)
        for seed in (1, 2, 3):
            layout = plan_layout(analysis, seed=seed)
            detections = detect_rectangles(render_layout(layout), detector_legend(layout))
            assert average_precision(detections, layout).ap50 == 1.0, (prompt, seed)
    report("PASS: eval harness (10^4 exact iou, 20 AP oracle cases, detector AP50 = 1.0)")


def test_orchestrator_kill_and_resume(tmp_path):
    prompt = "a blue horse and a brown vase"

    def config_for(tag: str) -> EngineConfig:
        return EngineConfig(
            storage_root=tmp_path / tag,
            seed=5,
            mock_fault_colors={0: "silver"},
            mock_suite_name=f"resume-{tag}",
        )

    baseline_config = config_for("baseline")
    baseline = Engine(baseline_config)
    session = baseline.create_session(prompt, mode="rule_decompose", session_id="s")
    done = baseline.advance(session.id)
    assert done.state.phase is Phase.DONE
    expected = {name: record.sha256 for name, record in done.artifacts.items()}
    total_steps = len([e for e in done.state.audit if "to" in e])

    # kill after every k-th step, resume with a fresh engine, compare hashes
    for kill_after in range(1, total_steps):
        config = config_for(f"kill{kill_after}")
        Engine(config).create_session(prompt, mode="rule_decompose", session_id="s")
        Engine(config).advance("s", max_steps=kill_after)
        resumed = Engine(config).advance("s")
        assert resumed.state.phase is Phase.DONE
        got = {name: record.sha256 for name, record in resumed.artifacts.items()}
        assert got == expected, f"diverged when killed after step {kill_after}"
    report(f"PASS: kill-and-resume ({total_steps - 1} cut points, identical artifact hashes)")


def test_orchestrator_race(tmp_path):
    config = EngineConfig(
        storage_root=tmp_path / "race",
        seed=5,
        mock_suite_name="race-suite",
    )
    engine = Engine(config)
    for iteration in range(100):
        session = engine.create_session("a horse", mode="rule_decompose", session_id=f"r{iteration:03d}")
        workers = []

        def step(sid=session.id):
            try:
                engine.advance(sid, max_steps=1)
            except IllegalTransition:
                pass

        for _ in range(3):
            thread = threading.Thread(target=step)
            workers.append(thread)
            thread.start()
        for thread in workers:
            thread.join()
        final = engine.get_session(session.id)
        seqs = [e["seq"] for e in final.state.audit]
        assert seqs == sorted(set(seqs)), "double-applied transition"
        transitions = [(e["from"], e["to"]) for e in final.state.audit if "to" in e]
        assert len(transitions) == len(set(range(len(transitions))))  # sequential log
        # no transition applied twice
        assert len(transitions) == len(set(enumerate(transitions)))
        phases = [t[1] for t in transitions]
        assert phases.count("done") <= 1
    report("PASS: concurrent advance race (100 iterations, no double-applied transitions)")
