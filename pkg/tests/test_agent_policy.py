"""Plan shapes, the verification state machine, and feedback handling."""

import pytest

from scenesmith.analysis import decompose_rule_based
from scenesmith.errors import IllegalTransition, InvalidFeedback
from scenesmith.layout import BBox, LayoutDiff, LayoutEntry, Move, Resize, SceneLayout
from scenesmith.policy import (
    Action,
    ActionKind,
    Phase,
    PlanOverride,
    PlanStep,
    QuestionResult,
    SessionState,
    StepKind,
    ToolPlan,
    VerificationOverride,
    VerificationResult,
    build_verification_questions,
    incorporate_feedback,
    make_plan,
    next_action,
    replay_transitions,
)

PLAN_SHAPES = {
    "attribute-only": [StepKind.GENERATE_CONCEPT_IMAGES, StepKind.CUSTOMIZE, StepKind.VERIFY],
    "relationship-only": [StepKind.LAYOUT_TO_IMAGE, StepKind.VERIFY],
    "both": [StepKind.GENERATE_CONCEPT_IMAGES, StepKind.LAYOUT_TO_IMAGE, StepKind.VERIFY],
    "simple": [StepKind.TEXT_TO_IMAGE],
}


def plan_kinds(plan: ToolPlan) -> list[StepKind]:
    return [step.kind for step in plan.steps]


class TestMakePlan:
    def test_attribute_only_starts_with_concepts_then_customize(self):
        analysis = decompose_rule_based("a blue horse and a brown vase")
        plan = make_plan(analysis)
        assert plan_kinds(plan) == PLAN_SHAPES["attribute-only"]
        assert not plan.local_edit_armed

    def test_relation_only_starts_with_layout_to_image(self):
        analysis = decompose_rule_based("The red apple was on top of the plate")
        plan = make_plan(analysis)
        assert plan_kinds(plan) == PLAN_SHAPES["relationship-only"]

    def test_both_arms_local_edit(self):
        analysis = decompose_rule_based("The blue bowl was on top of the white placemat")
        plan = make_plan(analysis)
        assert plan_kinds(plan) == PLAN_SHAPES["both"]
        assert plan.local_edit_armed

    def test_simple_is_text_to_image_only(self):
        analysis = decompose_rule_based("a horse")
        assert plan_kinds(make_plan(analysis)) == PLAN_SHAPES["simple"]

    def test_exactly_four_shapes_exist(self):
        seen = set()
        for prompt in [
            "a blue horse and a brown vase",
            "The red apple was on top of the plate",
            "The blue bowl was on top of the white placemat",
            "a horse",
        ]:
            seen.add(tuple(plan_kinds(make_plan(decompose_rule_based(prompt)))))
        assert len(seen) == 4

    def test_plan_serialization_roundtrip(self):
        plan = make_plan(decompose_rule_based("a blue horse and a brown vase"))
        assert ToolPlan.from_dict(plan.to_dict()).to_dict() == plan.to_dict()


class TestVerificationQuestions:
    def test_color_question(self):
        questions = build_verification_questions(decompose_rule_based("a blue horse"))
        assert [q.text for q in questions] == ["Is the horse in the image blue?"]

    def test_two_attributes_two_questions(self):
        analysis = decompose_rule_based("a shiny red apple")
        questions = build_verification_questions(analysis)
        assert len(questions) == len(analysis.objects[0].attributes) >= 2

    def test_count_question(self):
        questions = build_verification_questions(decompose_rule_based("two hot dogs"))
        assert "Are there 2 hot dogs in the image?" in [q.text for q in questions]


def composed_state() -> SessionState:
    state = SessionState()
    state.transition(Phase.DECOMPOSED, "t")
    state.transition(Phase.LAID_OUT, "t")
    state.transition(Phase.COMPOSED, "t")
    return state


def result_with_failures(failing: list[int]) -> VerificationResult:
    results = [QuestionResult(0, "Is the horse in the image blue?", 0 not in failing)]
    results.append(QuestionResult(1, "Is the vase in the image brown?", 1 not in failing))
    return VerificationResult(results=results)


class TestNextAction:
    def test_all_pass_is_done(self):
        assert next_action(composed_state(), result_with_failures([])).kind is ActionKind.DONE

    def test_one_failure_triggers_local_edit(self):
        action = next_action(composed_state(), result_with_failures([1]))
        assert action == Action(ActionKind.LOCAL_EDIT, failing_objects=(1,))

    def test_exhausted_rounds_request_feedback(self):
        state = composed_state()
        state.edit_round = 2
        action = next_action(state, result_with_failures([0]), max_edit_rounds=2)
        assert action.kind is ActionKind.REQUEST_HUMAN_FEEDBACK
        assert action.reason == "verification exhausted"

    def test_verifier_error_requests_feedback(self):
        action = next_action(composed_state(), VerificationResult(error="boom"))
        assert action.kind is ActionKind.REQUEST_HUMAN_FEEDBACK
        assert action.reason == "verifier unavailable"

    def test_illegal_phase(self):
        with pytest.raises(IllegalTransition):
            next_action(SessionState(), result_with_failures([]))


class TestStateMachine:
    def test_declared_graph_enforced(self):
        state = SessionState()
        with pytest.raises(IllegalTransition):
            state.transition(Phase.COMPOSED, "skip")

    def test_terminal_phases_have_no_exits(self):
        state = composed_state()
        state.transition(Phase.DONE, "t")
        with pytest.raises(IllegalTransition):
            state.transition(Phase.COMPOSED, "t")

    def test_replay_reproduces_final_state(self):
        state = composed_state()
        state.transition(Phase.NEEDS_EDIT, "t", {"edit_round": 1})
        state.transition(Phase.COMPOSED, "t")
        replayed = replay_transitions(state.audit)
        assert replayed.phase == state.phase
        assert replayed.edit_round == 1

    def test_serialization_roundtrip(self):
        state = composed_state()
        assert SessionState.from_dict(state.to_dict()).to_dict() == state.to_dict()


def small_layout() -> SceneLayout:
    return SceneLayout(
        entries=[
            LayoutEntry(0, 0, "a glass cup", BBox(50, 50, 300, 300)),
            LayoutEntry(1, 0, "a plate", BBox(360, 300, 100, 100)),
        ]
    )


class TestIncorporateFeedback:
    def test_layout_diff_rewinds_to_laid_out(self):
        # shrinking an oversized box re-runs composition from the layout
        state = composed_state()
        plan = make_plan(decompose_rule_based("The blue bowl was on top of the white placemat"))
        state.plan_cursor = 2
        outcome = incorporate_feedback(state, LayoutDiff([Resize(0, 120, 120)]), small_layout(), plan)
        assert outcome.state.phase is Phase.LAID_OUT
        assert outcome.layout.entries[0].box.w == 120
        assert outcome.state.plan_cursor == 1  # back to the composition step
        assert outcome.state.edit_round == 0

    def test_layout_diff_without_layout_invalid(self):
        state = SessionState()
        state.transition(Phase.DECOMPOSED, "t")
        with pytest.raises(InvalidFeedback):
            incorporate_feedback(state, LayoutDiff([Move(0, 1, 1)]), None, ToolPlan())

    def test_verification_override_pass_reaches_done(self):
        state = composed_state()
        state.transition(Phase.NEEDS_EDIT, "t")
        outcome = incorporate_feedback(state, VerificationOverride(passed=True), small_layout(), ToolPlan())
        assert outcome.state.phase is Phase.DONE

    def test_plan_override_replaces_remaining_steps(self):
        state = composed_state()
        plan = make_plan(decompose_rule_based("a blue horse and a brown vase"))
        state.plan_cursor = 1
        override = PlanOverride(steps=[PlanStep(StepKind.TEXT_TO_IMAGE)])
        outcome = incorporate_feedback(state, override, small_layout(), plan)
        assert [s.kind for s in outcome.plan.steps] == [
            StepKind.GENERATE_CONCEPT_IMAGES,
            StepKind.TEXT_TO_IMAGE,
        ]

    def test_empty_plan_override_invalid(self):
        with pytest.raises(InvalidFeedback):
            incorporate_feedback(composed_state(), PlanOverride(steps=[]), small_layout(), ToolPlan())

    def test_terminal_state_rejects_feedback(self):
        state = composed_state()
        state.transition(Phase.DONE, "t")
        with pytest.raises(InvalidFeedback):
            incorporate_feedback(state, VerificationOverride(passed=True), small_layout(), ToolPlan())

    def test_unsolicited_feedback_from_needs_edit(self):
        state = composed_state()
        state.transition(Phase.NEEDS_EDIT, "t")
        outcome = incorporate_feedback(
            state, LayoutDiff([Move(1, 10, 10)]), small_layout(), ToolPlan([PlanStep(StepKind.VERIFY)])
        )
        assert outcome.state.phase is Phase.LAID_OUT
