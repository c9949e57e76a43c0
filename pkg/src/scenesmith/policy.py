"""Tool planning rules and the verification/feedback state machine.

The plan shapes follow the four-branch routing: attribute-heavy prompts
go through concept customization, relation-heavy ones through
layout-to-image, mixed prompts compose via layout then correct attributes
by local editing, and simple prompts call text-to-image directly.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from enum import Enum

from .analysis import Category, PromptAnalysis, pluralize
from .errors import IllegalTransition, InvalidFeedback
from .layout import LayoutDiff, SceneLayout, apply_diff

DEFAULT_MAX_EDIT_ROUNDS = 2
DEFAULT_IMAGES_PER_CONCEPT = 4


class StepKind(str, Enum):
    GENERATE_CONCEPT_IMAGES = "generate_concept_images"
    CUSTOMIZE = "customize"
    LAYOUT_TO_IMAGE = "layout_to_image"
    TEXT_TO_IMAGE = "text_to_image"
    VERIFY = "verify"
    LOCAL_EDIT = "local_edit"
    REQUEST_HUMAN_FEEDBACK = "request_human_feedback"


@dataclass(frozen=True)
class VerificationQuestion:
    object_index: int
    text: str

    def to_dict(self) -> dict:
        return {"object_index": self.object_index, "text": self.text}

    @classmethod
    def from_dict(cls, data: dict) -> "VerificationQuestion":
        return cls(data["object_index"], data["text"])


@dataclass
class PlanStep:
    kind: StepKind
    object_indices: list[int] = field(default_factory=list)
    images_per_concept: int = DEFAULT_IMAGES_PER_CONCEPT
    questions: list[VerificationQuestion] = field(default_factory=list)
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "object_indices": self.object_indices,
            "images_per_concept": self.images_per_concept,
            "questions": [q.to_dict() for q in self.questions],
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PlanStep":
        return cls(
            kind=StepKind(data["kind"]),
            object_indices=list(data.get("object_indices", [])),
            images_per_concept=data.get("images_per_concept", DEFAULT_IMAGES_PER_CONCEPT),
            questions=[VerificationQuestion.from_dict(q) for q in data.get("questions", [])],
            reason=data.get("reason", ""),
        )


@dataclass
class ToolPlan:
    steps: list[PlanStep] = field(default_factory=list)
    local_edit_armed: bool = False

    def to_dict(self) -> dict:
        return {"steps": [s.to_dict() for s in self.steps], "local_edit_armed": self.local_edit_armed}

    @classmethod
    def from_dict(cls, data: dict) -> "ToolPlan":
        return cls(
            steps=[PlanStep.from_dict(s) for s in data.get("steps", [])],
            local_edit_armed=data.get("local_edit_armed", False),
        )


def build_verification_questions(analysis: PromptAnalysis) -> list[VerificationQuestion]:
    """One yes/no question per (object, attribute), plus counts above one."""
    questions: list[VerificationQuestion] = []
    for index, obj in enumerate(analysis.objects):
        for attr in obj.attributes:
            questions.append(
                VerificationQuestion(index, f"Is the {obj.noun} in the image {attr.value}?")
            )
        if obj.count > 1:
            questions.append(
                VerificationQuestion(
                    index, f"Are there {obj.count} {pluralize(obj.noun)} in the image?"
                )
            )
    return questions


def make_plan(
    analysis: PromptAnalysis, images_per_concept: int = DEFAULT_IMAGES_PER_CONCEPT
) -> ToolPlan:
    """Map the routing category to one of the four plan shapes."""
    all_objects = list(range(len(analysis.objects)))
    concepts = PlanStep(
        StepKind.GENERATE_CONCEPT_IMAGES,
        object_indices=all_objects,
        images_per_concept=images_per_concept,
    )
    verify = PlanStep(StepKind.VERIFY, questions=build_verification_questions(analysis))

    if analysis.category is Category.ATTRIBUTE_ONLY:
        return ToolPlan([concepts, PlanStep(StepKind.CUSTOMIZE), verify])
    if analysis.category is Category.RELATION_ONLY:
        return ToolPlan([PlanStep(StepKind.LAYOUT_TO_IMAGE), verify])
    if analysis.category is Category.BOTH:
        return ToolPlan(
            [concepts, PlanStep(StepKind.LAYOUT_TO_IMAGE), verify], local_edit_armed=True
        )
    return ToolPlan([PlanStep(StepKind.TEXT_TO_IMAGE)])


# --- session state machine ------------------------------------------------------


class Phase(str, Enum):
    NEW = "new"
    DECOMPOSED = "decomposed"
    LAID_OUT = "laid_out"
    CONCEPT_IMAGES_READY = "concept_images_ready"
    COMPOSED = "composed"
    VERIFIED = "verified"
    NEEDS_EDIT = "needs_edit"
    AWAITING_FEEDBACK = "awaiting_feedback"
    DONE = "done"
    FAILED = "failed"


TERMINAL_PHASES = {Phase.DONE, Phase.FAILED}

# Declared transition graph; anything else raises IllegalTransition.
TRANSITIONS: dict[Phase, set[Phase]] = {
    Phase.NEW: {Phase.DECOMPOSED, Phase.FAILED},
    Phase.DECOMPOSED: {Phase.LAID_OUT, Phase.COMPOSED, Phase.AWAITING_FEEDBACK, Phase.FAILED},
    Phase.LAID_OUT: {
        Phase.LAID_OUT,
        Phase.CONCEPT_IMAGES_READY,
        Phase.COMPOSED,
        Phase.AWAITING_FEEDBACK,
        Phase.FAILED,
    },
    Phase.CONCEPT_IMAGES_READY: {Phase.COMPOSED, Phase.LAID_OUT, Phase.AWAITING_FEEDBACK, Phase.FAILED},
    Phase.COMPOSED: {
        Phase.COMPOSED,
        Phase.VERIFIED,
        Phase.NEEDS_EDIT,
        Phase.DONE,
        Phase.LAID_OUT,
        Phase.AWAITING_FEEDBACK,
        Phase.FAILED,
    },
    Phase.VERIFIED: {Phase.DONE, Phase.FAILED},
    Phase.NEEDS_EDIT: {Phase.COMPOSED, Phase.AWAITING_FEEDBACK, Phase.DONE, Phase.LAID_OUT, Phase.FAILED},
    Phase.AWAITING_FEEDBACK: {Phase.LAID_OUT, Phase.COMPOSED, Phase.DECOMPOSED, Phase.DONE, Phase.FAILED},
    Phase.DONE: set(),
    Phase.FAILED: set(),
}


@dataclass
class SessionState:
    """Verification-loop state: phase, edit budget, artifacts, audit log."""

    phase: Phase = Phase.NEW
    edit_round: int = 0
    plan_cursor: int = 0
    artifacts: dict[str, str] = field(default_factory=dict)
    audit: list[dict] = field(default_factory=list)

    def record(self, event: str, detail: dict | None = None) -> None:
        self.audit.append(
            {
                "seq": len(self.audit),
                "at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
                "event": event,
                "phase": self.phase.value,
                "detail": detail or {},
            }
        )

    def transition(self, to_phase: Phase, event: str, detail: dict | None = None) -> None:
        if to_phase not in TRANSITIONS[self.phase]:
            raise IllegalTransition(f"{self.phase.value} -> {to_phase.value} is not allowed")
        entry = {
            "seq": len(self.audit),
            "at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "event": event,
            "from": self.phase.value,
            "to": to_phase.value,
            "detail": detail or {},
        }
        self.phase = to_phase
        self.audit.append(entry)

    def to_dict(self) -> dict:
        return {
            "phase": self.phase.value,
            "edit_round": self.edit_round,
            "plan_cursor": self.plan_cursor,
            "artifacts": dict(self.artifacts),
            "audit": list(self.audit),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SessionState":
        return cls(
            phase=Phase(data.get("phase", "new")),
            edit_round=data.get("edit_round", 0),
            plan_cursor=data.get("plan_cursor", 0),
            artifacts=dict(data.get("artifacts", {})),
            audit=list(data.get("audit", [])),
        )


def replay_transitions(audit: list[dict]) -> SessionState:
    """Re-apply logged transitions to a fresh state; used to check replays."""
    state = SessionState()
    for entry in audit:
        if "to" not in entry:
            continue
        state.transition(Phase(entry["to"]), entry["event"], entry.get("detail"))
        detail = entry.get("detail") or {}
        if "edit_round" in detail:
            state.edit_round = detail["edit_round"]
    return state


# --- verification results and next action ----------------------------------------


@dataclass(frozen=True)
class QuestionResult:
    object_index: int
    question: str
    answer: bool
    confidence: float = 1.0

    def to_dict(self) -> dict:
        return {
            "object_index": self.object_index,
            "question": self.question,
            "answer": self.answer,
            "confidence": self.confidence,
        }


@dataclass
class VerificationResult:
    results: list[QuestionResult] = field(default_factory=list)
    error: str | None = None

    @property
    def all_passed(self) -> bool:
        return self.error is None and all(r.answer for r in self.results)

    @property
    def failing_objects(self) -> list[int]:
        return sorted({r.object_index for r in self.results if not r.answer})

    def to_dict(self) -> dict:
        return {"results": [r.to_dict() for r in self.results], "error": self.error}


class ActionKind(str, Enum):
    DONE = "done"
    LOCAL_EDIT = "local_edit"
    REQUEST_HUMAN_FEEDBACK = "request_human_feedback"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    failing_objects: tuple[int, ...] = ()
    reason: str = ""


def next_action(
    state: SessionState,
    verification: VerificationResult,
    max_edit_rounds: int = DEFAULT_MAX_EDIT_ROUNDS,
) -> Action:
    """Decide what follows a verification pass over the composed image."""
    if state.phase not in {Phase.COMPOSED, Phase.VERIFIED, Phase.NEEDS_EDIT}:
        raise IllegalTransition(f"next_action not allowed in phase {state.phase.value}")
    if verification.error is not None:
        return Action(ActionKind.REQUEST_HUMAN_FEEDBACK, reason="verifier unavailable")
    if verification.all_passed:
        return Action(ActionKind.DONE)
    if state.edit_round < max_edit_rounds:
        return Action(ActionKind.LOCAL_EDIT, failing_objects=tuple(verification.failing_objects))
    return Action(ActionKind.REQUEST_HUMAN_FEEDBACK, reason="verification exhausted")


# --- human feedback ----------------------------------------------------------------


@dataclass(frozen=True)
class PlanOverride:
    steps: list[PlanStep]

    def to_dict(self) -> dict:
        return {"steps": [s.to_dict() for s in self.steps]}


@dataclass(frozen=True)
class VerificationOverride:
    passed: bool

    def to_dict(self) -> dict:
        return {"passed": self.passed}


Feedback = LayoutDiff | PlanOverride | VerificationOverride


@dataclass
class FeedbackOutcome:
    state: SessionState
    layout: SceneLayout | None
    plan: ToolPlan


def incorporate_feedback(
    state: SessionState,
    feedback: Feedback,
    layout: SceneLayout | None,
    plan: ToolPlan,
) -> FeedbackOutcome:
    """Fold human feedback into the session, rewinding phase as needed.

    Feedback is accepted at any non-terminal phase, solicited or not.
    """
    if state.phase in TERMINAL_PHASES:
        raise InvalidFeedback(f"session is terminal ({state.phase.value})")

    if isinstance(feedback, LayoutDiff):
        if layout is None:
            raise InvalidFeedback("no layout to edit yet")
        new_layout = apply_diff(layout, feedback)
        state.transition(Phase.LAID_OUT, "feedback.layout_diff", {"edits": len(feedback.edits)})
        # composition re-runs from the layout: rewind the plan to the first
        # composition step (keeping finished concept steps) and reset the
        # edit budget
        state.plan_cursor = min(state.plan_cursor, _first_composition_step(plan))
        state.edit_round = 0
        return FeedbackOutcome(state, new_layout, plan)

    if isinstance(feedback, PlanOverride):
        if not feedback.steps:
            raise InvalidFeedback("plan override must contain at least one step")
        done_steps = plan.steps[: state.plan_cursor]
        new_plan = ToolPlan(steps=done_steps + list(feedback.steps), local_edit_armed=plan.local_edit_armed)
        if state.phase is Phase.AWAITING_FEEDBACK:
            resume = Phase.COMPOSED if "composed" in state.artifacts else Phase.LAID_OUT
            if layout is None:
                resume = Phase.DECOMPOSED
            state.transition(resume, "feedback.plan_override", {"steps": len(feedback.steps)})
        else:
            state.record("feedback.plan_override", {"steps": len(feedback.steps)})
        return FeedbackOutcome(state, layout, new_plan)

    if isinstance(feedback, VerificationOverride):
        if feedback.passed:
            state.transition(Phase.DONE, "feedback.verification_override", {"passed": True})
        else:
            if state.phase is not Phase.NEEDS_EDIT:
                state.transition(Phase.NEEDS_EDIT, "feedback.verification_override", {"passed": False})
            else:
                state.record("feedback.verification_override", {"passed": False})
        return FeedbackOutcome(state, layout, plan)

    raise InvalidFeedback(f"unsupported feedback type {type(feedback).__name__}")


def _first_composition_step(plan: ToolPlan) -> int:
    for i, step in enumerate(plan.steps):
        if step.kind in {StepKind.CUSTOMIZE, StepKind.LAYOUT_TO_IMAGE, StepKind.TEXT_TO_IMAGE}:
            return i
    return 0
