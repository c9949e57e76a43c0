"""Session lifecycle: decomposition, plan execution, feedback, export.

The engine drives one session at a time through its plan, dispatching
tool requests, persisting after every step, and appending every tool
call and phase transition to the audit log.  Sessions are resumable from
any persisted step and safe against concurrent advances.
"""

from __future__ import annotations

import base64
import copy
import datetime as _dt
import hashlib
import json
import logging
import re
import secrets
import shutil
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .agent_io import build_agent_prompt, parse_agent_response
from .analysis import (
    Category,
    PromptAnalysis,
    Relation,
    decompose_rule_based,
    simple_fallback_analysis,
)
from .config import EngineConfig
from .dispatch import dispatch, register_handler
from .errors import (
    IllegalTransition,
    LayoutInfeasible,
    MalformedResponse,
    ToolUnavailable,
    UnparseablePrompt,
)
from .guidance import CharSpan, attention_bias_for, edit_guidance_from_mask, mask_from_payload
from .layout import SceneLayout, plan_layout, rasterize, validate
from .mocks import FaultInjector, MockToolSuite
from .policy import (
    ActionKind,
    Phase,
    QuestionResult,
    SessionState,
    StepKind,
    TERMINAL_PHASES,
    ToolPlan,
    VerificationResult,
    build_verification_questions,
    incorporate_feedback,
    make_plan,
    next_action,
)
from .protocol import (
    CompleteRequest,
    CustomizeRequest,
    ImagePayload,
    LayoutToImageRequest,
    LocalEditRequest,
    SegmentRequest,
    TextToImageRequest,
    ToolRequest,
    ToolResponse,
    VerifyRequest,
    png_bytes,
    request_from_dict,
)
from .store import PipelineSession, SessionStore, sha256_hex

logger = logging.getLogger(__name__)

MODES = ("auto", "llm_decompose", "rule_decompose")


def _response_hash(response: ToolResponse) -> str:
    return sha256_hex(json.dumps(response.to_dict(), sort_keys=True).encode("utf-8"))


def _new_session_id() -> str:
    stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%S")
    return f"{stamp}-{secrets.token_hex(3)}"


class Engine:
    def __init__(self, config: EngineConfig):
        self.config = config
        self.store = SessionStore(config.storage_root)
        if config.mock_mode:
            suite = MockToolSuite(
                canvas=config.canvas,
                injector=FaultInjector(dict(config.mock_fault_colors)),
            )
            register_handler(config.mock_suite_name, suite.handle)

    # --- session creation -------------------------------------------------

    def create_session(
        self,
        prompt: str,
        mode: str = "auto",
        category_override: str | None = None,
        session_id: str | None = None,
    ) -> PipelineSession:
        if not prompt or not prompt.strip():
            raise ValueError("prompt must be non-empty")
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

        analysis, llm_layout, path = self._decompose(prompt, mode)
        if category_override:
            analysis.category = Category(category_override)
        plan = make_plan(analysis, self.config.images_per_concept)

        session = PipelineSession(
            id=session_id or _new_session_id(),
            prompt=prompt,
            mode=mode,
            seed=self.config.seed,
            analysis=analysis,
            llm_layout=llm_layout,
            plan=plan,
            state=SessionState(),
            decomposition_path=path,
        )
        session.state.record(
            "created",
            {"mode": mode, "decomposition_path": path, "category": analysis.category.value},
        )
        self.store.create(session)
        return session

    def _decompose(self, prompt: str, mode: str):
        lexicons = self.config.lexicons()
        if mode == "rule_decompose":
            return self._rule_decompose(prompt, lexicons)
        if mode == "llm_decompose":
            return self._llm_decompose(prompt, lexicons)
        try:
            return self._llm_decompose(prompt, lexicons)
        except (MalformedResponse, ToolUnavailable) as exc:
            logger.info("agent decomposition failed (%s); falling back to rules", exc)
            analysis, layout, _ = self._rule_decompose(prompt, lexicons)
            return analysis, layout, "rule_after_llm_failure"

    def _rule_decompose(self, prompt: str, lexicons):
        try:
            return decompose_rule_based(prompt, lexicons), None, "rule"
        except UnparseablePrompt:
            return simple_fallback_analysis(prompt), None, "rule_fallback_simple"

    def _llm_decompose(self, prompt: str, lexicons):
        request = CompleteRequest(prompt=build_agent_prompt(prompt))
        response = dispatch(request, self.config.endpoint_for("complete"))
        if not response.ok or response.text is None:
            raise MalformedResponse(f"completion failed: {response.error_message}")
        analysis, layout = parse_agent_response(response.text, self.config.canvas, raw_prompt=prompt)
        self._enrich_relations(analysis, prompt, lexicons)
        return analysis, layout, "llm"

    def _enrich_relations(self, analysis: PromptAnalysis, prompt: str, lexicons) -> None:
        """Relations are not expressible in the answer grammar; recover them
        from the rule grammar when object nouns line up."""
        try:
            rule = decompose_rule_based(prompt, lexicons)
        except UnparseablePrompt:
            return
        noun_to_index: dict[str, int] = {}
        for index, obj in enumerate(analysis.objects):
            noun_to_index.setdefault(obj.noun, index)
        for relation in rule.relations:
            s_noun = rule.objects[relation.subject_index].noun
            o_noun = rule.objects[relation.object_index].noun
            si, oi = noun_to_index.get(s_noun), noun_to_index.get(o_noun)
            if si is not None and oi is not None and si != oi:
                analysis.relations.append(Relation(si, oi, relation.kind, relation.raw_text))

    # --- session access -----------------------------------------------------

    def get_session(self, session_id: str) -> PipelineSession:
        return self.store.load(session_id)

    def list_sessions(self, phase: str | None = None) -> list[PipelineSession]:
        sessions = [self.store.load(sid) for sid in self.store.list_ids()]
        if phase is not None:
            sessions = [s for s in sessions if s.state.phase.value == phase]
        return sessions

    def latest_composed_image(self, session: PipelineSession) -> ImagePayload | None:
        if session.composed_name is None:
            return None
        return self._image_ref(session, session.composed_name)

    def _image_ref(self, session: PipelineSession, name: str) -> ImagePayload:
        path = self.store.root / session.id / session.artifacts[name].file
        if self.config.image_transport == "path":
            return ImagePayload(path=str(path))
        return ImagePayload(b64=base64.b64encode(path.read_bytes()).decode("ascii"))

    # --- advancing ------------------------------------------------------------

    def advance(self, session_id: str, max_steps: int | None = None) -> PipelineSession:
        with self.store.lease(session_id):
            session = self.store.load(session_id)
            state = session.state
            if state.phase in TERMINAL_PHASES:
                raise IllegalTransition(f"session {session_id} is terminal ({state.phase.value})")
            if state.phase is Phase.AWAITING_FEEDBACK:
                raise IllegalTransition(f"session {session_id} is awaiting feedback")
            steps_done = 0
            while (
                state.phase not in TERMINAL_PHASES
                and state.phase is not Phase.AWAITING_FEEDBACK
                and (max_steps is None or steps_done < max_steps)
            ):
                revision = session.revision
                self._execute_one(session)
                self.store.save(session, expected_revision=revision)
                steps_done += 1
            return copy.deepcopy(session)

    def _current_step(self, session: PipelineSession):
        plan = session.plan
        if plan is None or session.state.plan_cursor >= len(plan.steps):
            return None
        return plan.steps[session.state.plan_cursor]

    def _execute_one(self, session: PipelineSession) -> None:
        state = session.state
        try:
            if state.phase is Phase.NEW:
                state.transition(
                    Phase.DECOMPOSED,
                    "decompose",
                    {
                        "path": session.decomposition_path,
                        "category": session.analysis.category.value,
                        "objects": len(session.analysis.objects),
                    },
                )
                return

            if state.phase is Phase.DECOMPOSED:
                step = self._current_step(session)
                if step is not None and step.kind is StepKind.TEXT_TO_IMAGE:
                    self._run_text_to_image(session)
                    return
                self._establish_layout(session)
                return

            if state.phase in (Phase.LAID_OUT, Phase.CONCEPT_IMAGES_READY, Phase.COMPOSED):
                step = self._current_step(session)
                if step is None:
                    if state.phase is Phase.COMPOSED:
                        state.transition(Phase.DONE, "plan_complete")
                    else:
                        state.transition(Phase.FAILED, "plan_exhausted_without_composition")
                    return
                if step.kind is StepKind.GENERATE_CONCEPT_IMAGES:
                    self._run_concepts(session, step)
                elif step.kind is StepKind.CUSTOMIZE:
                    self._run_customize(session)
                elif step.kind is StepKind.LAYOUT_TO_IMAGE:
                    self._run_layout_to_image(session)
                elif step.kind is StepKind.TEXT_TO_IMAGE:
                    self._run_text_to_image(session)
                elif step.kind is StepKind.VERIFY:
                    self._run_verify(session, step)
                elif step.kind is StepKind.REQUEST_HUMAN_FEEDBACK:
                    state.plan_cursor += 1
                    state.transition(
                        Phase.AWAITING_FEEDBACK, "plan_requested_feedback", {"reason": step.reason}
                    )
                else:  # LOCAL_EDIT placed explicitly in a plan override
                    state.transition(Phase.NEEDS_EDIT, "plan_local_edit")
                    state.plan_cursor += 1
                    session.pending_edit = list(step.object_indices)
                return

            if state.phase is Phase.VERIFIED:
                state.transition(Phase.DONE, "verified")
                return

            if state.phase is Phase.NEEDS_EDIT:
                self._run_local_edit(session)
                return

            raise IllegalTransition(f"cannot execute in phase {state.phase.value}")
        except ToolUnavailable as exc:
            state.transition(Phase.AWAITING_FEEDBACK, "tool_unavailable", {"reason": str(exc)})
        except LayoutInfeasible as exc:
            state.transition(Phase.AWAITING_FEEDBACK, "layout_infeasible", {"reason": str(exc)})

    # --- individual steps -------------------------------------------------------

    def _establish_layout(self, session: PipelineSession) -> None:
        state = session.state
        if session.layout is None:
            if session.llm_layout is not None and session.llm_layout.entries:
                session.layout = session.llm_layout
                source = "llm"
            else:
                session.layout = plan_layout(
                    session.analysis,
                    session.seed,
                    canvas=self.config.canvas,
                    tau_overlap=self.config.tau_overlap,
                    eps_contact=self.config.eps_contact,
                    delta_near=self.config.delta_near,
                )
                source = "planner"
        else:
            source = "existing"
        report = validate(session.layout, self.config.tau_overlap)
        state.transition(
            Phase.LAID_OUT,
            "layout_established",
            {"source": source, "clean": report.clean, "violations": len(report.violations)},
        )

    def _call(self, session: PipelineSession, request: ToolRequest) -> ToolResponse:
        response = dispatch(request, self.config.endpoint_for(request.kind))
        session.state.record(
            "tool_call",
            {
                "kind": request.kind.value,
                "request": request.to_dict(),
                "status": response.status,
                "response_sha256": _response_hash(response),
            },
        )
        return response

    @staticmethod
    def _payload_png(payload: ImagePayload) -> bytes:
        # mock and adapter responses carry PNG bytes already; avoid a
        # decode/re-encode round trip
        if payload.b64 is not None:
            return base64.b64decode(payload.b64)
        return png_bytes(payload.to_array())

    def _store_composed(self, session: PipelineSession, payload: ImagePayload, step: str) -> None:
        count = sum(1 for name in session.artifacts if name.startswith("composed_"))
        name = f"composed_{count:03d}"
        self.store.write_artifact(
            session, name, self._payload_png(payload), step=step, suffix=".png"
        )
        session.composed_name = name

    def _run_text_to_image(self, session: PipelineSession) -> None:
        state = session.state
        response = self._call(
            session, TextToImageRequest(prompt=session.prompt, seed=session.seed)
        )
        if not response.ok or not response.images:
            raise ToolUnavailable(f"text-to-image returned {response.error_code}")
        self._store_composed(session, response.images[0], step="text_to_image")
        state.plan_cursor += 1
        state.transition(Phase.COMPOSED, "text_to_image")

    def _run_concepts(self, session: PipelineSession, step) -> None:
        state = session.state
        per_concept = max(1, step.images_per_concept)
        requests: list[tuple[int, int, TextToImageRequest]] = []
        for obj_index in step.object_indices:
            obj = session.analysis.objects[obj_index]
            for k in range(per_concept):
                requests.append(
                    (
                        obj_index,
                        k,
                        TextToImageRequest(
                            prompt=obj.phrase, seed=session.seed * 1000 + obj_index * 10 + k
                        ),
                    )
                )

        endpoint = self.config.endpoint_for("text2img")
        with ThreadPoolExecutor(max_workers=max(1, self.config.fan_out)) as pool:
            futures = [(oi, k, pool.submit(dispatch, req, endpoint)) for oi, k, req in requests]
            results = [(oi, k, f.result()) for oi, k, f in futures]

        # responses are order-independent; record and store keyed by concept
        for (obj_index, k, request), (_, _, response) in zip(requests, results):
            state.record(
                "tool_call",
                {
                    "kind": request.kind.value,
                    "request": request.to_dict(),
                    "status": response.status,
                    "response_sha256": _response_hash(response),
                },
            )
            if not response.ok or not response.images:
                raise ToolUnavailable("concept image generation failed")
            self.store.write_artifact(
                session,
                f"concept_{obj_index}_{k}",
                self._payload_png(response.images[0]),
                step="generate_concept_images",
                suffix=".png",
            )
        state.plan_cursor += 1
        state.transition(
            Phase.CONCEPT_IMAGES_READY,
            "concept_images",
            {"concepts": len(step.object_indices), "images_per_concept": per_concept},
        )

    def _concept_refs(self, session: PipelineSession, obj_index: int) -> list[ImagePayload]:
        refs = []
        for name in sorted(session.artifacts):
            if name.startswith(f"concept_{obj_index}_"):
                refs.append(self._image_ref(session, name))
        return refs

    def _spans_for_object(self, session: PipelineSession, obj_index: int) -> list[CharSpan]:
        obj = session.analysis.objects[obj_index]
        words = [obj.noun] + [attr.value for attr in obj.attributes]
        spans = []
        for word in words:
            match = re.search(rf"\b{re.escape(word)}\b", session.prompt, re.IGNORECASE)
            if match:
                spans.append(CharSpan(match.start(), match.end()))
        return spans

    def _attention_biases(self, session: PipelineSession, step: str) -> list[dict]:
        """Bias payloads per object, each also stored as a sidecar artifact."""
        from .guidance import serialize_guidance

        biases = []
        for obj_index in range(len(session.analysis.objects)):
            entry = session.layout.entry_for_object(obj_index)
            if entry is None:
                continue
            try:
                bias = attention_bias_for(
                    entry.box,
                    self.config.canvas,
                    self.config.guidance,
                    self._spans_for_object(session, obj_index),
                )
            except Exception as exc:
                session.state.record("bias_skipped", {"object": obj_index, "reason": str(exc)})
                continue
            self.store.write_artifact(
                session,
                f"bias_{obj_index}",
                serialize_guidance(bias).encode("utf-8"),
                step=step,
                suffix=".json",
            )
            biases.append(bias.to_payload())
        return biases

    def _run_customize(self, session: PipelineSession) -> None:
        state = session.state
        condition = rasterize(session.layout)
        condition_bytes = png_bytes(np.asarray(condition))
        self.store.write_artifact(session, "condition", condition_bytes, "customize", ".png")
        concept_images = []
        for obj_index in range(len(session.analysis.objects)):
            refs = self._concept_refs(session, obj_index)
            if refs:
                concept_images.append(refs)
        if not concept_images:
            raise ToolUnavailable("customize requires concept images")
        request = CustomizeRequest(
            prompt=session.prompt,
            concept_images=concept_images,
            layout=session.layout,
            attention_biases=self._attention_biases(session, "customize"),
            condition_image=self._image_ref(session, "condition"),
        )
        response = self._call(session, request)
        if not response.ok or not response.images:
            raise ToolUnavailable(f"customize returned {response.error_code}")
        self._store_composed(session, response.images[0], step="customize")
        state.plan_cursor += 1
        state.transition(Phase.COMPOSED, "customize")

    def _run_layout_to_image(self, session: PipelineSession) -> None:
        from .guidance import box_constraint_regions, serialize_guidance

        state = session.state
        masks = box_constraint_regions(session.layout, self.config.region_mask_resolution)
        self.store.write_artifact(
            session,
            "region_masks",
            serialize_guidance(masks).encode("utf-8"),
            step="layout_to_image",
            suffix=".json",
        )
        request = LayoutToImageRequest(
            prompt=session.prompt,
            layout=session.layout,
            region_masks=masks.to_payload(),
            seed=session.seed,
        )
        response = self._call(session, request)
        if not response.ok or not response.images:
            raise ToolUnavailable(f"layout-to-image returned {response.error_code}")
        self._store_composed(session, response.images[0], step="layout_to_image")
        state.plan_cursor += 1
        state.transition(Phase.COMPOSED, "layout_to_image")

    def _run_verify(self, session: PipelineSession, step) -> None:
        state = session.state
        questions = step.questions or build_verification_questions(session.analysis)
        if not questions:
            state.plan_cursor += 1
            state.transition(Phase.VERIFIED, "verification_skipped", {"questions": 0})
            return
        image = self.latest_composed_image(session)
        if image is None:
            raise ToolUnavailable("no composed image to verify")
        request = VerifyRequest(
            image=image,
            questions=questions,
            layout_meta=session.layout if self.config.mock_mode else None,
        )
        response = self._call(session, request)
        if not response.ok:
            result = VerificationResult(error=response.error_message or "verifier error")
        else:
            result = VerificationResult(
                results=[
                    QuestionResult(q.object_index, a.question, a.answer, a.confidence)
                    for q, a in zip(questions, response.answers)
                ]
            )
        state.record("verification", result.to_dict())
        action = next_action(state, result, self.config.max_edit_rounds)
        if action.kind is ActionKind.DONE:
            state.plan_cursor += 1
            state.transition(Phase.VERIFIED, "verification_passed")
        elif action.kind is ActionKind.LOCAL_EDIT:
            session.pending_edit = list(action.failing_objects)
            state.transition(
                Phase.NEEDS_EDIT, "verification_failed", {"failing": list(action.failing_objects)}
            )
        else:
            state.transition(Phase.AWAITING_FEEDBACK, "verification_escalated", {"reason": action.reason})

    def _run_local_edit(self, session: PipelineSession) -> None:
        state = session.state
        failing = list(session.pending_edit)
        layout_meta = session.layout if self.config.mock_mode else None
        current = self.latest_composed_image(session)
        if current is None:
            raise ToolUnavailable("no composed image to edit")
        for obj_index in failing:
            target_phrase = session.analysis.objects[obj_index].phrase
            for entry in session.layout.entries_for_object(obj_index):
                seg_response = self._call(
                    session,
                    SegmentRequest(
                        image=current,
                        caption=entry.caption,
                        box_hint=entry.box,
                        layout_meta=layout_meta,
                    ),
                )
                if not seg_response.ok or seg_response.mask is None:
                    raise ToolUnavailable(f"segmentation returned {seg_response.error_code}")
                self.store.write_artifact(
                    session,
                    f"edit_mask_{obj_index}_{entry.instance_index}_r{state.edit_round}",
                    json.dumps(seg_response.mask, sort_keys=True).encode("utf-8"),
                    step="local_edit",
                    suffix=".json",
                )
                try:
                    bias = edit_guidance_from_mask(
                        mask_from_payload(seg_response.mask), self.config.guidance
                    ).to_payload()
                except Exception:
                    bias = None
                edit_response = self._call(
                    session,
                    LocalEditRequest(
                        base_image=current,
                        edit_mask=seg_response.mask,
                        target_phrase=target_phrase,
                        reference_images=self._concept_refs(session, obj_index),
                        attention_bias=bias,
                        layout_meta=layout_meta,
                    ),
                )
                if not edit_response.ok or not edit_response.images:
                    raise ToolUnavailable(f"local edit returned {edit_response.error_code}")
                self._store_composed(session, edit_response.images[0], step="local_edit")
                current = self.latest_composed_image(session)
        state.edit_round += 1
        session.pending_edit = []
        state.transition(
            Phase.COMPOSED,
            "local_edit",
            {"objects": failing, "edit_round": state.edit_round},
        )

    # --- feedback ------------------------------------------------------------------

    def submit_feedback(self, session_id: str, feedback) -> PipelineSession:
        with self.store.lease(session_id):
            session = self.store.load(session_id)
            outcome = incorporate_feedback(session.state, feedback, session.layout, session.plan)
            session.layout = outcome.layout
            session.plan = outcome.plan
            self.store.save(session)
            return copy.deepcopy(session)

    # --- export and replay ------------------------------------------------------------

    def export_artifacts(self, session_id: str, out_dir: str | Path) -> dict:
        session = self.store.load(session_id)
        out_path = Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
        files: dict[str, str] = {}

        analysis_file = out_path / "analysis.json"
        analysis_file.write_text(
            json.dumps(session.analysis.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )
        files["analysis"] = analysis_file.name
        if session.layout is not None:
            layout_file = out_path / "layout.txt"
            layout_file.write_text(session.layout.to_text(), encoding="utf-8")
            files["layout"] = layout_file.name

        artifact_rows = []
        for name in sorted(session.artifacts):
            record = session.artifacts[name]
            src = self.store.root / session.id / record.file
            shutil.copy2(src, out_path / record.file)
            artifact_rows.append(record.to_dict())

        manifest = {
            "session": session.id,
            "prompt": session.prompt,
            "phase": session.state.phase.value,
            "composed": session.composed_name,
            "files": files,
            "artifacts": artifact_rows,
        }
        (out_path / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
        )
        return manifest

    def replay_history(self, session_id: str) -> dict[int, dict]:
        """Re-execute every logged tool call against fresh mocks.

        Returns seq -> {recorded, replayed} response hashes; equal values
        mean the history is deterministic.
        """
        session = self.store.load(session_id)
        suite = MockToolSuite(
            canvas=self.config.canvas,
            injector=FaultInjector(dict(self.config.mock_fault_colors)),
        )
        out: dict[int, dict] = {}
        for event in session.state.audit:
            if event.get("event") != "tool_call":
                continue
            detail = event["detail"]
            response = suite.handle(request_from_dict(detail["request"]))
            out[event["seq"]] = {
                "recorded": detail["response_sha256"],
                "replayed": _response_hash(response),
            }
        return out


def parse_feedback(data: dict):
    """Decode the REST feedback body into a typed feedback value."""
    from .errors import InvalidFeedback
    from .layout import LayoutDiff
    from .policy import PlanOverride, PlanStep, VerificationOverride

    if not isinstance(data, dict):
        raise InvalidFeedback("feedback body must be an object")
    kinds = [k for k in ("layout_diff", "plan_override", "verification_override") if k in data]
    if len(kinds) != 1:
        raise InvalidFeedback("feedback must contain exactly one of layout_diff, plan_override, verification_override")
    kind = kinds[0]
    try:
        if kind == "layout_diff":
            return LayoutDiff.from_dict(data["layout_diff"])
        if kind == "plan_override":
            steps = [PlanStep.from_dict(s) for s in data["plan_override"].get("steps", [])]
            return PlanOverride(steps=steps)
        return VerificationOverride(passed=bool(data["verification_override"]["passed"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidFeedback(f"malformed feedback: {exc}") from exc
