"""Four-phase session state machine: Objective, Research, Implementation,
Summary, with gated step execution, bounded self-debug and empty-search
retries, deterministic goal checks, monotone history, and an audited final
report. Every prompt, response, instruction, invocation, and outcome lands
in the append-only run record."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence

from .agents import (
    DEFAULT_POST_STEP_CHECK,
    DEFAULT_TEMPLATES,
    Message,
    ProseReport,
    Role,
    closest_allowed,
    extract_structured,
    invoke_role,
    warn_non_ascii_args,
)
from .builtins import (
    EXECUTOR_KEYS,
    ExecutionContext,
    FixtureStore,
    build_builtin_registry,
    build_executor_table,
)
from .errors import ProtlabError
from .events import EventEnvelope, RunRecorder, logical_clock, render_record
from .plan import (
    EMPTY_PLAN,
    ClarificationRequest,
    ExecutionPlan,
    PlanStep,
    substitute_placeholders,
    validate_against_registry,
    resolve_inputs,
)
from .registry import InvalidChoiceError, Registry, RegistryError


class Phase(str, Enum):
    OBJECTIVE = "Objective"
    RESEARCH = "Research"
    AWAITING_CLARIFICATION = "AwaitingClarification"
    IMPLEMENTATION = "Implementation"
    SUMMARY = "Summary"
    DONE = "Done"
    FAILED = "Failed"


class OrchestratorError(ProtlabError):
    code = "orchestrator-error"


class WrongPhase(OrchestratorError):
    code = "wrong-phase"


@dataclass
class RetryPolicy:
    max_self_debug_retries: int = 2
    max_empty_search_retries: int = 2
    escalate_to_cb: bool = True


@dataclass
class VerificationConstraints:
    cited_reference_ids_must_exist: bool = True
    claims_bound_to_history: bool = True


@dataclass
class StepOutcome:
    step: int
    artifact: Optional[dict]
    trace_log: str
    success: bool
    attempts: list[dict]
    goal_met: str  # "met" | "unmet" | "unchecked"


class ExecutionHistory:
    """Append-only outcome log; entries at any time are a prefix of entries
    at any later time."""

    def __init__(self):
        self.entries: list[StepOutcome] = []

    def append(self, outcome: StepOutcome) -> None:
        self.entries.append(outcome)

    def artifacts(self) -> dict[int, dict]:
        return {o.step: o.artifact for o in self.entries if o.success and o.artifact is not None}

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class FinalReport:
    text: str
    sections: list[str]
    citations: list[int]
    violations: list[int]
    references: list[dict]


@dataclass
class SessionState:
    session_id: str
    objective: str
    phase: Phase = Phase.OBJECTIVE
    interaction_memory: list[dict] = field(default_factory=list)
    execution_memory: dict[str, dict] = field(default_factory=dict)
    plan: Optional[ExecutionPlan] = None
    history: ExecutionHistory = field(default_factory=ExecutionHistory)
    references: list[dict] = field(default_factory=list)
    research_report: str = ""
    report: Optional[FinalReport] = None
    pending_clarification: Optional[ClarificationRequest] = None
    failure_reason: str = ""


@dataclass
class SessionConfig:
    data_dir: Path
    backend: Any = None
    registry: Optional[Registry] = None
    executors: Optional[dict] = None
    fixtures: Optional[FixtureStore] = None
    templates: Optional[dict] = None
    retry_policy: RetryPolicy = field(default_factory=RetryPolicy)
    verification: VerificationConstraints = field(default_factory=VerificationConstraints)
    seed: int = 0
    uploads: dict[str, str] = field(default_factory=dict)
    context_note: str = ""
    default_output_dir: str = "outputs"
    strict_citations: bool = False
    session_id: Optional[str] = None
    clock: Callable[[int], str] = logical_clock


def _derived_session_id(objective: str, seed: int) -> str:
    digest = hashlib.sha256(f"{seed}:{objective}".encode()).hexdigest()[:12]
    return f"s{digest}"


_SEARCH_RESULT_KEYS = ("references", "results", "datasets")
_CITATION_RE = re.compile(r"\[(\d+)\]")
_HAS_KEY_RE = re.compile(r"output has key\s+[`\"']?([A-Za-z0-9_.]+)")
_FILE_AT_RE = re.compile(r"file at\s+[`\"']?([A-Za-z0-9_.]+)[`\"']?\s+exists")


def verify_goal(step: PlanStep, artifact: Optional[dict], workspace: Path) -> str:
    """Deterministic goal check: the success flag, declared output keys, and
    declared file existence. Criteria beyond those patterns are left
    unchecked rather than guessed at by a model."""
    if artifact is None or artifact.get("success", True) is False:
        return "unmet"
    criteria = (step.success_criteria or "").strip()
    if not criteria:
        return "met"

    def lookup(dotted: str):
        value: Any = artifact
        for part in dotted.split("."):
            if not isinstance(value, Mapping) or part not in value:
                return None
            value = value[part]
        return value

    checked = False
    for key in _HAS_KEY_RE.findall(criteria):
        checked = True
        if lookup(key) is None:
            return "unmet"
    for key in _FILE_AT_RE.findall(criteria):
        checked = True
        rel = lookup(key)
        if not isinstance(rel, str):
            return "unmet"
        path = Path(rel)
        if not (path if path.is_absolute() else workspace / path).exists():
            return "unmet"
    return "met" if checked else "unchecked"


def _collect_references(artifact: Mapping, into: list[dict]) -> None:
    seen = {(r.get("title"), r.get("url")) for r in into}
    for key in ("references", "results"):
        for item in artifact.get(key, []) or []:
            if not isinstance(item, Mapping) or "title" not in item:
                continue
            sig = (item.get("title"), item.get("url"))
            if sig in seen:
                continue
            seen.add(sig)
            into.append(
                {
                    "title": item.get("title", ""),
                    "url": item.get("url", ""),
                    "source": item.get("source", ""),
                }
            )


def _drop_least_specific_token(query: str) -> Optional[str]:
    tokens = query.split()
    if len(tokens) < 2:
        return None
    shortest = min(range(len(tokens)), key=lambda i: (len(tokens[i]), -i))
    remaining = tokens[:shortest] + tokens[shortest + 1 :]
    return " ".join(remaining)


class Session:
    """One objective, one sequential process, one run record."""

    def __init__(self, objective: str, config: SessionConfig):
        if not objective.strip():
            raise OrchestratorError("objective must be non-empty")
        self.config = config
        self.policy = config.retry_policy
        session_id = config.session_id or _derived_session_id(objective, config.seed)
        self.workspace = Path(config.data_dir) / "sessions" / session_id
        self.workspace.mkdir(parents=True, exist_ok=True)
        record_path = Path(config.data_dir) / "runs" / f"{session_id}.ndjson"
        if record_path.exists():
            record_path.unlink()
        self.recorder = RunRecorder(record_path, clock=config.clock)

        for name, content in config.uploads.items():
            upload = self.workspace / "uploads" / name
            upload.parent.mkdir(parents=True, exist_ok=True)
            upload.write_text(content)

        manifests_dir = Path(config.data_dir) / "manifests"
        self.registry = config.registry or build_builtin_registry(
            manifests_dir=manifests_dir,
            checkpoint_resolver=lambda ref: (self.workspace / ref).exists(),
        )
        self.executors = config.executors or build_executor_table()
        self.backend = config.backend
        self.templates = config.templates or DEFAULT_TEMPLATES
        self.fixtures = config.fixtures.fresh() if config.fixtures else None
        self.ctx = ExecutionContext(
            workspace=self.workspace,
            data_dir=Path(config.data_dir),
            registry=self.registry,
            fixtures=self.fixtures,
            created_at=config.clock(0),
            provenance=session_id,
        )
        self.state = SessionState(session_id=session_id, objective=objective)
        self.recorder.append(
            "phase_change",
            {
                "from": None,
                "to": Phase.OBJECTIVE.value,
                "objective": objective,
                "config": {
                    "seed": config.seed,
                    "strict_citations": config.strict_citations,
                    "retry_policy": {
                        "max_self_debug_retries": self.policy.max_self_debug_retries,
                        "max_empty_search_retries": self.policy.max_empty_search_retries,
                    },
                },
            },
        )
        self.state.interaction_memory.append({"speaker": "user", "content": objective})

    # -- phase plumbing ---------------------------------------------------------

    def _set_phase(self, phase: Phase, **payload) -> None:
        self.recorder.append(
            "phase_change", {"from": self.state.phase.value, "to": phase.value, **payload}
        )
        self.state.phase = phase

    def _fail(self, reason: str, **payload) -> SessionState:
        self.state.failure_reason = reason
        self._set_phase(Phase.FAILED, reason=reason, **payload)
        return self.state

    def _dialogue(self) -> tuple[Message, ...]:
        return tuple(
            Message("user" if m["speaker"] == "user" else "assistant", m["content"])
            for m in self.state.interaction_memory
        )

    def _context_summary(self) -> str:
        lines = []
        uploads = sorted(self.config.uploads)
        if uploads:
            lines.append("Uploaded files (paths relative to the session workspace):")
            lines.extend(f"- uploads/{name}" for name in uploads)
        else:
            lines.append("No uploaded files.")
        lines.append(f"Default output directory: {self.config.default_output_dir}")
        if self.config.context_note:
            lines.append(self.config.context_note)
        return "\n".join(lines)

    def _recent_outputs(self) -> str:
        if not self.state.history.entries:
            return "(none)"
        lines = []
        for outcome in reversed(self.state.history.entries[-3:]):
            keys = sorted(outcome.artifact) if outcome.artifact else []
            lines.append(
                f"step {outcome.step}: success={outcome.success} keys={keys}"
            )
        return "\n".join(lines)

    def _invoke(self, role: Role, bindings: Mapping[str, str], dialogue=()) -> str:
        exchange = invoke_role(role, bindings, dialogue, self.backend, self.templates)
        self.recorder.append("prompt", {"role": role.value, "system": exchange.system,
                                        "messages": [m.content for m in exchange.messages]})
        return exchange.response

    # -- lifecycle ----------------------------------------------------------------

    def start(self) -> SessionState:
        if self.state.phase is not Phase.OBJECTIVE:
            raise WrongPhase(f"cannot start from {self.state.phase.value}")
        return self._research()

    def resume(self, answer: str) -> SessionState:
        if self.state.phase is not Phase.AWAITING_CLARIFICATION:
            raise WrongPhase(
                f"clarification answer arrived in phase {self.state.phase.value}"
            )
        self.recorder.append("clarification_answer", {"answer": answer})
        self.state.interaction_memory.append({"speaker": "user", "content": answer})
        self.state.pending_clarification = None
        return self._research()

    # -- research -------------------------------------------------------------------

    def _research(self) -> SessionState:
        self._set_phase(Phase.RESEARCH)
        bindings = {
            "tools_description": self.registry.describe_tools(),
            "protein_context_summary": self._context_summary(),
            "tool_outputs": self._recent_outputs(),
        }
        response = self._invoke(Role.PI, bindings, self._dialogue())
        self.state.research_report = response
        try:
            parsed = extract_structured(Role.PI, response)
        except ProtlabError as exc:
            self.recorder.append(
                "response", {"role": "PI", "text": response, "parsed": {"kind": "error"}}
            )
            return self._fail("plan-parse-failed", error=str(exc))

        if isinstance(parsed, ClarificationRequest):
            self.recorder.append(
                "response", {"role": "PI", "text": response, "parsed": {"kind": "clarification"}}
            )
            self.recorder.append(
                "clarification_request",
                {"question": parsed.question, "preliminary_plan": parsed.preliminary_plan},
            )
            self.state.interaction_memory.append(
                {"speaker": "assistant", "content": parsed.question}
            )
            self.state.pending_clarification = parsed
            self._set_phase(Phase.AWAITING_CLARIFICATION)
            return self.state

        if parsed is EMPTY_PLAN:
            self.recorder.append(
                "response", {"role": "PI", "text": response, "parsed": {"kind": "empty"}}
            )
            return self._summary()

        plan: ExecutionPlan = parsed
        substituted = ExecutionPlan(
            tuple(
                substitute_placeholders(s, {"default_output_dir": self.config.default_output_dir})
                for s in plan.steps
            ),
            plan.warnings,
        )
        diagnostics = validate_against_registry(substituted, self.registry)
        self.recorder.append(
            "response",
            {
                "role": "PI",
                "text": response,
                "parsed": {
                    "kind": "plan",
                    "steps": [
                        {
                            "step": s.step,
                            "tool_name": s.tool_name,
                            "task_description": s.task_description,
                        }
                        for s in substituted.steps
                    ],
                },
            },
        )
        if diagnostics:
            return self._fail(
                "plan-validation-failed",
                diagnostics=[
                    {"step": d.step, "code": d.code, "message": d.message} for d in diagnostics
                ],
            )
        self.state.plan = substituted
        return self._implementation()

    # -- implementation ----------------------------------------------------------------

    def _implementation(self) -> SessionState:
        self._set_phase(Phase.IMPLEMENTATION)
        for step in self.state.plan.steps:
            self.recorder.append(
                "cb_instruction",
                {
                    "step": step.step,
                    "tool_name": step.tool_name,
                    "instruction": (
                        f"Run {step.tool_name} for step {step.step}: {step.task_description}"
                    ),
                },
            )
            outcome = self._execute_step(step)
            self.state.history.append(outcome)
            self.state.execution_memory[str(step.step)] = {
                "tool": step.tool_name,
                "attempts": outcome.attempts,
                "artifact": outcome.artifact,
            }
            if outcome.success and outcome.artifact:
                _collect_references(outcome.artifact, self.state.references)
            if not outcome.success:
                return self._fail("step-failed-after-retries", step=step.step)
        return self._summary()

    def _emit_result(self, step, tool_name, attempt, artifact, success, final, goal_met=None):
        payload = {
            "step": step.step,
            "tool_name": tool_name,
            "attempt": attempt,
            "success": success,
            "artifact": artifact,
            "final": final,
        }
        if final:
            payload["goal_met"] = goal_met
            payload["history_len"] = len(self.state.history) + 1
        self.recorder.append("tool_result", payload)

    def _execute_step(self, step: PlanStep) -> StepOutcome:
        trace: list[str] = []
        attempts: list[dict] = []
        artifacts = self.state.history.artifacts()

        try:
            args = resolve_inputs(step, artifacts)
        except ProtlabError as exc:
            trace.append(f"dependency resolution failed: {exc}")
            attempts.append({"args": None, "error": str(exc)})
            self._emit_result(step, step.tool_name, 1, {"success": False, "error": str(exc)},
                              False, True, goal_met="unmet")
            return StepOutcome(step.step, None, "\n".join(trace), False, attempts, "unmet")

        tool_name = step.tool_name
        attempt = 0
        debug_retries = 0
        empty_retries = 0
        final_artifact: Optional[dict] = None
        success = False

        while True:
            attempt += 1
            try:
                normalized = self.registry.validate_invocation(tool_name, args)
            except RegistryError as exc:
                trace.append(f"attempt {attempt}: validation failed: {exc}")
                attempts.append({"args": dict(args), "error": str(exc)})
                fix = None
                if (
                    isinstance(exc, InvalidChoiceError)
                    and debug_retries < self.policy.max_self_debug_retries
                ):
                    fix = closest_allowed(str(exc.value), [str(a) for a in exc.allowed])
                self._emit_result(
                    step, tool_name, attempt, {"success": False, "error": str(exc)},
                    False, final=fix is None,
                    goal_met="unmet" if fix is None else None,
                )
                if fix is not None:
                    debug_retries += 1
                    args = {**args, exc.param: fix}
                    self.recorder.append(
                        "retry",
                        {
                            "step": step.step,
                            "reason": "self-debug",
                            "attempt": attempt,
                            "adjustment": f"mapped {exc.param} onto allowed value {fix!r}",
                        },
                    )
                    continue
                self._escalate(step, str(exc))
                final_artifact = {"success": False, "error": str(exc)}
                break

            desc = self.registry.lookup(tool_name)
            if desc.category == "research-search":
                for warning in warn_non_ascii_args(tool_name, normalized):
                    trace.append(f"lint: {warning}")

            self.recorder.append(
                "tool_invocation",
                {"step": step.step, "tool_name": tool_name, "args": normalized, "attempt": attempt},
            )
            executor = self.executors[desc.executor]
            try:
                artifact = executor(desc, normalized, self.ctx)
            except Exception as exc:  # executor bug: encode, never raise
                artifact = {"success": False, "error": f"executor error: {exc}"}
            success = artifact.get("success", True) is not False
            attempts.append(
                {"args": normalized, "output" if success else "error": artifact}
            )

            if success:
                present = [k for k in _SEARCH_RESULT_KEYS if k in artifact]
                empty = bool(present) and all(artifact[k] in ([], None) for k in present)
                if empty and empty_retries < self.policy.max_empty_search_retries:
                    self._emit_result(step, tool_name, attempt, artifact, True, final=False)
                    adjusted = self._vary_search(tool_name, normalized, empty_retries)
                    empty_retries += 1
                    if adjusted is None:
                        trace.append("empty results and no further keyword variation")
                        self.recorder.append(
                            "retry",
                            {
                                "step": step.step,
                                "reason": "empty-results",
                                "attempt": attempt,
                                "adjustment": "retry unchanged",
                            },
                        )
                        continue
                    tool_name, args, note = adjusted
                    trace.append(f"empty results: {note}")
                    self.recorder.append(
                        "retry",
                        {
                            "step": step.step,
                            "reason": "empty-results",
                            "attempt": attempt,
                            "adjustment": note,
                        },
                    )
                    continue
                if empty:
                    trace.append("empty results after keyword variation: giving up")
                    success = False
                    artifact = {
                        "success": False,
                        "error": "empty-results",
                        "last_output": artifact,
                    }
                    self._emit_result(step, tool_name, attempt, artifact, False, True, "unmet")
                    final_artifact = artifact
                    break
                final_artifact = artifact
                goal = verify_goal(step, artifact, self.workspace)
                self._emit_result(step, tool_name, attempt, artifact, True, True, goal)
                trace.append(f"attempt {attempt}: success; goal {goal}")
                return StepOutcome(
                    step.step, artifact, "\n".join(trace), True, attempts, goal
                )

            # failure path
            trace.append(f"attempt {attempt}: {artifact.get('error', 'failed')}")
            if debug_retries < self.policy.max_self_debug_retries:
                self._emit_result(step, tool_name, attempt, artifact, False, final=False)
                debug_retries += 1
                args, note = self._debug_adjust(normalized, artifact.get("error", ""))
                trace.append(f"self-debug: {note}")
                self.recorder.append(
                    "retry",
                    {
                        "step": step.step,
                        "reason": "self-debug",
                        "attempt": attempt,
                        "adjustment": note,
                    },
                )
                continue
            self._emit_result(step, tool_name, attempt, artifact, False, True, "unmet")
            self._escalate(step, artifact.get("error", "failed"))
            final_artifact = artifact
            break

        return StepOutcome(
            step.step, final_artifact, "\n".join(trace), False, attempts, "unmet"
        )

    def _escalate(self, step: PlanStep, error: str) -> None:
        if self.policy.escalate_to_cb:
            self.recorder.append(
                "cb_instruction",
                {
                    "step": step.step,
                    "tool_name": step.tool_name,
                    "escalation": True,
                    "instruction": (
                        f"Step {step.step} failed after self-debug retries: {error}. "
                        "Review the pipeline before any re-plan."
                    ),
                },
            )

    def _debug_adjust(self, args: dict, error: str) -> tuple[dict, str]:
        """Deterministic repair: point missing file args at an artifact with
        the same basename from earlier steps; otherwise retry unchanged."""
        artifacts = self.state.history.artifacts()
        known_paths: dict[str, str] = {}
        for artifact in artifacts.values():
            for value in artifact.values():
                if isinstance(value, str) and (self.workspace / value).exists():
                    known_paths.setdefault(Path(value).name, value)
        adjusted = dict(args)
        notes = []
        for key, value in args.items():
            if not isinstance(value, str) or not value:
                continue
            candidate = Path(value)
            if (self.workspace / value).exists() or candidate.is_absolute() and candidate.exists():
                continue
            replacement = known_paths.get(candidate.name)
            if replacement and replacement != value:
                adjusted[key] = replacement
                notes.append(f"repaired {key} -> {replacement}")
        if notes:
            return adjusted, "; ".join(notes)
        return adjusted, "retried with unchanged arguments"

    def _vary_search(self, tool_name: str, args: dict, empty_retries: int):
        """Alternate deterministic transforms: drop the least-specific query
        token, then swap to the next tool of the same category."""
        query_key = next(
            (k for k in args if isinstance(args.get(k), str) and "query" in k), None
        )
        if empty_retries % 2 == 0 and query_key:
            dropped = _drop_least_specific_token(args[query_key])
            if dropped:
                new_args = {**args, query_key: dropped}
                return tool_name, new_args, f"dropped least-specific token: {dropped!r}"
        # swap within category
        desc = self.registry.lookup(tool_name)
        siblings = sorted(
            t.name
            for t in self.registry.tools_in_category(desc.category)
            if t.name != tool_name and any("query" in p.name for p in t.params)
        )
        if siblings and query_key:
            after = [n for n in siblings if n > tool_name]
            swapped = after[0] if after else siblings[0]
            new_args = {query_key: args[query_key]}
            return swapped, new_args, f"swapped tool within category: {swapped}"
        if query_key:
            dropped = _drop_least_specific_token(args[query_key])
            if dropped:
                return tool_name, {**args, query_key: dropped}, f"dropped token: {dropped!r}"
        return None

    # -- summary ---------------------------------------------------------------------

    def _analysis_log(self) -> str:
        if not self.state.history.entries:
            return "(no tool execution this session)"
        lines = []
        for o in self.state.history.entries:
            keys = sorted(o.artifact) if o.artifact else []
            lines.append(
                f"Step {o.step}: success={o.success}, goal={o.goal_met}, "
                f"attempts={len(o.attempts)}, artifact keys={keys}"
            )
        return "\n".join(lines)

    def _render_references(self) -> str:
        if not self.state.references:
            return "(none)"
        return "\n".join(
            f"[{i}] {r['title']} {r['url']}".rstrip()
            for i, r in enumerate(self.state.references, start=1)
        )

    def _summary(self) -> SessionState:
        self._set_phase(Phase.SUMMARY)
        bindings = {
            "full_run_record": render_record(self.recorder.snapshot()),
            "original_input": self.state.objective,
            "analysis_log": self._analysis_log(),
            "references": self._render_references(),
        }
        response = self._invoke(Role.SC, bindings, self._dialogue())
        self.recorder.append(
            "response", {"role": "SC", "text": response, "parsed": {"kind": "prose"}}
        )

        cited = sorted({int(m) for m in _CITATION_RE.findall(response)})
        n_refs = len(self.state.references)
        violations = [c for c in cited if c < 1 or c > n_refs]
        audited_text = response
        if violations and self.config.verification.cited_reference_ids_must_exist:
            if self.config.strict_citations:
                self.recorder.append(
                    "audit",
                    {
                        "cited": cited,
                        "reference_count": n_refs,
                        "violations": violations,
                        "mode": "strict",
                        "passed": False,
                    },
                )
                return self._fail("citation-audit-failed", violations=violations)
            for v in violations:
                audited_text = audited_text.replace(f"[{v}]", "")
        self.recorder.append(
            "audit",
            {
                "cited": cited,
                "reference_count": n_refs,
                "violations": violations,
                "mode": "strict" if self.config.strict_citations else "strip-with-warning",
                "passed": not violations or not self.config.strict_citations,
            },
        )

        sections = re.findall(r"^#{1,6}\s*(.+?)\s*$", audited_text, re.M)
        report = FinalReport(
            text=audited_text,
            sections=sections,
            citations=[c for c in cited if c not in violations],
            violations=violations,
            references=list(self.state.references),
        )
        self.state.report = report
        self.recorder.append(
            "report",
            {
                "text": report.text,
                "sections": report.sections,
                "citations": report.citations,
                "references": report.references,
            },
        )
        self._set_phase(Phase.DONE)
        return self.state


def run_session(objective: str, config: SessionConfig) -> Session:
    session = Session(objective, config)
    session.start()
    return session


# -- run-record audits ---------------------------------------------------------------


def audit_run_record(events: Sequence[EventEnvelope]) -> dict:
    """Protocol checks over a finished record: CB gating, retry bounds,
    history monotonicity, and citation soundness."""
    cb_steps_seen: set[int] = set()
    cb_gating = True
    invocations_per_step: dict[int, int] = {}
    history_lens: list[int] = []
    policy = {"max_self_debug_retries": 2, "max_empty_search_retries": 2}
    report_payload = None
    audit_payload = None

    for event in events:
        payload = event.payload
        if event.kind == "phase_change" and "config" in payload:
            policy = payload["config"].get("retry_policy", policy)
        elif event.kind == "cb_instruction":
            cb_steps_seen.add(payload["step"])
        elif event.kind == "tool_invocation":
            if payload["step"] not in cb_steps_seen:
                cb_gating = False
            invocations_per_step[payload["step"]] = (
                invocations_per_step.get(payload["step"], 0) + 1
            )
        elif event.kind == "tool_result" and payload.get("final"):
            if "history_len" in payload:
                history_lens.append(payload["history_len"])
        elif event.kind == "report":
            report_payload = payload
        elif event.kind == "audit":
            audit_payload = payload

    bound = 1 + policy["max_self_debug_retries"] + policy["max_empty_search_retries"]
    retry_bounds = all(n <= bound for n in invocations_per_step.values())
    history_monotone = all(a < b for a, b in zip(history_lens, history_lens[1:]))

    citation_soundness = True
    if report_payload is not None:
        n_refs = len(report_payload.get("references", []))
        citation_soundness = all(
            1 <= c <= n_refs for c in report_payload.get("citations", [])
        )
    if audit_payload is not None and audit_payload.get("mode") == "strict":
        citation_soundness = citation_soundness and audit_payload.get("passed", False)

    checks = {
        "cb_gating": cb_gating,
        "retry_bounds": retry_bounds,
        "history_monotone": history_monotone,
        "citation_soundness": citation_soundness,
    }
    checks["ok"] = all(checks.values())
    return checks


def load_fixture_config(
    fixtures_dir: str | Path,
    data_dir: str | Path,
    seed: Optional[int] = None,
    **overrides,
) -> tuple[str, SessionConfig]:
    """Build a scripted SessionConfig from a fixture directory holding
    session.json (objective, uploads, seed), agents.json, and tools.json."""
    from .agents import ScriptedBackend

    fixtures_dir = Path(fixtures_dir)
    session_meta = json.loads((fixtures_dir / "session.json").read_text())
    config = SessionConfig(
        data_dir=Path(data_dir),
        backend=ScriptedBackend.from_dir(fixtures_dir),
        fixtures=FixtureStore.from_dir(fixtures_dir),
        seed=seed if seed is not None else session_meta.get("seed", 0),
        uploads=session_meta.get("uploads", {}),
        context_note=session_meta.get("context_note", ""),
        **overrides,
    )
    return session_meta["objective"], config
