"""Execution-plan data model: step tuples, the dependency-reference grammar,
DAG validation against a registry, input resolution, and clarification
objects. Everything here is a pure value or a pure function."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

from .errors import ProtlabError
from .registry import Registry, RegistryError, UnknownToolError


class PlanError(ProtlabError):
    code = "plan-error"


class MalformedJson(PlanError):
    code = "malformed-json"


class SchemaViolation(PlanError):
    code = "schema-violation"


class ForwardDependency(PlanError):
    code = "forward-dependency"


class MalformedOrdinal(PlanError):
    code = "malformed-ordinal"


class UnresolvedDependency(PlanError):
    code = "unresolved-dependency"


class MissingField(PlanError):
    code = "missing-field"


@dataclass(frozen=True)
class DependencyRef:
    """Reference to an earlier step's output: the whole artifact, or the
    field at field_path descending through nested maps."""

    target_step: int
    field_path: Optional[tuple[str, ...]] = None

    def __str__(self) -> str:
        base = f"dependency:step_{self.target_step}"
        if self.field_path:
            return base + ":" + ":".join(self.field_path)
        return base


_DEP_PREFIX = "dependency:step_"
_DEP_RE = re.compile(r"^dependency:step_(\d+)(?::(.+))?$")


def parse_dependency_string(s: str):
    """`dependency:step_N[:path]` -> DependencyRef; anything else is returned
    unchanged as a literal. A dependency-shaped string with a bad ordinal or
    an empty path segment raises, so every string maps to exactly one of
    {ref, literal, error}."""
    if not isinstance(s, str) or not s.startswith(_DEP_PREFIX):
        return s
    m = _DEP_RE.match(s)
    if not m:
        raise MalformedOrdinal(f"bad dependency ordinal in {s!r}", value=s)
    target = int(m.group(1))
    if target < 1:
        raise MalformedOrdinal(f"step ordinal must be >= 1 in {s!r}", value=s)
    path = m.group(2)
    if path is None:
        return DependencyRef(target)
    segments = tuple(path.split(":"))
    if any(not seg for seg in segments):
        raise MalformedOrdinal(f"empty path segment in {s!r}", value=s)
    return DependencyRef(target, segments)


def _parse_value(value: Any):
    """Parse dependency strings at the top level and inside list values."""
    if isinstance(value, str):
        return parse_dependency_string(value)
    if isinstance(value, list):
        return [_parse_value(v) for v in value]
    return value


def _serialize_value(value: Any):
    if isinstance(value, DependencyRef):
        return str(value)
    if isinstance(value, list):
        return [_serialize_value(v) for v in value]
    return value


def _refs_in(value: Any):
    if isinstance(value, DependencyRef):
        yield value
    elif isinstance(value, list):
        for v in value:
            yield from _refs_in(v)


@dataclass(frozen=True)
class PlanStep:
    step: int
    tool_name: str
    tool_input: Mapping[str, Any]
    task_description: str = ""
    goal: Optional[str] = None
    success_criteria: Optional[str] = None

    def dependency_refs(self) -> list[DependencyRef]:
        out = []
        for v in self.tool_input.values():
            out.extend(_refs_in(v))
        return out

    def deferred_params(self) -> set[str]:
        """Params whose value involves a dependency (validated at runtime)."""
        return {
            name for name, v in self.tool_input.items() if any(True for _ in _refs_in(v))
        }


@dataclass(frozen=True)
class ExecutionPlan:
    steps: tuple[PlanStep, ...]
    warnings: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class ClarificationRequest:
    question: str
    preliminary_plan: str = ""


class EmptyPlan:
    """Marker for a deliberate empty plan (no tools needed)."""

    def __repr__(self) -> str:  # noqa: D105
        return "EmptyPlan"


EMPTY_PLAN = EmptyPlan()

_FENCE_RE = re.compile(r"^\s*```[a-zA-Z0-9_-]*\s*\n(.*?)\n\s*```\s*$", re.DOTALL)


def strip_code_fences(text: str) -> str:
    m = _FENCE_RE.match(text)
    return m.group(1) if m else text


def _pairs_hook_factory(warnings: list[str]):
    def hook(pairs):
        seen = {}
        for key, value in pairs:
            if key in seen:
                warnings.append(f"duplicate key {key!r}: last value wins")
            seen[key] = value
        return seen

    return hook


def parse_plan(raw: str):
    """Parse a planner response: a JSON array of steps -> ExecutionPlan, a
    clarification object -> ClarificationRequest, `[]` -> EMPTY_PLAN.
    Markdown code fences are stripped first."""
    text = strip_code_fences(raw.strip())
    warnings: list[str] = []
    try:
        data = json.loads(text, object_pairs_hook=_pairs_hook_factory(warnings))
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"plan is not valid JSON: {exc}") from exc

    if isinstance(data, dict):
        if data.get("need_clarification"):
            question = data.get("question", "")
            if not question:
                raise SchemaViolation("clarification object lacks a question")
            return ClarificationRequest(question, data.get("preliminary_plan", ""))
        raise SchemaViolation(
            "top-level object is not a clarification request", keys=sorted(data)
        )
    if not isinstance(data, list):
        raise SchemaViolation(f"plan must be a JSON array, got {type(data).__name__}")
    if not data:
        return EMPTY_PLAN

    steps = []
    for i, item in enumerate(data, start=1):
        if not isinstance(item, dict):
            raise SchemaViolation(f"step {i} is not an object")
        for key in ("step", "tool_name", "tool_input"):
            if key not in item:
                raise SchemaViolation(f"step {i} missing {key!r}", step=i, key=key)
        ordinal = item["step"]
        if ordinal != i:
            raise SchemaViolation(
                f"step ordinals must be 1..N in order; position {i} has {ordinal!r}"
            )
        if not item["tool_name"]:
            raise SchemaViolation(f"step {i} has an empty tool_name")
        if not isinstance(item["tool_input"], dict):
            raise SchemaViolation(f"step {i} tool_input must be an object")
        tool_input = {k: _parse_value(v) for k, v in item["tool_input"].items()}
        step = PlanStep(
            step=ordinal,
            tool_name=item["tool_name"],
            tool_input=tool_input,
            task_description=item.get("task_description", ""),
            goal=item.get("goal"),
            success_criteria=item.get("success_criteria"),
        )
        for ref in step.dependency_refs():
            if ref.target_step >= ordinal:
                raise ForwardDependency(
                    f"step {ordinal} references step {ref.target_step}; "
                    "only earlier steps may be referenced",
                    step=ordinal,
                    target=ref.target_step,
                )
        steps.append(step)
    return ExecutionPlan(tuple(steps), tuple(warnings))


def serialize_plan(plan: ExecutionPlan) -> str:
    out = []
    for s in plan.steps:
        item: dict[str, Any] = {
            "step": s.step,
            "task_description": s.task_description,
            "tool_name": s.tool_name,
            "tool_input": {k: _serialize_value(v) for k, v in s.tool_input.items()},
        }
        if s.goal is not None:
            item["goal"] = s.goal
        if s.success_criteria is not None:
            item["success_criteria"] = s.success_criteria
        out.append(item)
    return json.dumps(out, indent=2)


_PLACEHOLDER_RE = re.compile(r"<([a-z_][a-z0-9_]*)>")


def substitute_placeholders(step: PlanStep, values: Mapping[str, str]) -> PlanStep:
    """Replace known `<name>` tokens inside string literals; unknown tokens
    stay literal. Dependency refs are untouched."""

    def subst(value):
        if isinstance(value, str):
            return _PLACEHOLDER_RE.sub(
                lambda m: values.get(m.group(1), m.group(0)), value
            )
        if isinstance(value, list):
            return [subst(v) for v in value]
        return value

    return PlanStep(
        step=step.step,
        tool_name=step.tool_name,
        tool_input={k: subst(v) for k, v in step.tool_input.items()},
        task_description=step.task_description,
        goal=step.goal,
        success_criteria=step.success_criteria,
    )


def resolve_inputs(step: PlanStep, artifacts: Mapping[int, Any]) -> dict[str, Any]:
    """Replace every DependencyRef with the referenced output (whole artifact
    or the field at field_path). `artifacts` holds only successful steps."""

    def resolve_ref(ref: DependencyRef):
        if ref.target_step not in artifacts:
            raise UnresolvedDependency(
                f"step {step.step} needs step {ref.target_step}, which has no "
                "successful outcome",
                step=step.step,
                target=ref.target_step,
            )
        value = artifacts[ref.target_step]
        for segment in ref.field_path or ():
            if not isinstance(value, Mapping) or segment not in value:
                raise MissingField(
                    f"path {':'.join(ref.field_path)} missing from step "
                    f"{ref.target_step} output",
                    target=ref.target_step,
                    path=list(ref.field_path),
                    segment=segment,
                )
            value = value[segment]
        return value

    def resolve(value):
        if isinstance(value, DependencyRef):
            return resolve_ref(value)
        if isinstance(value, list):
            return [resolve(v) for v in value]
        return value

    return {k: resolve(v) for k, v in step.tool_input.items()}


@dataclass(frozen=True)
class Diagnostic:
    step: int
    code: str
    message: str


def validate_against_registry(plan: ExecutionPlan, registry: Registry) -> list[Diagnostic]:
    """Empty result iff every tool_name exists and literal args validate;
    dependency-valued params are deferred to runtime."""
    diags = [Diagnostic(0, "duplicate-key", w) for w in plan.warnings]
    for step in plan.steps:
        if not registry.has_tool(step.tool_name):
            diags.append(
                Diagnostic(step.step, "unknown-tool", f"no tool named {step.tool_name!r}")
            )
            continue
        literal = {
            k: v for k, v in step.tool_input.items() if k not in step.deferred_params()
        }
        try:
            registry.validate_invocation(step.tool_name, literal, defer=step.deferred_params())
        except RegistryError as exc:
            diags.append(Diagnostic(step.step, exc.code, str(exc)))
    return diags
