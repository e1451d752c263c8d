"""The four role agents as template-driven policies over an abstract chat
backend, with a deterministic scripted backend for replays and an HTTP
backend speaking the common chat-completions JSON shape."""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .errors import ProtlabError
from .plan import parse_plan


class Role(str, Enum):
    PI = "PI"
    CB = "CB"
    MLS = "MLS"
    SC = "SC"


class AgentError(ProtlabError):
    code = "agent-error"


class MissingBinding(AgentError):
    code = "missing-binding"

    def __init__(self, name: str):
        super().__init__(f"template placeholder {{{name}}} has no binding", name=name)
        self.name = name


class ScriptedFixtureExhausted(AgentError):
    code = "scripted-fixture-exhausted"


class BackendUnreachable(AgentError):
    code = "backend-unreachable"


class BackendTimeout(AgentError):
    code = "backend-timeout"


_PLACEHOLDER_RE = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


@dataclass(frozen=True)
class RoleTemplate:
    role: Role
    template_text: str
    placeholder_names: frozenset[str]

    def __post_init__(self):
        found = set(_PLACEHOLDER_RE.findall(self.template_text))
        extra = found - self.placeholder_names
        if extra:
            raise AgentError(
                f"{self.role.value} template uses undeclared placeholders {sorted(extra)}"
            )

    def render(self, bindings: Mapping[str, str]) -> str:
        for name in self.placeholder_names:
            if name not in bindings:
                raise MissingBinding(name)
        rendered = _PLACEHOLDER_RE.sub(
            lambda m: str(bindings[m.group(1)]), self.template_text
        )
        leftover = _PLACEHOLDER_RE.search(rendered)
        # A leftover token can only come from a binding value; that is data,
        # not an unresolved placeholder, so no check beyond the original text.
        return rendered


_PI_TEXT = """\
You are the Principal Investigator of an automated protein-engineering team.
You decompose the user's goal, decide whether tools are needed, and emit the
execution plan that the Computational Biologist and Machine Learning
Specialist will carry out. You never run tools yourself.

Available tools (use only these; names and parameter values must match exactly):
{tools_description}

Current protein context summary (uploaded files, ids, prior session notes):
{protein_context_summary}

Recent tool outputs (most recent first):
{tool_outputs}

Rules:
1. Respond with JSON only: either a JSON array of plan steps, or a single
   clarification object. No surrounding prose.
2. Each plan step is an object with "step" (1-based integer), "task_description",
   "tool_name" (exactly as listed above), and "tool_input" (an object holding
   every required parameter).
3. Wire a later step to an earlier output with "dependency:step_N" for the
   whole output or "dependency:step_N:field" for one field.
4. Return the empty array [] only when no tool can help (a purely conceptual
   question or a greeting).
5. When the request is ambiguous or underspecified, return exactly one object:
   {"need_clarification": true, "preliminary_plan": "...", "question": "..."}
6. When a parameter has a fixed choice list, pick the exact allowed value
   closest to the user's wording; never echo unlisted wording.
7. All tool arguments, including search keywords, must be written in English.
8. Use the default output directory token <default_output_dir> in file paths
   you invent.
"""

_CB_TEXT = """\
You are the Computational Biologist. You turn the Principal Investigator's
research draft into a concrete, executable pipeline and you verify each step's
goal after the Machine Learning Specialist runs it. You do not execute tools.

Step planning and verification guidance:
{computational_biologist_step_planning}

Principal Investigator's research draft:
{pi_report}

Principal Investigator's suggested path:
{pi_suggest_steps}

Tool names that exist (anything else fails):
{available_tools_list}

Full tool catalog with parameters:
{tools_description}

Skill documents the specialist can read:
{skills_metadata}

Current protein context summary:
{protein_context_summary}

Recent tool outputs (if any):
{tool_outputs}

Rules:
1. Respond with a JSON array only. One object per step with "step", "goal",
   "success_criteria", "task_description", "tool_name", "tool_input".
2. Split the work finely: one tool call per step, no merged actions.
3. Use "dependency:step_N:field" wiring whenever a step consumes an earlier
   output. Only plan tools from the list above.
4. Do not plan literature or web search steps; research already happened.
5. Return [] only when the draft explicitly says nothing needs to run.
"""

_MLS_TEXT = """\
You are the Machine Learning Specialist. You execute tools, write code, and
debug failures. You start a tool run only when the Computational Biologist
instructs you to; if an instruction looks wrong (unknown tool, invalid
parameters), object to the Computational Biologist instead of running it.

Post-step self-check:
{machine_learning_specialist_post_step_check}

Tools that exist in this run: {available_tools_list}
Skills you may read (via read_skill): {available_skills_meta}

You will run one tool for this step: {tool_name}
Tool description:
{tool_description}

Rules:
1. Call the tool once with the given parameters, then report its JSON output
   verbatim as "Final Answer: <json>".
2. If the output contains "success": false, first try to repair the
   parameters (fix a path, fill a missing field, map a value onto the allowed
   list) and retry; escalate to the Computational Biologist only after that.
3. A search result with "success": true but an empty "references", "results",
   or "datasets" list is not a final success: retry with different English
   keywords or a sibling tool of the same category before giving up.
4. Never call the tool again after a successful, non-empty output.
5. Tool arguments must be in English.
"""

_SC_TEXT = """\
You are the Scientific Critic. You audit the finished run and write the final
report for the user, grounding every claim in the recorded evidence.

Full run record (every prompt, response, and tool execution):
{full_run_record}

Original user request:
{original_input}

Step-wise analysis log:
{analysis_log}

Collected references (cite as [n]):
{references}

Report rules:
1. Start with one to three numbered conclusions, each directly answering the
   user and at most two sentences long.
2. Follow with Supporting Evidence, Rationale, Confidence & Caveats, and
   Practical Recommendations sections, in Markdown.
3. Cite references by bracketed index [n]; cite only indices that exist in
   the list above, and list cited references in a final References section.
4. Claim nothing that the run record does not support.
"""

# Default text bound to the specialist's post-step self-check placeholder.
DEFAULT_POST_STEP_CHECK = (
    "After the tool returns: confirm the output parses as JSON, confirm "
    "declared output files exist, and confirm the step goal is plausibly met "
    "before reporting the Final Answer."
)

DEFAULT_TEMPLATES: dict[Role, RoleTemplate] = {
    Role.PI: RoleTemplate(
        Role.PI,
        _PI_TEXT,
        frozenset({"tools_description", "protein_context_summary", "tool_outputs"}),
    ),
    Role.CB: RoleTemplate(
        Role.CB,
        _CB_TEXT,
        frozenset(
            {
                "computational_biologist_step_planning",
                "pi_report",
                "pi_suggest_steps",
                "available_tools_list",
                "tools_description",
                "skills_metadata",
                "protein_context_summary",
                "tool_outputs",
            }
        ),
    ),
    Role.MLS: RoleTemplate(
        Role.MLS,
        _MLS_TEXT,
        frozenset(
            {
                "machine_learning_specialist_post_step_check",
                "available_tools_list",
                "available_skills_meta",
                "tool_name",
                "tool_description",
            }
        ),
    ),
    Role.SC: RoleTemplate(
        Role.SC,
        _SC_TEXT,
        frozenset({"full_run_record", "original_input", "analysis_log", "references"}),
    ),
}


def render_template(role: Role, bindings: Mapping[str, str],
                    templates: Optional[Mapping[Role, RoleTemplate]] = None) -> str:
    table = templates or DEFAULT_TEMPLATES
    template = table[role]
    if template.role is not role:
        raise AgentError(f"template routed to wrong role: {template.role} != {role}")
    return template.render(bindings)


@dataclass(frozen=True)
class Message:
    speaker: str  # "user" | "assistant"
    content: str


@dataclass(frozen=True)
class ChatExchange:
    system: str
    messages: tuple[Message, ...]
    response: str
    usage: Optional[dict] = None


@dataclass(frozen=True)
class BackendBinding:
    kind: str  # "scripted" | "http"
    fixture_path: Optional[str] = None
    endpoint: Optional[str] = None
    model: Optional[str] = None
    auth_env: Optional[str] = None
    timeout: float = 120.0
    max_retries: int = 2

    def __post_init__(self):
        if self.kind == "http":
            if not self.auth_env:
                raise AgentError("http backend needs an auth-token env var name")
            if self.timeout <= 0:
                raise AgentError("http backend timeout must be positive")


class ScriptedBackend:
    """Ordered response lists per role, consumed turn by turn. Exhaustion is
    an error so unplanned extra turns fail loudly."""

    def __init__(self, responses: Mapping[str, Sequence[str]]):
        self._responses = {role: list(items) for role, items in responses.items()}
        self._cursors: dict[str, int] = {}

    @classmethod
    def from_dir(cls, path: str | Path) -> "ScriptedBackend":
        """Load fixtures/agents.json: a JSON array of {role, response}."""
        data = json.loads((Path(path) / "agents.json").read_text())
        grouped: dict[str, list[str]] = {}
        for item in data:
            grouped.setdefault(item["role"], []).append(item["response"])
        return cls(grouped)

    def fresh(self) -> "ScriptedBackend":
        """A new consumer over the same fixtures (one per session)."""
        return ScriptedBackend(self._responses)

    def complete(self, role: str, system: str, messages: Sequence[Message]) -> str:
        turn = self._cursors.get(role, 0)
        queue = self._responses.get(role, [])
        if turn >= len(queue):
            raise ScriptedFixtureExhausted(
                f"no scripted response for {role} turn {turn + 1}",
                role=role,
                turn=turn + 1,
            )
        self._cursors[role] = turn + 1
        return queue[turn]


class HttpBackend:
    """Chat-completions shaped client: one system message plus the dialogue,
    single text choice back. No streaming."""

    def __init__(self, binding: BackendBinding, transport=None):
        if binding.kind != "http":
            raise AgentError("HttpBackend needs an http binding")
        self.binding = binding
        self._transport = transport  # test hook

    def _client(self):
        import httpx

        return httpx.Client(timeout=self.binding.timeout, transport=self._transport)

    def complete(self, role: str, system: str, messages: Sequence[Message]) -> str:
        import httpx

        token = os.environ.get(self.binding.auth_env, "")
        payload = {
            "model": self.binding.model,
            "messages": [{"role": "system", "content": system}]
            + [
                {"role": "user" if m.speaker == "user" else "assistant", "content": m.content}
                for m in messages
            ],
        }
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        last_error: Exception | None = None
        for attempt in range(self.binding.max_retries + 1):
            try:
                with self._client() as client:
                    resp = client.post(self.binding.endpoint, json=payload, headers=headers)
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except httpx.TimeoutException as exc:
                last_error = exc
            except Exception as exc:  # connection or protocol failure
                last_error = exc
            if attempt < self.binding.max_retries:
                time.sleep(min(0.05 * (attempt + 1), 0.2))
        import httpx as _httpx

        if isinstance(last_error, _httpx.TimeoutException):
            raise BackendTimeout(f"backend timed out after {self.binding.max_retries + 1} tries")
        raise BackendUnreachable(
            f"backend unreachable after {self.binding.max_retries + 1} tries: {last_error}"
        )


def invoke_role(
    role: Role,
    bindings: Mapping[str, str],
    dialogue: Sequence[Message],
    backend,
    templates: Optional[Mapping[Role, RoleTemplate]] = None,
) -> ChatExchange:
    """Render the role's template, call the backend, and return the full
    exchange for the run record."""
    system = render_template(role, bindings, templates)
    response = backend.complete(role.value, system, dialogue)
    if not response:
        raise AgentError(f"{role.value} backend returned an empty response")
    return ChatExchange(system=system, messages=tuple(dialogue), response=response)


@dataclass(frozen=True)
class ProseReport:
    text: str


def extract_structured(role: Role, response: str):
    """Route a raw response into structured form: planner roles parse as
    plans or clarifications (code fences stripped); the critic's output is a
    prose report; specialist output passes through as prose."""
    if role in (Role.PI, Role.CB):
        try:
            return parse_plan(response)
        except ProtlabError as exc:
            exc.details.setdefault("role", role.value)
            raise
    return ProseReport(response)


def warn_non_ascii_args(tool_name: str, args: Mapping[str, object]) -> list[str]:
    """Lint, not enforcement: search-tool arguments are expected in English;
    non-ASCII text in string args gets a warning."""
    warnings = []
    for key, value in args.items():
        if isinstance(value, str) and not value.isascii():
            warnings.append(
                f"{tool_name}.{key} contains non-ASCII text; tool arguments "
                "should be English"
            )
    return warnings


def closest_allowed(value: str, allowed: Sequence[str]) -> Optional[str]:
    """Agent-layer fuzzy mapping onto a constrained choice list (the registry
    itself stays strict). Substring containment first, then close matches."""
    low = value.strip().lower()
    if not low:
        return None
    for option in allowed:
        if low == option.lower():
            return option
    hits = [o for o in allowed if low in o.lower() or o.lower() in low]
    if len(hits) == 1:
        return hits[0]
    if hits:
        return sorted(hits)[0]
    import difflib

    close = difflib.get_close_matches(low, [o.lower() for o in allowed], n=1, cutoff=0.6)
    if close:
        for option in allowed:
            if option.lower() == close[0]:
                return option
    return None
