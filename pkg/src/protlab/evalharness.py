"""Benchmark protocol: tiered task instances, two-stage pointwise-reasoning
pairwise judging, exhaustive tournaments with rank-weighted scoring, and
curation scoring for question retention."""

from __future__ import annotations

import hashlib
import itertools
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from .errors import ProtlabError

TIERS = ("question", "task", "project")

# The expected stratification of the full curated benchmark fixture.
PAPER_SHAPE = {"question": 58, "task": 60, "project": 30}


class EvalError(ProtlabError):
    code = "eval-error"


class MalformedRecord(EvalError):
    code = "malformed-record"


class JudgeParseError(EvalError):
    code = "judge-parse-failure"


@dataclass(frozen=True)
class Constraint:
    """A checkable ground-truth assertion attached to a task instance."""

    kind: str
    value: object = None
    fieldname: Optional[str] = None
    tol: float = 0.0
    n: int = 0

    @classmethod
    def from_dict(cls, d: Mapping) -> "Constraint":
        return cls(
            kind=d["kind"],
            value=d.get("value"),
            fieldname=d.get("field"),
            tol=float(d.get("tol", 0.0)),
            n=int(d.get("n", 0)),
        )

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.value is not None:
            out["value"] = self.value
        if self.fieldname is not None:
            out["field"] = self.fieldname
        if self.tol:
            out["tol"] = self.tol
        if self.n:
            out["n"] = self.n
        return out


@dataclass(frozen=True)
class TaskInstance:
    id: str
    tier: str
    query: str
    prompt_context: dict = field(default_factory=dict)
    constraints: tuple[Constraint, ...] = ()


def load_benchmark(
    path: str | Path,
    expected_counts: Optional[Mapping[str, int]] = None,
) -> tuple[list[TaskInstance], dict]:
    """Load newline-delimited JSON instances and summarize the tier split."""
    instances: list[TaskInstance] = []
    counts = {tier: 0 for tier in TIERS}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"line {lineno}: invalid JSON: {exc}", line=lineno)
        for key in ("id", "tier", "query"):
            if key not in raw:
                raise MalformedRecord(f"line {lineno}: missing {key!r}", line=lineno, key=key)
        if raw["tier"] not in TIERS:
            raise MalformedRecord(
                f"line {lineno}: unknown tier {raw['tier']!r}", line=lineno
            )
        if not raw["query"]:
            raise MalformedRecord(f"line {lineno}: empty query", line=lineno)
        instances.append(
            TaskInstance(
                id=raw["id"],
                tier=raw["tier"],
                query=raw["query"],
                prompt_context=raw.get("context", {}),
                constraints=tuple(
                    Constraint.from_dict(c) for c in raw.get("constraints", [])
                ),
            )
        )
        counts[raw["tier"]] += 1
    summary = {"total": len(instances), "by_tier": counts, "warnings": []}
    if expected_counts:
        for tier, expected in expected_counts.items():
            if counts.get(tier, 0) != expected:
                summary["warnings"].append(
                    f"{tier}: expected {expected} instances, found {counts.get(tier, 0)}"
                )
    return instances, summary


# -- two-stage judging ---------------------------------------------------------------

CRITIQUE_FIELDS = ("scientific_validity", "evidence_sufficiency", "logical_consistency")

ANALYST_TEMPLATE = """\
You are an impartial analyst reviewing one candidate answer to a protein
science task. Judge content, not style. Produce a structured critique as a
JSON object with exactly these keys, each holding a short paragraph:
"scientific_validity", "evidence_sufficiency", "logical_consistency".
Do not assign scores and do not compare with any other answer.

Task:
{query}

Ground-truth constraints to weigh:
{constraints}

Candidate answer:
{response}
"""

JUDGE_TEMPLATE = """\
You adjudicate between two candidate answers using only the analyst critiques
below; the raw answers are withheld so presentation cannot sway you. Respond
with a JSON object: {{"winner": "a"}} or {{"winner": "b"}}.

Task:
{query}

Ground-truth constraints:
{constraints}

Critique of answer A:
{critique_a}

Critique of answer B:
{critique_b}
"""


@dataclass(frozen=True)
class PairwiseJudgment:
    instance_id: str
    model_a: str
    model_b: str
    critique_a: dict
    critique_b: dict
    winner: str  # "a" | "b"


def _extract_json_object(text: str) -> dict:
    cleaned = text.strip()
    fence = re.match(r"^```[a-zA-Z]*\s*\n(.*?)\n```$", cleaned, re.DOTALL)
    if fence:
        cleaned = fence.group(1)
    try:
        out = json.loads(cleaned)
    except json.JSONDecodeError as exc:
        raise JudgeParseError(f"response is not JSON: {exc}")
    if not isinstance(out, dict):
        raise JudgeParseError("response JSON is not an object")
    return out


def _render_constraints(instance: TaskInstance) -> str:
    if not instance.constraints:
        return "(none)"
    return "\n".join(f"- {json.dumps(c.to_dict(), sort_keys=True)}" for c in instance.constraints)


def judge_pair(
    instance: TaskInstance,
    response_a: str,
    response_b: str,
    analyst_backend,
    judge_backend,
    model_a: str = "a",
    model_b: str = "b",
) -> PairwiseJudgment:
    """Stage 1: the analyst critiques each response independently. Stage 2:
    the judge sees only the critiques plus the constraints and names the
    winner."""
    if not response_a or not response_b:
        raise EvalError("both responses must be non-empty")
    constraints = _render_constraints(instance)

    critiques = []
    for response in (response_a, response_b):
        prompt = ANALYST_TEMPLATE.format(
            query=instance.query, constraints=constraints, response=response
        )
        raw = analyst_backend.complete("analyst", prompt, ())
        try:
            critique = _extract_json_object(raw)
        except JudgeParseError as exc:
            raise JudgeParseError(f"analyst output unparseable: {exc}") from exc
        missing = [f for f in CRITIQUE_FIELDS if f not in critique]
        if missing:
            raise JudgeParseError(f"analyst critique missing fields {missing}")
        critiques.append(critique)

    judge_prompt = JUDGE_TEMPLATE.format(
        query=instance.query,
        constraints=constraints,
        critique_a=json.dumps(critiques[0], sort_keys=True),
        critique_b=json.dumps(critiques[1], sort_keys=True),
    )
    raw = judge_backend.complete("judge", judge_prompt, ())
    verdict = _extract_json_object(raw)
    winner = verdict.get("winner")
    if winner not in ("a", "b"):
        raise JudgeParseError(f"judge verdict must name 'a' or 'b', got {winner!r}")
    return PairwiseJudgment(
        instance_id=instance.id,
        model_a=model_a,
        model_b=model_b,
        critique_a=critiques[0],
        critique_b=critiques[1],
        winner=winner,
    )


def _pair_order_seed(instance_id: str, a: str, b: str, seed: int) -> int:
    key = f"{seed}:{instance_id}:{a}:{b}".encode()
    return int(hashlib.sha256(key).hexdigest()[:8], 16)


def run_tournament(
    instance: TaskInstance,
    responses: Mapping[str, str],
    analyst_backend,
    judge_backend,
    seed: int = 0,
    cache: Optional[dict] = None,
) -> dict[str, int]:
    """Judge every unordered model pair once (presentation order randomized
    by a seed-derived hash) and return win counts. The cache key includes
    response hashes so restarted tournaments skip finished pairs."""
    models = sorted(responses)
    if len(models) < 2:
        raise EvalError("a tournament needs at least two models")
    wins = {m: 0 for m in models}
    for a, b in itertools.combinations(models, 2):
        ha = hashlib.sha256(responses[a].encode()).hexdigest()[:12]
        hb = hashlib.sha256(responses[b].encode()).hexdigest()[:12]
        cache_key = f"{instance.id}|{a}|{b}|{ha}|{hb}"
        if cache is not None and cache_key in cache:
            wins[cache[cache_key]] += 1
            continue
        first, second = (a, b) if _pair_order_seed(instance.id, a, b, seed) % 2 == 0 else (b, a)
        judgment = judge_pair(
            instance,
            responses[first],
            responses[second],
            analyst_backend,
            judge_backend,
            model_a=first,
            model_b=second,
        )
        winner_model = first if judgment.winner == "a" else second
        wins[winner_model] += 1
        if cache is not None:
            cache[cache_key] = winner_model
    return wins


# -- rank-weighted scoring --------------------------------------------------------------


@dataclass(frozen=True)
class TournamentResult:
    instance_id: str
    n_models: int
    wins: dict[str, int]
    ranks: dict[str, int]
    scores: dict[str, float]


def score_tournament(wins: Mapping[str, int], instance_id: str = "") -> TournamentResult:
    """Linear rank weighting: rank models by descending win count (ties share
    the best rank, competition style) and score S = W * (N - r + 1) / N."""
    if len(wins) < 2:
        raise EvalError("scoring needs at least two models")
    for model, w in wins.items():
        if w < 0:
            raise EvalError(f"negative win count for {model!r}")
    n = len(wins)
    ranks = {
        m: 1 + sum(1 for other in wins.values() if other > w) for m, w in wins.items()
    }
    scores = {m: wins[m] * (n - ranks[m] + 1) / n for m in wins}
    return TournamentResult(instance_id, n, dict(wins), ranks, scores)


def aggregate_corpus(
    results: Sequence[TournamentResult],
    tiers: Mapping[str, str],
    normalized: bool = False,
) -> dict[str, dict[str, float]]:
    """Mean S_m per model per tier. With normalized=True, scores are divided
    by the per-instance maximum attainable score (N - 1) and scaled to 100;
    that 0-100 view is a repo convention, not part of the protocol."""
    if not results:
        return {}
    model_set = set(results[0].scores)
    for r in results[1:]:
        if set(r.scores) != model_set:
            raise EvalError(
                "inconsistent model sets across instances",
                expected=sorted(model_set),
                found=sorted(r.scores),
            )
    sums: dict[str, dict[str, float]] = {}
    counts: dict[str, int] = {}
    for r in results:
        tier = tiers.get(r.instance_id, "question")
        bucket = sums.setdefault(tier, {m: 0.0 for m in model_set})
        counts[tier] = counts.get(tier, 0) + 1
        for m, s in r.scores.items():
            value = s
            if normalized:
                value = 100.0 * s / (r.n_models - 1) if r.n_models > 1 else 0.0
            bucket[m] += value
    return {
        tier: {m: total / counts[tier] for m, total in bucket.items()}
        for tier, bucket in sums.items()
    }


# -- curation scoring ---------------------------------------------------------------------


@dataclass(frozen=True)
class CurationScore:
    question_id: str
    committee_scores: dict[str, float]
    total: float


def score_curation(committee: Mapping[str, float], question_id: str = "") -> CurationScore:
    """Committee quality scores, each in [0, 5]; the retention metric is the
    exact sum."""
    for agent, s in committee.items():
        if not (0.0 <= s <= 5.0):
            raise EvalError(f"score {s} from {agent!r} outside [0, 5]", agent=agent, score=s)
    return CurationScore(question_id, dict(committee), float(sum(committee.values())))


def select_top_questions(scores: Sequence[CurationScore], k: int) -> list[CurationScore]:
    return sorted(scores, key=lambda c: (-c.total, c.question_id))[:k]


# -- constraint checking ---------------------------------------------------------------------


@dataclass(frozen=True)
class ReportArtifact:
    """What a finished run exposes for constraint checking."""

    text: str = ""
    artifact: dict = field(default_factory=dict)
    files: tuple[str, ...] = ()
    citations: tuple[int, ...] = ()


@dataclass(frozen=True)
class ConstraintCheck:
    constraint: Constraint
    status: str  # "pass" | "fail" | "unchecked"


def _lookup_field(artifact: Mapping, dotted: str):
    value = artifact
    for part in dotted.split("."):
        if not isinstance(value, Mapping) or part not in value:
            return None
        value = value[part]
    return value


def check_constraints(instance: TaskInstance, report: ReportArtifact) -> list[ConstraintCheck]:
    """Evaluate each supported constraint mechanically; unsupported kinds are
    reported as unchecked rather than guessed."""
    out = []
    for c in instance.constraints:
        if c.kind == "contains-string":
            status = "pass" if str(c.value) in report.text else "fail"
        elif c.kind == "numeric-field-within":
            found = _lookup_field(report.artifact, c.fieldname or "")
            try:
                ok = found is not None and abs(float(found) - float(c.value)) <= c.tol
            except (TypeError, ValueError):
                ok = False
            status = "pass" if ok else "fail"
        elif c.kind == "file-produced":
            status = "pass" if str(c.value) in report.files else "fail"
        elif c.kind == "cites-at-least":
            status = "pass" if len(report.citations) >= c.n else "fail"
        else:
            status = "unchecked"
        out.append(ConstraintCheck(c, status))
    return out
