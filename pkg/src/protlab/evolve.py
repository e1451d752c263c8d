"""Directed-evolution numerics: mutation algebra, FASTA/CSV handling, ridge
regression over one-hot mutation features, combination enumeration, and
screening-table merge/rank.

All operations are deterministic pure computation; the heavy lifting is a
closed-form symmetric solve at desk scale (a few thousand columns at most).
"""

from __future__ import annotations

import csv
import heapq
import io
import itertools
import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ProtlabError

CANONICAL_RESIDUES = frozenset("ACDEFGHIKLMNPQRSTVWY")
# Extended alphabet for sequence validation: canonical plus ambiguity codes,
# rare residues, and the stop symbol.
EXTENDED_RESIDUES = frozenset("ACDEFGHIKLMNPQRSTVWYBJOUXZ*")

RESIDUE_NAMES = {
    "A": "Alanine", "C": "Cysteine", "D": "Aspartate", "E": "Glutamate",
    "F": "Phenylalanine", "G": "Glycine", "H": "Histidine", "I": "Isoleucine",
    "K": "Lysine", "L": "Leucine", "M": "Methionine", "N": "Asparagine",
    "P": "Proline", "Q": "Glutamine", "R": "Arginine", "S": "Serine",
    "T": "Threonine", "V": "Valine", "W": "Tryptophan", "Y": "Tyrosine",
}

_MUTATION_RE = re.compile(r"^([A-Z])(\d+)([A-Z])$")


class MutationError(ProtlabError):
    code = "malformed-token"


class PositionOutOfRange(MutationError):
    code = "position-out-of-range"


class WildTypeMismatch(MutationError):
    """The premise error: the claimed wild-type residue conflicts with the
    reference sequence."""

    code = "wild-mismatch"

    def __init__(self, position: int, expected: str, found: str):
        super().__init__(
            f"wild-type mismatch at position {position}: sequence has "
            f"{expected}, token claims {found}",
            position=position,
            expected=expected,
            found=found,
        )
        self.position = position
        self.expected = expected
        self.found = found


class FastaError(ProtlabError):
    code = "invalid-fasta"


class RidgeError(ProtlabError):
    code = "ridge-error"


class ScreeningError(ProtlabError):
    code = "screening-error"


@dataclass(frozen=True, order=True)
class PointMutation:
    """A single substitution, `<wild><position><mutant>` notation."""

    wild: str
    position: int
    mutant: str

    def __str__(self) -> str:
        return f"{self.wild}{self.position}{self.mutant}"


def check_wild_type(sequence: str, position: int, claimed: str) -> None:
    """Raise when the claimed residue at a 1-based position disagrees with
    the sequence (or the position falls outside it)."""
    if position < 1 or position > len(sequence):
        raise PositionOutOfRange(
            f"position {position} outside sequence of length {len(sequence)}",
            position=position,
            length=len(sequence),
        )
    actual = sequence[position - 1].upper()
    if actual != claimed.upper():
        raise WildTypeMismatch(position, actual, claimed.upper())


def format_premise_error(accession: str, error: WildTypeMismatch) -> str:
    """One-sentence report line for a wild-type conflict, the premise error
    a session reports instead of executing."""
    expected = RESIDUE_NAMES.get(error.expected, error.expected)
    found = RESIDUE_NAMES.get(error.found, error.found)
    return (
        f"The wild-type residue at position {error.position} of {accession} is "
        f"{expected} ({error.expected}), not {found} ({error.found}); execution "
        "halted before any prediction to report the premise error."
    )


def parse_mutation(token: str, reference: Optional[str] = None) -> PointMutation:
    """Parse a `E7V`-style token; with a reference sequence, also verify the
    claimed wild-type residue (raising WildTypeMismatch on a premise error)."""
    m = _MUTATION_RE.match(token.strip())
    if not m:
        raise MutationError(f"malformed mutation token: {token!r}", token=token)
    wild, pos_s, mutant = m.group(1), m.group(2), m.group(3)
    position = int(pos_s)
    if wild not in CANONICAL_RESIDUES or mutant not in CANONICAL_RESIDUES:
        raise MutationError(
            f"non-canonical residue letter in {token!r}", token=token
        )
    if wild == mutant:
        raise MutationError(
            f"wild and mutant residues are identical in {token!r}", token=token
        )
    if position < 1:
        raise MutationError(f"position must be >= 1 in {token!r}", token=token)
    if reference is not None:
        check_wild_type(reference, position, wild)
    return PointMutation(wild, position, mutant)


@dataclass(frozen=True)
class MutationCombination:
    """A non-empty set of mutations at pairwise distinct positions.

    The canonical string form joins tokens with commas in lexicographic
    order, matching the variant-string convention used throughout.
    """

    mutations: tuple[PointMutation, ...]

    def __post_init__(self):
        if not self.mutations:
            raise MutationError("a combination needs at least one mutation")
        positions = [m.position for m in self.mutations]
        if len(set(positions)) != len(positions):
            raise MutationError(
                "combination has two mutations at one position",
                positions=positions,
            )
        ordered = tuple(sorted(self.mutations, key=str))
        object.__setattr__(self, "mutations", ordered)

    def __str__(self) -> str:
        return ",".join(str(m) for m in self.mutations)

    @property
    def order(self) -> int:
        return len(self.mutations)

    @classmethod
    def parse(cls, text: str, reference: Optional[str] = None) -> "MutationCombination":
        tokens = [t for t in text.split(",") if t.strip()]
        return cls(tuple(parse_mutation(t, reference) for t in tokens))


WILD_TYPE = None  # variant marker for unmutated observations


@dataclass(frozen=True)
class FitnessObservation:
    """One measured variant; variant None means wild type."""

    variant: Optional[MutationCombination]
    score: float


def read_observations(csv_text: str) -> list[FitnessObservation]:
    """Read a `variant,score` CSV; empty or `WT` variant rows mark wild type."""
    reader = csv.DictReader(io.StringIO(csv_text))
    if reader.fieldnames is None or "variant" not in reader.fieldnames or "score" not in reader.fieldnames:
        raise ScreeningError(
            "observations CSV needs 'variant' and 'score' columns",
            columns=reader.fieldnames,
        )
    out = []
    for row in reader:
        raw = (row["variant"] or "").strip()
        variant = None if raw in ("", "WT", "wt") else MutationCombination.parse(raw)
        out.append(FitnessObservation(variant, float(row["score"])))
    return out


@dataclass
class RidgeModel:
    """Additive one-hot model: prediction = intercept + sum of per-mutation
    weights. Intercept is unpenalized (fit by target centering)."""

    feature_index: dict[str, int]
    weights: np.ndarray
    intercept: float
    lam: float
    train_r2: float
    train_rmse: float

    def weight_of(self, mutation: str) -> float:
        try:
            return float(self.weights[self.feature_index[mutation]])
        except KeyError:
            raise RidgeError(f"unknown mutation {mutation!r}", mutation=mutation)

    def to_json(self) -> str:
        cols = sorted(self.feature_index, key=self.feature_index.get)
        return json.dumps(
            {
                "features": cols,
                "weights": [float(w) for w in self.weights],
                "intercept": self.intercept,
                "lambda": self.lam,
                "train_r2": self.train_r2,
                "train_rmse": self.train_rmse,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "RidgeModel":
        d = json.loads(text)
        return cls(
            feature_index={name: i for i, name in enumerate(d["features"])},
            weights=np.asarray(d["weights"], dtype=float),
            intercept=float(d["intercept"]),
            lam=float(d["lambda"]),
            train_r2=float(d["train_r2"]),
            train_rmse=float(d["train_rmse"]),
        )


def design_matrix(
    observations: Sequence[FitnessObservation],
) -> tuple[np.ndarray, np.ndarray, dict[str, int]]:
    """One-hot design over the distinct single mutations present, columns in
    lexicographic order; a multi-mutant row sums its indicators."""
    names = sorted({str(m) for obs in observations if obs.variant for m in obs.variant.mutations})
    index = {name: j for j, name in enumerate(names)}
    X = np.zeros((len(observations), len(names)))
    y = np.empty(len(observations))
    for i, obs in enumerate(observations):
        y[i] = obs.score
        if obs.variant is not None:
            for m in obs.variant.mutations:
                X[i, index[str(m)]] = 1.0
    return X, y, index


def fit_ridge(observations: Sequence[FitnessObservation], lam: float = 1.0) -> RidgeModel:
    """Closed-form ridge fit: solve (X'X + lam*I) w = X'(y - mean(y)) by a
    symmetric (Cholesky) factorization, LU fallback when indefinite."""
    if not observations:
        raise RidgeError("no observations to fit")
    if lam < 0:
        raise RidgeError(f"lambda must be >= 0, got {lam}", lam=lam)
    for obs in observations:
        if not math.isfinite(obs.score):
            raise RidgeError(f"non-finite score {obs.score!r}", score=obs.score)

    X, y, index = design_matrix(observations)
    b = float(y.mean())
    centered = y - b
    if not index:
        w = np.zeros(0)
    else:
        A = X.T @ X + lam * np.eye(len(index))
        rhs = X.T @ centered
        try:
            w = cho_solve(cho_factor(A), rhs)
        except np.linalg.LinAlgError:
            w = np.linalg.solve(A, rhs)

    fitted = X @ w + b
    residuals = y - fitted
    ss_res = float(residuals @ residuals)
    ss_tot = float(centered @ centered)
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res < 1e-15 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    rmse = math.sqrt(ss_res / len(y))
    return RidgeModel(index, w, b, lam, r2, rmse)


def predict_combination(model: RidgeModel, combo: MutationCombination) -> float:
    """Summed one-hot readout: intercept + sum of member weights."""
    return model.intercept + sum(model.weight_of(str(m)) for m in combo.mutations)


def _mutation_position(name: str) -> object:
    """Position key for feasibility checks; unparseable tokens collide with
    nothing (treated as opaque variant strings)."""
    m = _MUTATION_RE.match(name)
    return int(m.group(2)) if m else name


def _model_mutations(model: RidgeModel) -> list[str]:
    return sorted(model.feature_index, key=model.feature_index.get)


@dataclass(frozen=True)
class RankedCombination:
    variant: str
    score: float
    order: int


def enumerate_top_combinations(
    model: RidgeModel,
    orders: Iterable[int] = (2, 3, 4),
    k: int = 5,
) -> dict[int, list[RankedCombination]]:
    """Per order, the top-k position-compatible combinations by predicted
    score (descending), ties broken by canonical variant string ascending.

    Streams the combination space through a bounded heap; the exhaustive
    sort lives in the test oracle, not here.
    """
    if k < 1:
        raise RidgeError(f"k must be >= 1, got {k}", k=k)
    names = _model_mutations(model)
    weights = {n: model.weight_of(n) for n in names}
    positions = {n: _mutation_position(n) for n in names}
    out: dict[int, list[RankedCombination]] = {}
    for order in sorted(set(orders)):
        if order < 1:
            raise RidgeError(f"order must be >= 1, got {order}", order=order)
        if order > len(names):
            raise RidgeError(
                f"order {order} exceeds mutation count {len(names)}",
                order=order,
                mutations=len(names),
            )
        candidates = (
            combo
            for combo in itertools.combinations(names, order)
            if len({positions[n] for n in combo}) == order
        )

        def keyed(combo: tuple[str, ...]):
            score = model.intercept + sum(weights[n] for n in combo)
            variant = ",".join(sorted(combo))
            return ((-score, variant), variant, score)

        best = heapq.nsmallest(k, (keyed(c) for c in candidates), key=lambda t: t[0])
        out[order] = [RankedCombination(v, s, order) for (_, v, s) in best]
    return out


# -- screening-table merge/rank ----------------------------------------------


@dataclass
class ScreeningSummary:
    """Per-property top rows plus a merged per-candidate view."""

    per_property: dict[str, list[dict]]
    merged: list[dict]
    warnings: int = 0
    skipped: list[str] = field(default_factory=list)


def _candidate_id(raw: str) -> str:
    # Fixture rows carry "ID|type:...|cluster:N" metadata suffixes.
    return raw.split("|", 1)[0].strip()


def rank_screening_tables(
    tables: Sequence[tuple[str, str]],
    sort_column: int | str = -1,
    top_k: int = 3,
) -> ScreeningSummary:
    """Sort each (property, csv_text) table descending on the sort column,
    keep the top_k rows, and merge by candidate id. Rows whose sort value
    does not parse as a number are skipped with a warning count."""
    per_property: dict[str, list[dict]] = {}
    merged: dict[str, dict] = {}
    order: list[str] = []
    warnings = 0
    skipped: list[str] = []

    for prop, text in tables:
        reader = csv.reader(io.StringIO(text))
        rows = [r for r in reader if r]
        if not rows:
            per_property[prop] = []
            continue
        header, body = rows[0], rows[1:]
        if isinstance(sort_column, str):
            if sort_column not in header:
                raise ScreeningError(
                    f"column {sort_column!r} missing from {prop} table",
                    column=sort_column,
                    header=header,
                )
            col = header.index(sort_column)
        else:
            col = sort_column if sort_column >= 0 else len(header) + sort_column
            if col < 0 or col >= len(header):
                raise ScreeningError(
                    f"column index {sort_column} out of range for {prop} table",
                    column=sort_column,
                    header=header,
                )

        scored = []
        for row in body:
            try:
                value = float(row[col])
            except (ValueError, IndexError):
                warnings += 1
                skipped.append(f"{prop}: {row!r}")
                continue
            scored.append((value, row))
        scored.sort(key=lambda t: -t[0])

        top = []
        for value, row in scored[:top_k]:
            cid = _candidate_id(row[0])
            entry = {"candidate": cid, "value": value, "row": row}
            top.append(entry)
            if cid not in merged:
                merged[cid] = {"candidate": cid}
                order.append(cid)
            merged[cid][prop] = value
        per_property[prop] = top

    props = [p for p, _ in tables]
    merged_rows = [
        {"candidate": cid, **{p: merged[cid].get(p) for p in props}} for cid in order
    ]
    return ScreeningSummary(per_property, merged_rows, warnings, skipped)


# -- FASTA --------------------------------------------------------------------


@dataclass(frozen=True)
class FastaRecord:
    id: str
    description: str
    sequence: str


def parse_fasta(text: str) -> list[FastaRecord]:
    """Split on `>` headers, strip whitespace from sequences, uppercase, and
    validate residues against the extended alphabet."""
    if not text.strip():
        raise FastaError("empty FASTA input")
    records: list[FastaRecord] = []
    header: Optional[str] = None
    chunks: list[str] = []

    def flush():
        if header is None:
            return
        seq = "".join(chunks).upper()
        for i, ch in enumerate(seq, start=1):
            if ch not in EXTENDED_RESIDUES:
                raise FastaError(
                    f"invalid residue {ch!r} at position {i} of record {header!r}",
                    position=i,
                    char=ch,
                )
        parts = header.split(None, 1)
        records.append(FastaRecord(parts[0], parts[1] if len(parts) > 1 else "", seq))

    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith(">"):
            flush()
            header = line[1:].strip()
            chunks = []
        else:
            if header is None:
                raise FastaError("sequence data before any '>' header")
            chunks.append(line)
    flush()
    if not records:
        raise FastaError("no FASTA records found")
    return records


def format_fasta(records: Iterable[FastaRecord], width: int = 60) -> str:
    lines = []
    for rec in records:
        head = f">{rec.id}" + (f" {rec.description}" if rec.description else "")
        lines.append(head)
        for i in range(0, len(rec.sequence), width):
            lines.append(rec.sequence[i : i + width])
    return "\n".join(lines) + "\n"
