"""Training-configuration schema, projection-head math at desk scale, and the
budgeted config-search heuristic behind tool synthesis.

Actual model training is out of scope here; a training executor elsewhere
accepts a config and returns metrics. This module owns the schema, its
defaults, the pooling/projection numerics, and the deterministic search.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import ProtlabError
from .registry import (
    MANIFEST_METRIC_KEYS,
    ParamSpec,
    SynthesizedToolManifest,
    ToolDescriptor,
)

CLASSIFICATION_KINDS = frozenset(
    {
        "single_label_classification",
        "multi_label_classification",
        "residue_single_label_classification",
    }
)
REGRESSION_KINDS = frozenset({"regression", "residue_regression"})
PROBLEM_TYPES = CLASSIFICATION_KINDS | REGRESSION_KINDS

TRAINING_METHODS = frozenset(
    {"full", "freeze", "lora", "plm-lora", "dora", "adalora", "qlora", "ia3", "ses-adapter"}
)
# Methods that carry rank/alpha/dropout fields. plm-lora is an accepted alias
# of lora (both spellings occur in the wild).
LORA_FAMILY = frozenset({"lora", "plm-lora", "dora", "adalora", "qlora"})

POOLING_METHODS = frozenset({"mean", "light_attention", "attention1d"})

# Which direction each metric improves in.
METRIC_DIRECTIONS = {
    "loss": "min",
    "mse": "min",
    "accuracy": "max",
    "mcc": "max",
    "f1": "max",
    "precision": "max",
    "recall": "max",
    "auroc": "max",
    "spearman": "max",
}

CLASSIFICATION_METRICS = ("accuracy", "mcc", "f1", "precision", "recall", "auroc")
REGRESSION_METRICS = ("spearman", "mse")

# Schema defaults as published; generation starts from these.
SCHEMA_DEFAULTS = {
    "sequence_column_name": "aa_seq",
    "label_column_name": "label",
    "num_attention_head": 8,
    "pooling_method": "mean",
    "attention_probs_dropout": 0.1,
    "pooling_dropout": 0.1,
    "c_alpha_max_neighbors": 10,
    "learning_rate": 1e-3,
    "num_epochs": 100,
    "gradient_accumulation_steps": 1,
    "max_seq_len": -1,
    "max_grad_norm": -1.0,
    "patience": 10,
    "warmup_steps": 0,
    "seed": 3407,
    "num_workers": 4,
    "structure_seq": "",
    "lora_r": 8,
    "lora_alpha": 32,
    "lora_dropout": 0.1,
    "lora_target_modules": ("query", "key", "value"),
    "output_root": "ckpt",
    "wandb": False,
    "quick_test": False,
    "metrics": ("loss",),
    "monitor": "loss",
    "monitor_strategy": "min",
}

KNOWN_BACKBONES = (
    "ESM2-8M",
    "ESM2-35M",
    "ESM2-150M",
    "ESM2-650M",
    "ESM2-3B",
    "ESM2-15B",
    "ESM-1b",
    "ESM-1v",
    "ProtBert",
    "ProtT5",
    "Ankh-base",
    "Ankh-large",
    "IgBert",
    "IgT5",
    "SaProt",
    "ProSST",
    "ProtSSN",
    "VenusPLM",
    "PETA",
)


class ConfigError(ProtlabError):
    code = "config-error"


class ContradictoryRequirements(ConfigError):
    code = "contradictory-requirements"


class NumericsError(ProtlabError):
    code = "numerics-error"


@dataclass
class TrainingConfig:
    """One flat record mirroring the published schema, snake_case keys."""

    # dataset / task
    dataset: Optional[str] = None
    dataset_config: Optional[str] = None
    problem_type: str = "single_label_classification"
    num_labels: Optional[int] = None
    metrics: tuple[str, ...] = SCHEMA_DEFAULTS["metrics"]
    sequence_column_name: str = SCHEMA_DEFAULTS["sequence_column_name"]
    label_column_name: str = SCHEMA_DEFAULTS["label_column_name"]
    pdb_type: Optional[str] = None
    pdb_dir: Optional[str] = None
    train_file: Optional[str] = None
    valid_file: Optional[str] = None
    test_file: Optional[str] = None
    quick_test: bool = False
    max_train_samples: Optional[int] = None
    max_valid_samples: Optional[int] = None
    max_test_samples: Optional[int] = None
    # architecture
    plm_model: Optional[str] = None
    hidden_size: Optional[int] = None
    num_attention_head: int = SCHEMA_DEFAULTS["num_attention_head"]
    pooling_method: str = SCHEMA_DEFAULTS["pooling_method"]
    attention_probs_dropout: float = SCHEMA_DEFAULTS["attention_probs_dropout"]
    pooling_dropout: float = SCHEMA_DEFAULTS["pooling_dropout"]
    gnn_config: Optional[str] = None
    model_path: Optional[str] = None
    c_alpha_max_neighbors: int = SCHEMA_DEFAULTS["c_alpha_max_neighbors"]
    # optimization
    training_method: str = "freeze"
    learning_rate: float = SCHEMA_DEFAULTS["learning_rate"]
    num_epochs: int = SCHEMA_DEFAULTS["num_epochs"]
    batch_token: Optional[int] = None
    batch_size: Optional[int] = None
    gradient_accumulation_steps: int = SCHEMA_DEFAULTS["gradient_accumulation_steps"]
    max_seq_len: int = SCHEMA_DEFAULTS["max_seq_len"]
    max_grad_norm: float = SCHEMA_DEFAULTS["max_grad_norm"]
    monitor: str = SCHEMA_DEFAULTS["monitor"]
    monitor_strategy: str = SCHEMA_DEFAULTS["monitor_strategy"]
    patience: int = SCHEMA_DEFAULTS["patience"]
    scheduler: Optional[str] = None
    warmup_steps: int = SCHEMA_DEFAULTS["warmup_steps"]
    seed: int = SCHEMA_DEFAULTS["seed"]
    num_workers: int = SCHEMA_DEFAULTS["num_workers"]
    structure_seq: str = SCHEMA_DEFAULTS["structure_seq"]
    # peft
    lora_r: Optional[int] = None
    lora_alpha: Optional[int] = None
    lora_dropout: Optional[float] = None
    lora_target_modules: Optional[tuple[str, ...]] = None
    feedforward_modules: Optional[str] = None
    # transfer / logging
    initial_model_path: Optional[str] = None
    output_root: str = SCHEMA_DEFAULTS["output_root"]
    output_dir: Optional[str] = None
    output_model_name: Optional[str] = None
    wandb: bool = False
    project: Optional[str] = None
    wandb_entity: Optional[str] = None
    run_name: Optional[str] = None

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def canonical(self) -> str:
        """Stable serialization used for search dedup."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


# Accepted spellings seen in generated configs in the wild.
_FIELD_ALIASES = {
    "dataset_custom": "dataset",
    "monitored_metrics": "monitor",
    "monitored_strategy": "monitor_strategy",
    "wandb_enabled": "wandb",
}
_IGNORED_KEYS = {"dataset_selection", "batch_mode"}
_TUPLE_FIELDS = {"metrics", "lora_target_modules"}


def config_from_dict(raw: Mapping) -> TrainingConfig:
    """Parse a config mapping, tolerating alias keys and comma-joined lists;
    unknown presentation-only keys are dropped."""
    known = {f.name for f in fields(TrainingConfig)}
    kwargs = {}
    for key, value in raw.items():
        name = _FIELD_ALIASES.get(key, key)
        if name in _IGNORED_KEYS:
            continue
        if name not in known:
            continue
        if name in _TUPLE_FIELDS and value is not None:
            if isinstance(value, str):
                value = tuple(v.strip() for v in value.split(",") if v.strip())
            else:
                value = tuple(value)
        kwargs[name] = value
    return TrainingConfig(**kwargs)


def config_from_json(text: str) -> TrainingConfig:
    return config_from_dict(json.loads(text))


@dataclass
class DataManifest:
    """Where the data lives and which columns matter."""

    train_csv: Optional[str] = None
    valid_csv: Optional[str] = None
    test_csv: Optional[str] = None
    dataset: Optional[str] = None
    sequence_column: str = "aa_seq"
    label_column: str = "label"
    # Filled by inspect_csv or supplied directly when files are not readable.
    label_values: Optional[tuple[str, ...]] = None


def inspect_csv(csv_text: str, manifest: DataManifest) -> DataManifest:
    """Check the declared columns exist and collect distinct label values."""
    reader = csv.DictReader(io.StringIO(csv_text))
    header = reader.fieldnames or []
    for col in (manifest.sequence_column, manifest.label_column):
        if col not in header:
            raise ConfigError(
                f"manifest column {col!r} missing from CSV header",
                column=col,
                header=header,
            )
    values = []
    seen = set()
    for row in reader:
        v = (row[manifest.label_column] or "").strip()
        if v not in seen:
            seen.add(v)
            values.append(v)
    return replace(manifest, label_values=tuple(values))


def _labels_look_continuous(values: Sequence[str]) -> bool:
    try:
        floats = [float(v) for v in values]
    except ValueError:
        return False
    return any(f != int(f) for f in floats) or len(set(floats)) > 20


_LR_RE = re.compile(r"(?:learning[\s_-]?rate|lr)\s*[=:]?\s*([0-9.]+e?-?[0-9]*)", re.I)
_EPOCHS_RE = re.compile(r"(\d+)\s*epochs?", re.I)


def _parse_requirements(text: str) -> dict:
    """Pull recognized backbone/method/metric hints out of free text."""
    out: dict = {}
    low = text.lower()
    for name in KNOWN_BACKBONES:
        if name.lower() in low:
            out["plm_model"] = name
            break
    methods = []
    for token, method in (
        ("ses-adapter", "ses-adapter"),
        ("ses adapter", "ses-adapter"),
        ("adalora", "adalora"),
        ("qlora", "qlora"),
        ("dora", "dora"),
        ("ia3", "ia3"),
        ("lora", "plm-lora"),
        ("freeze", "freeze"),
        ("full", "full"),
    ):
        if token in low and method not in methods:
            # "adalora"/"qlora"/"dora" all contain "lora"; keep the first,
            # most specific hit only.
            if method == "plm-lora" and any(m in ("adalora", "qlora", "dora") for m in methods):
                continue
            methods.append(method)
    if len(methods) > 1:
        raise ContradictoryRequirements(
            f"requirements name multiple training methods: {methods}",
            methods=methods,
        )
    if methods:
        out["training_method"] = methods[0]
    if "regression" in low:
        out["problem_type"] = "regression"
    if "classification" in low or "classifier" in low:
        out.setdefault("problem_type", "single_label_classification")
    for token in ("light_attention", "light attention"):
        if token in low:
            out["pooling_method"] = "light_attention"
    if "attention1d" in low:
        out["pooling_method"] = "attention1d"
    if "mse" in low:
        out["preferred_metric"] = "mse"
    m = _LR_RE.search(text)
    if m:
        out["learning_rate"] = float(m.group(1))
    m = _EPOCHS_RE.search(text)
    if m:
        out["num_epochs"] = int(m.group(1))
    return out


def generate_config(
    manifest: DataManifest,
    task: str = "auto",
    user_requirements: Optional[str] = None,
    output_name: Optional[str] = None,
) -> TrainingConfig:
    """Populate a config from schema defaults, the data manifest, and parsed
    requirement text. The result always passes validate_config."""
    wants = _parse_requirements(user_requirements) if user_requirements else {}

    labels = manifest.label_values or ()
    inferred: Optional[str] = None
    if labels:
        inferred = "regression" if _labels_look_continuous(labels) else "single_label_classification"

    problem_type = wants.get("problem_type")
    if problem_type is None:
        problem_type = task if task != "auto" else (inferred or "single_label_classification")
    if task != "auto" and problem_type != task and {problem_type, task} <= PROBLEM_TYPES:
        if (problem_type in REGRESSION_KINDS) != (task in REGRESSION_KINDS):
            raise ContradictoryRequirements(
                f"requirements ask for {problem_type} but task is {task}",
                requested=problem_type,
                task=task,
            )
    if (
        problem_type in REGRESSION_KINDS
        and labels
        and inferred in CLASSIFICATION_KINDS
        and len(labels) <= 2
    ):
        raise ContradictoryRequirements(
            "regression requested but the label column holds "
            f"{len(labels)} discrete classes",
            labels=list(labels),
        )

    if problem_type in REGRESSION_KINDS:
        num_labels = 1
        preferred = wants.get("preferred_metric")
        metrics = ("mse", "spearman") if preferred == "mse" else REGRESSION_METRICS
    else:
        num_labels = max(2, len(labels)) if labels else 2
        metrics = CLASSIFICATION_METRICS
    monitor = metrics[0]
    monitor_strategy = METRIC_DIRECTIONS[monitor]

    stem = output_name or (manifest.dataset or "model").replace("/", "_")
    config = TrainingConfig(
        dataset=manifest.dataset,
        problem_type=problem_type,
        num_labels=num_labels,
        metrics=metrics,
        sequence_column_name=manifest.sequence_column,
        label_column_name=manifest.label_column,
        train_file=manifest.train_csv,
        valid_file=manifest.valid_csv,
        test_file=manifest.test_csv,
        plm_model=wants.get("plm_model", "ESM2-650M"),
        training_method=wants.get("training_method", "freeze"),
        pooling_method=wants.get("pooling_method", SCHEMA_DEFAULTS["pooling_method"]),
        learning_rate=wants.get("learning_rate", SCHEMA_DEFAULTS["learning_rate"]),
        num_epochs=wants.get("num_epochs", SCHEMA_DEFAULTS["num_epochs"]),
        batch_size=16,
        monitor=monitor,
        monitor_strategy=monitor_strategy,
        scheduler="linear",
        output_dir=f"ckpt/{stem}",
        output_model_name=f"model_{stem}.pt",
    )
    if config.training_method in LORA_FAMILY:
        config = replace(
            config,
            lora_r=SCHEMA_DEFAULTS["lora_r"],
            lora_alpha=SCHEMA_DEFAULTS["lora_alpha"],
            lora_dropout=SCHEMA_DEFAULTS["lora_dropout"],
            lora_target_modules=SCHEMA_DEFAULTS["lora_target_modules"],
        )
    return config


def validate_config(config: TrainingConfig) -> list[str]:
    """Return diagnostics; empty means every invariant holds."""
    diags = []
    if config.problem_type not in PROBLEM_TYPES:
        diags.append(f"unknown problem_type {config.problem_type!r}")
    elif config.problem_type in CLASSIFICATION_KINDS:
        if config.num_labels is None or config.num_labels < 2:
            diags.append("classification requires num_labels >= 2")
    elif config.num_labels != 1:
        diags.append("regression requires num_labels == 1")

    if not config.plm_model:
        diags.append("plm_model is not set")
    if config.training_method not in TRAINING_METHODS:
        diags.append(f"unknown training_method {config.training_method!r}")
    if config.pooling_method not in POOLING_METHODS:
        diags.append(f"unknown pooling_method {config.pooling_method!r}")
    if config.learning_rate is None or config.learning_rate <= 0:
        diags.append("learning_rate must be > 0")
    if config.num_epochs < 1:
        diags.append("num_epochs must be >= 1")
    if config.patience < 0:
        diags.append("patience must be >= 0")
    if config.monitor not in set(config.metrics) | {"loss"}:
        diags.append(
            f"monitor {config.monitor!r} not among metrics {list(config.metrics)}"
        )
    if config.monitor_strategy not in ("min", "max"):
        diags.append(f"monitor_strategy must be min or max, got {config.monitor_strategy!r}")
    for metric in config.metrics:
        if metric not in METRIC_DIRECTIONS:
            diags.append(f"unknown metric {metric!r}")
    if config.batch_size is not None and config.batch_token is not None:
        diags.append("set batch_size or batch_token, not both")
    if config.max_seq_len != -1 and config.max_seq_len < 1:
        diags.append("max_seq_len must be -1 or >= 1")

    lora_fields = (config.lora_r, config.lora_alpha, config.lora_dropout)
    if config.training_method in LORA_FAMILY:
        if any(v is None for v in lora_fields):
            diags.append("lora-family training methods need lora_r/lora_alpha/lora_dropout")
    elif any(v is not None for v in lora_fields):
        diags.append(
            f"lora fields set but training_method is {config.training_method!r}"
        )
    return diags


# -- projection-head math -------------------------------------------------------


@dataclass
class AttentionParams:
    """Explicit scorer parameters for attention pooling.

    light_attention scores each residue with one linear functional; attention1d
    scores with a width-5 convolution over neighboring residues. Zero params
    give uniform logits, which makes attention pooling coincide with the mean.
    """

    weight: Optional[np.ndarray] = None  # (d,) or (5, d) for attention1d
    bias: float = 0.0


def _softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def pool_protein(
    H: np.ndarray,
    method: str = "mean",
    params: Optional[AttentionParams] = None,
) -> np.ndarray:
    """Aggregate residue embeddings (L, d) into one length-d vector."""
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.size == 0:
        raise NumericsError(f"embedding matrix must be 2-D and non-empty, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise NumericsError("embedding matrix contains non-finite entries")
    L, d = H.shape
    if method == "mean":
        return H.mean(axis=0)
    if method not in POOLING_METHODS:
        raise NumericsError(f"unknown pooling method {method!r}", method=method)

    params = params or AttentionParams()
    if method == "light_attention":
        w = np.zeros(d) if params.weight is None else np.asarray(params.weight, dtype=float)
        if w.shape != (d,):
            raise NumericsError(f"light_attention weight must have shape ({d},), got {w.shape}")
        logits = H @ w + params.bias
    else:  # attention1d
        k = np.zeros((5, d)) if params.weight is None else np.asarray(params.weight, dtype=float)
        if k.shape != (5, d):
            raise NumericsError(f"attention1d kernel must have shape (5, {d}), got {k.shape}")
        padded = np.vstack([np.zeros((2, d)), H, np.zeros((2, d))])
        logits = np.array(
            [float(np.sum(padded[i : i + 5] * k)) for i in range(L)]
        ) + params.bias
    attn = _softmax(logits, axis=0)
    return attn @ H


@dataclass
class TaskHead:
    """Decoding head: affine map, optionally through one tanh hidden layer."""

    w_out: np.ndarray
    b_out: np.ndarray
    w_hidden: Optional[np.ndarray] = None
    b_hidden: Optional[np.ndarray] = None

    def apply(self, x: np.ndarray) -> np.ndarray:
        h = np.asarray(x, dtype=float)
        if self.w_hidden is not None:
            h = np.tanh(h @ np.asarray(self.w_hidden) + np.asarray(self.b_hidden))
        return h @ np.asarray(self.w_out) + np.asarray(self.b_out)


def project_residues(H: np.ndarray, W: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Residue-level readout: softmax(H W + b), one row-stochastic row per
    residue; each row's argmax is that residue's label."""
    H = np.asarray(H, dtype=float)
    W = np.asarray(W, dtype=float)
    bias = np.asarray(bias, dtype=float)
    if H.ndim != 2 or W.ndim != 2 or H.shape[1] != W.shape[0] or bias.shape != (W.shape[1],):
        raise NumericsError(
            "shape mismatch",
            H=H.shape,
            W=W.shape,
            bias=bias.shape,
        )
    return _softmax(H @ W + bias, axis=1)


# -- budgeted config search ------------------------------------------------------


@dataclass
class TrialRecord:
    config: TrainingConfig
    metric_name: str
    metric_value: float
    wall_time: float = 0.0


@dataclass
class SearchSpace:
    """The four axes the search walks, plus the base config everything else
    is copied from."""

    base: TrainingConfig
    plm_models: tuple[str, ...]
    training_methods: tuple[str, ...]
    learning_rates: tuple[float, ...]
    pooling_methods: tuple[str, ...]

    def make(self, plm, method, lr, pooling) -> TrainingConfig:
        config = replace(
            self.base,
            plm_model=plm,
            training_method=method,
            learning_rate=lr,
            pooling_method=pooling,
        )
        if method in LORA_FAMILY:
            return replace(
                config,
                lora_r=config.lora_r or SCHEMA_DEFAULTS["lora_r"],
                lora_alpha=config.lora_alpha or SCHEMA_DEFAULTS["lora_alpha"],
                lora_dropout=config.lora_dropout or SCHEMA_DEFAULTS["lora_dropout"],
                lora_target_modules=config.lora_target_modules
                or SCHEMA_DEFAULTS["lora_target_modules"],
            )
        return replace(
            config, lora_r=None, lora_alpha=None, lora_dropout=None, lora_target_modules=None
        )


_SEARCH_AXES = ("training_method", "plm_model", "learning_rate", "pooling_method")


def _axis_values(space: SearchSpace, axis: str):
    return {
        "training_method": space.training_methods,
        "plm_model": space.plm_models,
        "learning_rate": space.learning_rates,
        "pooling_method": space.pooling_methods,
    }[axis]


def _fields_of(config: TrainingConfig) -> dict:
    return {
        "plm_model": config.plm_model,
        "training_method": config.training_method,
        "learning_rate": config.learning_rate,
        "pooling_method": config.pooling_method,
    }


def propose_next_config(
    history: Sequence[TrialRecord],
    space: SearchSpace,
    budget: int,
) -> Optional[TrainingConfig]:
    """Deterministic search: seed one default trial per backbone, then
    hill-climb a single axis at a time from the best trial so far
    (axis order: training_method, plm_model, learning_rate, pooling_method).
    Returns None to stop, at budget or when the neighborhood is exhausted.
    """
    if not (space.plm_models and space.training_methods and space.learning_rates and space.pooling_methods):
        raise ConfigError("empty search space")
    if len(history) >= budget:
        return None

    tried = {t.config.canonical() for t in history}

    # Seed grid: per-backbone defaults.
    for plm in space.plm_models:
        candidate = space.make(
            plm, space.training_methods[0], space.learning_rates[0], space.pooling_methods[0]
        )
        if candidate.canonical() not in tried:
            return candidate

    direction = METRIC_DIRECTIONS.get(history[0].metric_name, "max")
    best = (max if direction == "max" else min)(history, key=lambda t: t.metric_value)
    current = _fields_of(best.config)

    for axis in _SEARCH_AXES:
        for value in _axis_values(space, axis):
            if value == current[axis]:
                continue
            moved = dict(current, **{axis: value})
            candidate = space.make(
                moved["plm_model"],
                moved["training_method"],
                moved["learning_rate"],
                moved["pooling_method"],
            )
            if candidate.canonical() not in tried:
                return candidate
    return None


# -- manifest packaging -----------------------------------------------------------


class InvalidMetricKey(ConfigError):
    code = "invalid-metric-key"


def _derive_tool_name(config: TrainingConfig) -> str:
    stem = (config.output_model_name or config.dataset or "model").rsplit(".", 1)[0]
    stem = re.sub(r"[^A-Za-z0-9_]+", "_", stem).strip("_") or "model"
    return f"predict_{stem}"


def package_manifest(
    config: TrainingConfig,
    metrics: Mapping[str, float],
    checkpoint_ref: str,
    tool_name: Optional[str] = None,
    description: Optional[str] = None,
    created_at: str = "",
    provenance: str = "",
) -> SynthesizedToolManifest:
    """Wrap a trained checkpoint as a registerable tool: sequence/csv inputs,
    config-implied constraints in the description, metrics attached."""
    bad = set(metrics) - MANIFEST_METRIC_KEYS
    if bad:
        raise InvalidMetricKey(f"invalid metric keys: {sorted(bad)}", keys=sorted(bad))
    name = tool_name or _derive_tool_name(config)
    kind = "classification" if config.problem_type in CLASSIFICATION_KINDS else "regression"
    if description is None:
        description = (
            f"Synthesized {kind} predictor ({config.plm_model}, "
            f"{config.training_method}); accepts a raw sequence or a CSV of sequences."
        )
        if config.max_seq_len and config.max_seq_len > 0:
            description += f" Sequences longer than {config.max_seq_len} residues are truncated."
    params = (
        ParamSpec("sequence", "string"),
        ParamSpec("csv_file", "file-path"),
    )
    outputs = (
        "per-sequence predicted class with class probabilities"
        if kind == "classification"
        else "per-sequence predicted score"
    )
    tool = ToolDescriptor(
        name=name,
        description=description,
        category="automl",
        params=params,
        executor="synthesized-model",
    )
    return SynthesizedToolManifest(
        tool=tool,
        checkpoint_ref=checkpoint_ref,
        inference_schema={"inputs": list(params), "outputs": outputs},
        metrics={k: float(v) for k, v in metrics.items()},
        created_at=created_at,
        provenance=provenance,
    )
