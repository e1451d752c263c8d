import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from protlab.automl import (
    AttentionParams,
    ConfigError,
    ContradictoryRequirements,
    DataManifest,
    InvalidMetricKey,
    NumericsError,
    SCHEMA_DEFAULTS,
    SearchSpace,
    TaskHead,
    TrainingConfig,
    TrialRecord,
    config_from_dict,
    config_from_json,
    generate_config,
    inspect_csv,
    package_manifest,
    pool_protein,
    project_residues,
    propose_next_config,
    validate_config,
)
from protlab.registry import SynthesizedToolManifest

ALLERGEN_CSV = "seq,label\nMKV,1\nMAV,0\nMLV,1\nMPV,0\n"


def allergen_manifest():
    manifest = DataManifest(
        train_csv="outputs/train_split.csv",
        test_csv="outputs/test_split.csv",
        sequence_column="seq",
        label_column="label",
    )
    return inspect_csv(ALLERGEN_CSV, manifest)


# Shape of the generated training config for Case-Study-1-style input.
def test_generate_config_allergen_lora():
    config = generate_config(
        allergen_manifest(),
        user_requirements="Train an ESM2-8M model with LoRA for allergen prediction.",
        output_name="esm2_8m_lora_allergen",
    )
    assert config.plm_model == "ESM2-8M"
    assert config.training_method == "plm-lora"
    assert config.lora_r == 8
    assert config.lora_alpha == 32
    assert config.lora_dropout == 0.1
    assert config.num_labels == 2
    assert config.metrics == ("accuracy", "mcc", "f1", "precision", "recall", "auroc")
    assert config.monitor == "accuracy" and config.monitor_strategy == "max"
    assert validate_config(config) == []


def test_generate_config_regression_direction():
    manifest = DataManifest(sequence_column="seq", label_column="label",
                            label_values=("0.12", "3.4", "2.2", "0.9"))
    config = generate_config(manifest, task="regression")
    assert config.num_labels == 1
    assert config.monitor == "spearman" and config.monitor_strategy == "max"
    mse = generate_config(manifest, task="regression", user_requirements="optimize mse")
    assert mse.monitor == "mse" and mse.monitor_strategy == "min"
    assert validate_config(config) == []


def test_generate_config_contradiction():
    with pytest.raises(ContradictoryRequirements):
        generate_config(allergen_manifest(), user_requirements="treat this as regression")


def test_inspect_csv_missing_column():
    with pytest.raises(ConfigError):
        inspect_csv("sequence,y\nMKV,1\n", DataManifest(sequence_column="seq", label_column="label"))


def test_schema_defaults_pinned():
    assert SCHEMA_DEFAULTS["seed"] == 3407
    assert SCHEMA_DEFAULTS["patience"] == 10
    assert SCHEMA_DEFAULTS["learning_rate"] == 1e-3
    assert SCHEMA_DEFAULTS["lora_r"] == 8
    assert SCHEMA_DEFAULTS["lora_alpha"] == 32
    assert SCHEMA_DEFAULTS["lora_dropout"] == 0.1
    assert SCHEMA_DEFAULTS["num_attention_head"] == 8
    assert SCHEMA_DEFAULTS["attention_probs_dropout"] == 0.1
    assert SCHEMA_DEFAULTS["pooling_dropout"] == 0.1
    cfg = TrainingConfig()
    for key in ("seed", "patience", "num_attention_head", "num_workers", "warmup_steps"):
        assert getattr(cfg, key) == SCHEMA_DEFAULTS[key]


CS1_STYLE_CONFIG = {
    "dataset_selection": "Custom Dataset",
    "dataset_custom": "outputs/splits",
    "problem_type": "single_label_classification",
    "num_labels": 2,
    "metrics": ["accuracy", "mcc", "f1", "precision", "recall", "auroc"],
    "sequence_column_name": "seq",
    "label_column_name": "label",
    "plm_model": "ESM2-8M",
    "training_method": "plm-lora",
    "pooling_method": "mean",
    "batch_mode": "Batch Size Mode",
    "batch_size": 16,
    "learning_rate": 5e-05,
    "num_epochs": 2,
    "max_seq_len": 1098,
    "patience": 10,
    "gradient_accumulation_steps": 1,
    "warmup_steps": 100,
    "scheduler": "linear",
    "max_grad_norm": 1.0,
    "num_workers": 4,
    "monitored_metrics": "accuracy",
    "monitored_strategy": "max",
    "output_model_name": "model_train_split.pt",
    "output_dir": "ckpt/train_split",
    "wandb_enabled": False,
    "lora_r": 8,
    "lora_alpha": 32,
    "lora_dropout": 0.1,
    "lora_target_modules": "query,key,value",
    "test_file": "outputs/test_split.csv",
}


def test_validate_accepts_cs1_style_config():
    config = config_from_dict(CS1_STYLE_CONFIG)
    assert config.monitor == "accuracy"
    assert config.lora_target_modules == ("query", "key", "value")
    assert validate_config(config) == []


def test_validate_flags_monitor_not_in_metrics():
    config = dataclasses.replace(TrainingConfig(plm_model="ESM2-8M", num_labels=2), monitor="accuracy")
    diags = validate_config(config)
    assert any("monitor" in d for d in diags)


def test_validate_flags_lora_fields_with_freeze():
    config = dataclasses.replace(
        TrainingConfig(plm_model="ESM2-8M", num_labels=2), lora_r=8
    )
    assert any("lora" in d for d in validate_config(config))


def test_validate_flags_bad_num_labels():
    config = TrainingConfig(plm_model="x", problem_type="regression", num_labels=3)
    assert any("regression" in d for d in validate_config(config))


@settings(max_examples=25)
@given(
    method=st.sampled_from(["freeze", "full", "plm-lora", "dora", "ia3", "ses-adapter"]),
    want_reg=st.booleans(),
    model=st.sampled_from(["ESM2-8M", "ESM2-650M", "Ankh-large"]),
)
def test_generated_configs_always_validate(method, want_reg, model):
    if want_reg:
        manifest = DataManifest(sequence_column="seq", label_column="label",
                                label_values=("0.5", "1.7", "2.9", "0.1"))
        requirements = f"{model} with {method} for a regression problem"
    else:
        manifest = DataManifest(sequence_column="seq", label_column="label",
                                label_values=("0", "1"))
        requirements = f"{model} with {method}"
    config = generate_config(manifest, user_requirements=requirements)
    assert validate_config(config) == []


def test_config_json_roundtrip():
    config = generate_config(allergen_manifest(), user_requirements="ESM2-8M with LoRA")
    again = config_from_json(config.to_json())
    assert again == config


# -- pooling and projection ---------------------------------------------------


def test_mean_pool_arithmetic():
    out = pool_protein(np.array([[1.0, 3.0], [3.0, 1.0]]), "mean")
    assert np.allclose(out, [2.0, 2.0])


def test_constant_rows_any_method():
    H = np.tile([0.5, -1.5, 2.0], (7, 1))
    for method in ("mean", "light_attention", "attention1d"):
        out = pool_protein(H, method, AttentionParams(weight=None, bias=0.3))
        assert np.allclose(out, [0.5, -1.5, 2.0])


def test_uniform_logits_equal_mean():
    rng = np.random.default_rng(0)
    H = rng.normal(size=(11, 6))
    mean = pool_protein(H, "mean")
    light = pool_protein(H, "light_attention", AttentionParams(np.zeros(6), bias=2.0))
    conv = pool_protein(H, "attention1d", AttentionParams(np.zeros((5, 6)), bias=-1.0))
    assert np.max(np.abs(light - mean)) < 1e-12
    assert np.max(np.abs(conv - mean)) < 1e-12


def test_attention_weights_convexity():
    rng = np.random.default_rng(5)
    H = rng.normal(size=(9, 4))
    out = pool_protein(H, "light_attention", AttentionParams(rng.normal(size=4), 0.1))
    assert np.all(out <= H.max(axis=0) + 1e-12)
    assert np.all(out >= H.min(axis=0) - 1e-12)


def test_pool_rejects_bad_inputs():
    with pytest.raises(NumericsError):
        pool_protein(np.empty((0, 3)), "mean")
    with pytest.raises(NumericsError):
        pool_protein(np.ones((2, 2)), "nope")
    with pytest.raises(NumericsError):
        pool_protein(np.array([[np.inf, 1.0]]), "mean")


def test_project_residues_uniform_when_zero():
    out = project_residues(np.random.default_rng(1).normal(size=(4, 3)) * 0, np.zeros((3, 3)), np.zeros(3))
    assert np.allclose(out, 1.0 / 3.0)


def test_project_residues_bias_shift_invariance():
    rng = np.random.default_rng(2)
    H, W, b = rng.normal(size=(6, 4)), rng.normal(size=(4, 5)), rng.normal(size=5)
    base = project_residues(H, W, b)
    shifted = project_residues(H, W, b + 13.7)
    assert np.max(np.abs(base - shifted)) < 1e-12


def test_project_residues_matches_naive_oracle():
    rng = np.random.default_rng(3)
    H, W, b = rng.normal(size=(8, 5)), rng.normal(size=(5, 4)), rng.normal(size=4)
    ours = project_residues(H, W, b)
    # direct elementwise exp/normalize
    z = H @ W + b
    naive = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
    assert np.max(np.abs(ours - naive)) < 1e-12
    assert np.max(np.abs(ours.sum(axis=1) - 1.0)) < 1e-9


def test_project_residues_shape_mismatch():
    with pytest.raises(NumericsError):
        project_residues(np.ones((2, 3)), np.ones((4, 2)), np.ones(2))


def test_task_head_hidden_layer():
    head = TaskHead(
        w_out=np.array([[1.0], [1.0]]),
        b_out=np.array([0.5]),
        w_hidden=np.eye(2),
        b_hidden=np.zeros(2),
    )
    out = head.apply(np.array([0.0, 0.0]))
    assert out == pytest.approx([0.5])


# -- config search --------------------------------------------------------------


def space():
    base = TrainingConfig(plm_model="ESM2-8M", num_labels=2,
                          metrics=("accuracy",), monitor="accuracy", monitor_strategy="max")
    return SearchSpace(
        base=base,
        plm_models=("ESM2-8M", "ESM2-150M"),
        training_methods=("freeze", "plm-lora", "ses-adapter"),
        learning_rates=(1e-3, 5e-4),
        pooling_methods=("mean", "light_attention"),
    )


def run_search(n_trials, metric=lambda i: float(i)):
    sp = space()
    history = []
    for i in range(n_trials):
        config = propose_next_config(history, sp, budget=n_trials)
        if config is None:
            break
        history.append(TrialRecord(config, "accuracy", metric(i)))
    return history


def test_search_starts_with_backbone_grid():
    history = run_search(2)
    assert [t.config.plm_model for t in history] == ["ESM2-8M", "ESM2-150M"]
    assert all(t.config.training_method == "freeze" for t in history)


def test_search_hill_climbs_one_field_from_best():
    history = run_search(3)
    base_fields = (
        history[-1].config.training_method,
        history[-1].config.plm_model,
        history[-1].config.learning_rate,
        history[-1].config.pooling_method,
    )
    best = max(history[:-1], key=lambda t: t.metric_value).config
    diffs = sum(
        1
        for a, b in zip(
            base_fields,
            (best.training_method, best.plm_model, best.learning_rate, best.pooling_method),
        )
        if a != b
    )
    assert diffs == 1


def test_search_never_repeats_and_stops():
    sp = space()
    history = []
    seen = set()
    while True:
        config = propose_next_config(history, sp, budget=100)
        if config is None:
            break
        key = config.canonical()
        assert key not in seen
        seen.add(key)
        history.append(TrialRecord(config, "accuracy", float(len(history) % 3)))
    assert len(history) >= 4


def test_search_stops_at_budget():
    sp = space()
    history = [
        TrialRecord(sp.make("ESM2-8M", "freeze", 1e-3, "mean"), "accuracy", 0.5),
    ]
    assert propose_next_config(history, sp, budget=1) is None


def test_search_empty_space():
    sp = SearchSpace(TrainingConfig(), (), ("freeze",), (1e-3,), ("mean",))
    with pytest.raises(ConfigError):
        propose_next_config([], sp, budget=3)


# -- manifest packaging -----------------------------------------------------------


def test_package_manifest_roundtrip():
    config = generate_config(allergen_manifest(), user_requirements="ESM2-8M with LoRA",
                             output_name="allergen")
    manifest = package_manifest(
        config,
        {"accuracy": 0.92, "auroc": 0.96},
        checkpoint_ref="outputs/ckpt/model_allergen.pt",
        tool_name="predict_allergenicity",
        created_at="1970-01-01T00:00:00Z",
        provenance="run-1",
    )
    assert manifest.tool.name == "predict_allergenicity"
    assert manifest.tool.category == "automl"
    assert {p.name for p in manifest.tool.params} == {"sequence", "csv_file"}
    back = SynthesizedToolManifest.from_json(manifest.to_json())
    assert back.to_dict() == manifest.to_dict()


def test_package_manifest_rejects_unknown_metric():
    config = TrainingConfig(plm_model="ESM2-8M", num_labels=2)
    with pytest.raises(InvalidMetricKey):
        package_manifest(config, {"foo": 1.0}, checkpoint_ref="x")


def test_package_manifest_derives_name():
    config = TrainingConfig(plm_model="ESM2-8M", num_labels=2, output_model_name="model_tox.pt")
    manifest = package_manifest(config, {"f1": 0.8}, checkpoint_ref="x")
    assert manifest.tool.name == "predict_model_tox"
