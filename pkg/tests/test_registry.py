import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from protlab.registry import (
    DanglingCheckpointError,
    DuplicateToolError,
    InvalidChoiceError,
    MalformedSchemaError,
    MissingRequiredError,
    ParamSpec,
    Registry,
    RegistryError,
    SkillDoc,
    SkillNotFoundError,
    SynthesizedToolManifest,
    ToolDescriptor,
    UnknownToolError,
)

PREDICT_TOOL = ToolDescriptor(
    name="predict_protein_function",
    description="Sequence-level property prediction over a FASTA file.",
    category="discovery",
    params=(
        ParamSpec("fasta_file", "file-path", required=True),
        ParamSpec("task", "enum-choice", required=True,
                  allowed=("Solubility", "Subcellular Localization", "Stability")),
        ParamSpec("model_name", "string", default="ESM2-650M"),
    ),
    executor="fixture",
)


def fresh_registry(**kwargs):
    reg = Registry(executor_keys={"fixture", "synthesized-model"}, **kwargs)
    reg.register_tool(PREDICT_TOOL)
    return reg


def make_manifest(name="predict_allergenicity", checkpoint="ckpt/m.pt"):
    tool = ToolDescriptor(
        name=name,
        description="Synthesized allergenicity predictor.",
        category="automl",
        params=(ParamSpec("sequence", "string"), ParamSpec("csv_file", "file-path")),
        executor="synthesized-model",
    )
    return SynthesizedToolManifest(
        tool=tool,
        checkpoint_ref=checkpoint,
        inference_schema={"inputs": list(tool.params), "outputs": "class probabilities"},
        metrics={"accuracy": 0.92, "auroc": 0.96},
        created_at="1970-01-01T00:00:07Z",
        provenance="session-1",
    )


def test_register_then_list_and_lookup():
    reg = fresh_registry()
    receipt = reg.register_synthesized(make_manifest())
    assert receipt.name == "predict_allergenicity"
    names = [t.name for t in reg.tools()]
    assert "predict_allergenicity" in names
    assert reg.lookup("predict_allergenicity").category == "automl"


def test_duplicate_name_rejected():
    reg = fresh_registry()
    with pytest.raises(DuplicateToolError):
        reg.register_tool(PREDICT_TOOL)


def test_default_outside_allowed_rejected():
    bad = ToolDescriptor(
        name="x",
        description="",
        category="discovery",
        params=(ParamSpec("task", "enum-choice", default="Weird", allowed=("A", "B")),),
    )
    reg = fresh_registry()
    with pytest.raises(MalformedSchemaError):
        reg.register_tool(bad)


def test_required_after_optional_rejected():
    bad = ToolDescriptor(
        name="x",
        description="",
        category="plumbing",
        params=(ParamSpec("a", "string"), ParamSpec("b", "string", required=True)),
    )
    with pytest.raises(MalformedSchemaError):
        fresh_registry().register_tool(bad)


def test_unknown_executor_rejected():
    bad = ToolDescriptor(name="x", description="", category="plumbing", executor="martian")
    with pytest.raises(RegistryError):
        fresh_registry().register_tool(bad)


def test_validate_invocation_normalizes():
    reg = fresh_registry()
    args = reg.validate_invocation(
        "predict_protein_function",
        {"fasta_file": "x.fasta", "task": "Solubility", "model_name": "ESM2-650M"},
    )
    assert args == {"fasta_file": "x.fasta", "task": "Solubility", "model_name": "ESM2-650M"}


def test_validate_invocation_fills_default():
    reg = fresh_registry()
    args = reg.validate_invocation(
        "predict_protein_function", {"fasta_file": "x.fasta", "task": "Stability"}
    )
    assert args["model_name"] == "ESM2-650M"


def test_validate_invocation_missing_required():
    reg = fresh_registry()
    with pytest.raises(MissingRequiredError) as exc:
        reg.validate_invocation("predict_protein_function", {"fasta_file": "x.fasta"})
    assert exc.value.param == "task"


def test_validate_invocation_invalid_choice():
    reg = fresh_registry()
    with pytest.raises(InvalidChoiceError) as exc:
        reg.validate_invocation(
            "predict_protein_function", {"fasta_file": "x", "task": "localization"}
        )
    assert exc.value.param == "task"


def test_validate_invocation_unknown_tool():
    with pytest.raises(UnknownToolError):
        fresh_registry().validate_invocation("nope", {})


def test_validate_invocation_idempotent():
    reg = fresh_registry()
    once = reg.validate_invocation(
        "predict_protein_function", {"fasta_file": "x.fasta", "task": "Stability"}
    )
    assert reg.validate_invocation("predict_protein_function", once) == once


def test_validate_invocation_defer_skips_required():
    reg = fresh_registry()
    args = reg.validate_invocation(
        "predict_protein_function", {"task": "Stability"}, defer={"fasta_file"}
    )
    assert "fasta_file" not in args


def test_version_strictly_increases():
    reg = fresh_registry()
    v0 = reg.version
    reg.register_tool(ToolDescriptor("a", "", "plumbing", (), "fixture"))
    v1 = reg.version
    reg.register_tool(ToolDescriptor("b", "", "plumbing", (), "fixture"))
    assert v0 < v1 < reg.version


def test_skill_lookup_roundtrip():
    reg = fresh_registry()
    doc = SkillDoc("rdkit-skill", "RDKit basics", "## Steps\nUse rdkit to ...")
    reg.register_skill(doc)
    assert reg.lookup_skill("rdkit-skill") == doc
    with pytest.raises(SkillNotFoundError):
        reg.lookup_skill("absent")


def test_synthesized_persistence_survives_restart(tmp_path):
    manifests = tmp_path / "manifests"
    reg = fresh_registry(manifests_dir=manifests)
    receipt = reg.register_synthesized(make_manifest())
    assert receipt.manifest_path and manifests.joinpath("predict_allergenicity.json").exists()

    reopened = Registry(executor_keys={"fixture", "synthesized-model"}, manifests_dir=manifests)
    assert reopened.has_tool("predict_allergenicity")
    again = reopened.manifest_for("predict_allergenicity")
    assert again.to_dict() == make_manifest().to_dict()  # bit-identical roundtrip
    assert json.loads(again.to_json()) == json.loads(make_manifest().to_json())


def test_dangling_checkpoint_rejected(tmp_path):
    reg = Registry(
        executor_keys={"synthesized-model"},
        manifests_dir=tmp_path / "m",
        checkpoint_resolver=lambda ref: ref.startswith("ckpt/"),
    )
    with pytest.raises(DanglingCheckpointError):
        reg.register_synthesized(make_manifest(checkpoint="/nowhere/model.pt"))
    reg.register_synthesized(make_manifest())  # resolvable ref passes


def test_synthesized_manifest_bad_metric_key():
    m = make_manifest()
    bad = SynthesizedToolManifest(
        tool=m.tool,
        checkpoint_ref=m.checkpoint_ref,
        inference_schema=m.inference_schema,
        metrics={"vibes": 1.0},
        created_at=m.created_at,
        provenance=m.provenance,
    )
    with pytest.raises(MalformedSchemaError):
        fresh_registry().register_synthesized(bad)


_names = st.text(alphabet="abcdefgh_", min_size=1, max_size=12)


@given(
    st.lists(_names, min_size=1, max_size=6, unique=True),
    st.booleans(),
)
def test_register_lookup_identity_property(param_names, required_first):
    params = tuple(
        ParamSpec(n, "string", required=required_first and i == 0)
        for i, n in enumerate(param_names)
    )
    desc = ToolDescriptor("tool_x", "d", "plumbing", params, "fixture")
    reg = Registry(executor_keys={"fixture"})
    reg.register_tool(desc)
    assert reg.lookup("tool_x") == desc


@given(st.dictionaries(_names, st.text(max_size=8), max_size=5))
def test_validate_invocation_idempotent_property(args):
    params = tuple(ParamSpec(n, "string") for n in sorted(args))
    reg = Registry(executor_keys={"fixture"})
    reg.register_tool(ToolDescriptor("t", "", "plumbing", params, "fixture"))
    once = reg.validate_invocation("t", args)
    assert reg.validate_invocation("t", once) == once
