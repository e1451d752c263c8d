import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from protlab.plan import (
    EMPTY_PLAN,
    ClarificationRequest,
    DependencyRef,
    Diagnostic,
    ExecutionPlan,
    ForwardDependency,
    MalformedJson,
    MalformedOrdinal,
    MissingField,
    PlanStep,
    SchemaViolation,
    UnresolvedDependency,
    parse_dependency_string,
    parse_plan,
    resolve_inputs,
    serialize_plan,
    substitute_placeholders,
    validate_against_registry,
)
from protlab.registry import ParamSpec, Registry, ToolDescriptor

# The two-step download-then-scan plan shape used in planner examples.
P04040_PLAN = json.dumps(
    [
        {
            "step": 1,
            "task_description": "Download sequence for P04040 from UniProt.",
            "tool_name": "download_uniprot_seq_by_id",
            "tool_input": {
                "uniprot_id": "P04040",
                "out_path": "<default_output_dir>/P04040.fasta",
            },
        },
        {
            "step": 2,
            "task_description": "Score destabilizing substitutions from the FASTA of step 1.",
            "tool_name": "zero_shot_mutation_sequence_prediction",
            "tool_input": {
                "fasta_file": "dependency:step_1:file_path",
                "model_name": "ESM2-650M",
            },
        },
    ]
)


def fixture_registry():
    reg = Registry(executor_keys={"fixture"})
    reg.register_tool(
        ToolDescriptor(
            "download_uniprot_seq_by_id",
            "Download a UniProt FASTA.",
            "database",
            (
                ParamSpec("uniprot_id", "string", required=True),
                ParamSpec("out_path", "file-path"),
            ),
        )
    )
    reg.register_tool(
        ToolDescriptor(
            "zero_shot_mutation_sequence_prediction",
            "Saturation scan over a sequence.",
            "directed-evolution",
            (
                ParamSpec("fasta_file", "file-path", required=True),
                ParamSpec("model_name", "string", default="ESM2-650M"),
            ),
        )
    )
    reg.register_tool(
        ToolDescriptor(
            "predict_protein_function",
            "Property prediction.",
            "discovery",
            (
                ParamSpec("fasta_file", "file-path", required=True),
                ParamSpec("task", "enum-choice", required=True,
                          allowed=("Solubility", "Subcellular Localization", "Stability")),
                ParamSpec("model_name", "string", default="ESM2-650M"),
            ),
        )
    )
    return reg


# -- dependency grammar ----------------------------------------------------------


def test_dependency_with_field_path():
    ref = parse_dependency_string("dependency:step_1:file_path")
    assert ref == DependencyRef(1, ("file_path",))


def test_dependency_whole_output():
    assert parse_dependency_string("dependency:step_2") == DependencyRef(2, None)


def test_dependency_multi_segment_path():
    ref = parse_dependency_string("dependency:step_3:details:train_path")
    assert ref == DependencyRef(3, ("details", "train_path"))


def test_non_matching_string_is_literal():
    assert parse_dependency_string("P04040.fasta") == "P04040.fasta"


@pytest.mark.parametrize("bad", ["dependency:step_x", "dependency:step_0", "dependency:step_1::a"])
def test_malformed_dependency_strings(bad):
    with pytest.raises(MalformedOrdinal):
        parse_dependency_string(bad)


@given(st.text(max_size=40))
def test_dependency_partition_property(s):
    """Every string is exactly one of ref, literal, or error."""
    try:
        out = parse_dependency_string(s)
    except MalformedOrdinal:
        assert s.startswith("dependency:step_")
        return
    if isinstance(out, DependencyRef):
        assert str(out) == s
    else:
        assert out == s


# -- parse / serialize -------------------------------------------------------------


def test_parse_p04040_plan():
    plan = parse_plan(P04040_PLAN)
    assert isinstance(plan, ExecutionPlan)
    assert [s.tool_name for s in plan.steps] == [
        "download_uniprot_seq_by_id",
        "zero_shot_mutation_sequence_prediction",
    ]
    assert plan.steps[1].tool_input["fasta_file"] == DependencyRef(1, ("file_path",))


def test_parse_plan_strips_fences():
    fenced = "```json\n" + P04040_PLAN + "\n```"
    assert isinstance(parse_plan(fenced), ExecutionPlan)


def test_parse_empty_array_is_empty_plan():
    assert parse_plan("[]") is EMPTY_PLAN


def test_parse_clarification_object():
    raw = json.dumps(
        {
            "need_clarification": True,
            "preliminary_plan": "Download then predict.",
            "question": "Which organism is the target from?",
        }
    )
    out = parse_plan(raw)
    assert isinstance(out, ClarificationRequest)
    assert out.question.startswith("Which organism")


def test_parse_forward_dependency_rejected():
    raw = json.dumps(
        [
            {
                "step": 1,
                "tool_name": "t",
                "tool_input": {"x": "dependency:step_2:x"},
            }
        ]
    )
    with pytest.raises(ForwardDependency):
        parse_plan(raw)


def test_parse_self_dependency_rejected():
    raw = json.dumps([{"step": 1, "tool_name": "t", "tool_input": {"x": "dependency:step_1"}}])
    with pytest.raises(ForwardDependency):
        parse_plan(raw)


def test_parse_malformed_json():
    with pytest.raises(MalformedJson):
        parse_plan("[{]")


def test_parse_schema_violations():
    with pytest.raises(SchemaViolation):
        parse_plan(json.dumps([{"step": 1, "tool_input": {}}]))  # no tool_name
    with pytest.raises(SchemaViolation):
        parse_plan(json.dumps([{"step": 2, "tool_name": "t", "tool_input": {}}]))  # bad ordinal
    with pytest.raises(SchemaViolation):
        parse_plan(json.dumps({"hello": 1}))


def test_duplicate_keys_last_wins_with_warning():
    raw = '[{"step": 1, "tool_name": "t", "tool_input": {"a": "x", "a": "y"}}]'
    plan = parse_plan(raw)
    assert plan.steps[0].tool_input["a"] == "y"
    assert any("duplicate key" in w for w in plan.warnings)


def test_roundtrip_identity():
    plan = parse_plan(P04040_PLAN)
    again = parse_plan(serialize_plan(plan))
    assert again.steps == plan.steps


def test_roundtrip_preserves_goal_fields():
    raw = json.dumps(
        [
            {
                "step": 1,
                "goal": "Sequence on disk",
                "success_criteria": "output has key file_path",
                "task_description": "d",
                "tool_name": "t",
                "tool_input": {"u": "x"},
            }
        ]
    )
    plan = parse_plan(raw)
    again = parse_plan(serialize_plan(plan))
    assert again.steps[0].goal == "Sequence on disk"
    assert again.steps[0].success_criteria == "output has key file_path"


plan_steps = st.lists(
    st.tuples(st.sampled_from(["tool_a", "tool_b"]), st.dictionaries(
        st.sampled_from(["p", "q", "r"]), st.text(max_size=6), max_size=2)),
    min_size=1,
    max_size=5,
)


@given(plan_steps)
def test_roundtrip_property(items):
    steps = tuple(
        PlanStep(step=i, tool_name=name, tool_input=args, task_description=f"step {i}")
        for i, (name, args) in enumerate(items, start=1)
    )
    plan = ExecutionPlan(steps)
    assert parse_plan(serialize_plan(plan)).steps == steps


def test_topological_order_equals_ordinal_order():
    plan = parse_plan(P04040_PLAN)
    for step in plan.steps:
        for ref in step.dependency_refs():
            assert ref.target_step < step.step


# -- placeholder substitution -------------------------------------------------------


def test_default_output_dir_substitution():
    plan = parse_plan(P04040_PLAN)
    step = substitute_placeholders(plan.steps[0], {"default_output_dir": "outputs"})
    assert step.tool_input["out_path"] == "outputs/P04040.fasta"


def test_unknown_placeholder_left_alone():
    step = PlanStep(1, "t", {"x": "<mystery_token>/y"})
    out = substitute_placeholders(step, {"default_output_dir": "outputs"})
    assert out.tool_input["x"] == "<mystery_token>/y"


# -- input resolution ----------------------------------------------------------------


def test_resolve_field_path():
    plan = parse_plan(P04040_PLAN)
    artifacts = {1: {"file_path": "out/P04040.fasta", "success": True}}
    args = resolve_inputs(plan.steps[1], artifacts)
    assert args["fasta_file"] == "out/P04040.fasta"


def test_resolve_whole_output():
    step = PlanStep(2, "t", {"payload": DependencyRef(1)})
    artifacts = {1: {"a": 1}}
    assert resolve_inputs(step, artifacts)["payload"] == {"a": 1}


def test_resolve_inside_lists():
    step = PlanStep(
        3,
        "t",
        {"input_files": [DependencyRef(1, ("csv_path",)), DependencyRef(2, ("csv_path",))]},
    )
    artifacts = {1: {"csv_path": "a.csv"}, 2: {"csv_path": "b.csv"}}
    assert resolve_inputs(step, artifacts)["input_files"] == ["a.csv", "b.csv"]


def test_resolve_missing_field():
    step = PlanStep(2, "t", {"x": DependencyRef(1, ("absent",))})
    with pytest.raises(MissingField) as exc:
        resolve_inputs(step, {1: {"present": 1}})
    assert exc.value.details["path"] == ["absent"]


def test_resolve_unresolved_dependency():
    step = PlanStep(2, "t", {"x": DependencyRef(1)})
    with pytest.raises(UnresolvedDependency):
        resolve_inputs(step, {})


def test_resolve_is_deterministic_and_pure():
    plan = parse_plan(P04040_PLAN)
    artifacts = {1: {"file_path": "out/P04040.fasta"}}
    first = resolve_inputs(plan.steps[1], artifacts)
    second = resolve_inputs(plan.steps[1], artifacts)
    assert first == second
    assert artifacts == {1: {"file_path": "out/P04040.fasta"}}


# -- registry validation ---------------------------------------------------------------


def test_validate_p04040_plan_clean():
    plan = parse_plan(P04040_PLAN)
    assert validate_against_registry(plan, fixture_registry()) == []


def test_validate_unknown_tool():
    raw = json.dumps(
        [{"step": 1, "tool_name": "alphafold_structure_download", "tool_input": {"uniprot_id": "P00734"}}]
    )
    diags = validate_against_registry(parse_plan(raw), fixture_registry())
    assert [d.code for d in diags] == ["unknown-tool"]


def test_validate_allowed_choice_passes():
    raw = json.dumps(
        [
            {
                "step": 1,
                "tool_name": "predict_protein_function",
                "tool_input": {"fasta_file": "x.fasta", "task": "Stability"},
            }
        ]
    )
    assert validate_against_registry(parse_plan(raw), fixture_registry()) == []


def test_validate_bad_choice_flagged():
    raw = json.dumps(
        [
            {
                "step": 1,
                "tool_name": "predict_protein_function",
                "tool_input": {"fasta_file": "x.fasta", "task": "localization"},
            }
        ]
    )
    diags = validate_against_registry(parse_plan(raw), fixture_registry())
    assert [d.code for d in diags] == ["invalid-choice"]


def test_validate_defers_dependency_params():
    plan = parse_plan(P04040_PLAN)  # step 2's required fasta_file is a ref
    assert validate_against_registry(plan, fixture_registry()) == []
