"""Builtin tool catalog and the executor table behind it.

Search engines, databases, structure predictors, and model training are out
of scope as live systems; their descriptors bind to fixture executors that
serve scripted outputs. The config generator, ridge toolkit, screening
ranker, FASTA/skill plumbing, and tool-registration path run for real.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional

from . import automl, evolve
from .errors import ProtlabError
from .registry import (
    ParamSpec,
    Registry,
    RegistryError,
    SkillDoc,
    ToolDescriptor,
)

EXECUTOR_KEYS = frozenset(
    {"fixture", "automl-config", "training", "registry-ops", "evolve", "plumbing", "synthesized-model"}
)

FUNCTION_TASKS = (
    "Solubility",
    "Subcellular Localization",
    "Membrane Protein",
    "Metal Ion Binding",
    "Stability",
    "Sortingsignal",
    "Optimal Temperature",
    "Kcat",
    "Optimal PH",
    "Immunogenicity Prediction - Virus",
    "Immunogenicity Prediction - Bacteria",
    "Immunogenicity Prediction - Tumor",
)

RESIDUE_TASKS = ("Activity Site", "Binding Site", "Conserved Site", "Motif")


def _p(name, kind="string", required=False, default=None, allowed=None):
    return ParamSpec(name, kind, required, default, tuple(allowed) if allowed else None)


def _search(name, description, extra=()):
    return ToolDescriptor(
        name,
        description,
        "research-search",
        (_p("query", required=True),) + tuple(extra),
        "fixture",
    )


BUILTIN_TOOLS: tuple[ToolDescriptor, ...] = (
    # research-search
    _search(
        "literature_search",
        "Federated literature lookup across indexed journals and preprint servers.",
        (
            _p("max_results", "integer", default=5),
            _p("source", "enum-choice",
               allowed=("pubmed", "arxiv", "biorxiv", "semantic_scholar", "web_of_science")),
        ),
    ),
    _search("deep_search", "Multi-source web search for datasets, repositories, and context."),
    _search("web_search", "General web search with summarized snippets."),
    _search("query_pubmed", "PubMed abstract search.", (_p("max_results", "integer", default=5),)),
    _search("query_arxiv", "arXiv preprint search.", (_p("max_results", "integer", default=5),)),
    _search("query_tavily", "LLM-oriented web search."),
    _search("query_github", "Repository search for implementations and pipelines."),
    _search("query_hugging_face", "Model and dataset hub search."),
    # database
    ToolDescriptor(
        "download_uniprot_seq_by_id",
        "Fetch a protein sequence from UniProt as FASTA.",
        "database",
        (_p("uniprot_id", required=True), _p("out_path", "file-path")),
        "fixture",
    ),
    ToolDescriptor(
        "UniProt_query",
        "Fetch a UniProt entry's sequence and core annotations.",
        "database",
        (_p("uniprot_id", required=True),),
        "fixture",
    ),
    ToolDescriptor(
        "download_ncbi_sequence",
        "Fetch a sequence record from NCBI.",
        "database",
        (
            _p("ncbi_id", required=True),
            _p("out_path", "file-path"),
            _p("db", "enum-choice", default="protein", allowed=("protein", "nuccore")),
        ),
        "fixture",
    ),
    ToolDescriptor(
        "download_rcsb_structure_by_pdb_id",
        "Download an experimental structure from RCSB.",
        "database",
        (
            _p("pdb_id", required=True),
            _p("out_dir", "file-path"),
            _p("file_type", "enum-choice", default="pdb", allowed=("pdb", "cif", "xml")),
        ),
        "fixture",
    ),
    ToolDescriptor(
        "download_alphafold_structure_by_uniprot_id",
        "Download a predicted structure from the AlphaFold database.",
        "database",
        (
            _p("uniprot_id", required=True),
            _p("out_dir", "file-path"),
            _p("format", "enum-choice", default="pdb", allowed=("pdb", "cif")),
        ),
        "fixture",
    ),
    ToolDescriptor(
        "alphafold_structure_download",
        "Download a predicted structure from the AlphaFold database by UniProt id.",
        "database",
        (
            _p("uniprot_id", required=True),
            _p("output_format", "enum-choice", default="pdb", allowed=("pdb", "cif")),
        ),
        "fixture",
    ),
    ToolDescriptor(
        "download_interpro_metadata_by_id",
        "Fetch InterPro entry metadata.",
        "database",
        (_p("interpro_id", required=True),),
        "fixture",
    ),
    ToolDescriptor(
        "download_interpro_annotations_by_uniprot_id",
        "Fetch InterPro domain annotations for a UniProt id.",
        "database",
        (_p("uniprot_id", required=True),),
        "fixture",
    ),
    # discovery
    ToolDescriptor(
        "predict_protein_function",
        "Sequence-level property prediction over the records of a FASTA file.",
        "discovery",
        (
            _p("fasta_file", "file-path", required=True),
            _p("task", "enum-choice", required=True, allowed=FUNCTION_TASKS),
            _p("model_name", default="ESM2-650M"),
        ),
        "fixture",
    ),
    ToolDescriptor(
        "predict_residue_function",
        "Residue-level site prediction over the records of a FASTA file.",
        "discovery",
        (
            _p("fasta_file", "file-path", required=True),
            _p("task", "enum-choice", required=True, allowed=RESIDUE_TASKS),
            _p("model_name", default="ESM2-650M"),
        ),
        "fixture",
    ),
    ToolDescriptor(
        "predict_structure_esmfold",
        "Fast single-sequence structure prediction.",
        "discovery",
        (_p("sequence", required=True), _p("output_dir", "file-path"), _p("output_file")),
        "fixture",
    ),
    ToolDescriptor(
        "protein_structure_prediction_AlphaFold2",
        "High-accuracy structure prediction from one sequence.",
        "discovery",
        (_p("sequence", required=True), _p("save_path", "file-path")),
        "fixture",
    ),
    ToolDescriptor(
        "enzyme_mine_VenusMine",
        "Embedding-driven homolog mining seeded by a structure file.",
        "discovery",
        (
            _p("pdb_file", "file-path", required=True),
            _p("protect_start", "integer", default=1),
            _p("protect_end", "integer", default=-1),
        ),
        "fixture",
    ),
    ToolDescriptor(
        "calculate_physchem_from_fasta",
        "Molecular weight, pI, aromaticity, and related descriptors.",
        "discovery",
        (_p("fasta_file", "file-path", required=True),),
        "fixture",
    ),
    ToolDescriptor(
        "calculate_sasa_from_pdb",
        "Per-residue solvent accessible surface area.",
        "discovery",
        (_p("pdb_file", "file-path", required=True),),
        "fixture",
    ),
    ToolDescriptor(
        "calculate_rsa_from_pdb",
        "Per-residue relative solvent accessibility.",
        "discovery",
        (_p("pdb_file", "file-path", required=True),),
        "fixture",
    ),
    ToolDescriptor(
        "calculate_ss_from_pdb",
        "Secondary-structure assignment for a chain.",
        "discovery",
        (_p("pdb_file", "file-path", required=True),),
        "fixture",
    ),
    ToolDescriptor(
        "pdb_chain_sequences",
        "Extract per-chain sequences from a structure file.",
        "discovery",
        (_p("pdb_file", "file-path", required=True),),
        "fixture",
    ),
    ToolDescriptor(
        "get_seq_from_pdb_chain_a",
        "Extract the chain A sequence from a structure file.",
        "discovery",
        (_p("pdb_file", "file-path", required=True),),
        "fixture",
    ),
    # directed-evolution
    ToolDescriptor(
        "zero_shot_mutation_sequence_prediction",
        "Saturation single-substitution scan from sequence alone.",
        "directed-evolution",
        (_p("fasta_file", "file-path"), _p("sequence"), _p("model_name", default="ESM2-650M")),
        "fixture",
    ),
    ToolDescriptor(
        "zero_shot_mutation_structure_prediction",
        "Saturation single-substitution scan conditioned on a structure.",
        "directed-evolution",
        (_p("structure_file", "file-path", required=True), _p("model_name", default="VenusREM")),
        "fixture",
    ),
    ToolDescriptor(
        "fit_ridge_regression",
        "Fit an additive one-hot ridge model from measured variant scores.",
        "directed-evolution",
        (
            _p("observations_csv", "file-path", required=True),
            _p("lambda", "real", default=1.0),
            _p("model_out", "file-path"),
        ),
        "evolve",
    ),
    ToolDescriptor(
        "rank_mutation_combinations",
        "Enumerate and rank multi-site combinations under a fitted ridge model.",
        "directed-evolution",
        (
            _p("model_file", "file-path", required=True),
            _p("orders", "list-of-strings", default=("2", "3", "4")),
            _p("top_k", "integer", default=5),
        ),
        "evolve",
    ),
    ToolDescriptor(
        "screen_rank_tables",
        "Sort screening CSVs, take the top rows, and merge them by candidate.",
        "directed-evolution",
        (
            _p("csv_files", "list-of-strings", required=True),
            _p("sort_column", default="-1"),
            _p("top_k", "integer", default=3),
        ),
        "evolve",
    ),
    # automl
    ToolDescriptor(
        "generate_training_config",
        "Build a validated training configuration from a dataset and free-text requirements.",
        "automl",
        (
            _p("csv_file", "file-path"),
            _p("dataset_path", "file-path"),
            _p("valid_csv_file", "file-path"),
            _p("test_csv_file", "file-path"),
            _p("output_name"),
            _p("user_requirements"),
        ),
        "automl-config",
    ),
    ToolDescriptor(
        "train_protein_model",
        "Run the training pipeline described by a configuration file.",
        "automl",
        (_p("config_path", "file-path", required=True),),
        "training",
    ),
    ToolDescriptor(
        "predict_with_protein_model",
        "Run inference with a trained checkpoint on a sequence or CSV.",
        "automl",
        (
            _p("config_path", "file-path", required=True),
            _p("sequence"),
            _p("csv_file", "file-path"),
        ),
        "fixture",
    ),
    ToolDescriptor(
        "protein_model_predict",
        "Run inference with a trained checkpoint (batch CSV or single sequence).",
        "automl",
        (
            _p("config_path", "file-path", required=True),
            _p("sequence"),
            _p("csv_file", "file-path"),
        ),
        "fixture",
    ),
    ToolDescriptor(
        "register_trained_model",
        "Package a trained checkpoint as a reusable tool and register it.",
        "automl",
        (
            _p("tool_name", required=True),
            _p("model_path", "file-path", required=True),
            _p("config_path", "file-path", required=True),
            _p("metrics", "map"),
            _p("description"),
        ),
        "registry-ops",
    ),
    # code-execution
    ToolDescriptor(
        "ai_code_execution",
        "Author and run a task-specific script over the given input files.",
        "code-execution",
        (_p("input_files", "list-of-strings", required=True), _p("task_description", required=True)),
        "fixture",
    ),
    ToolDescriptor(
        "agent_generated_code",
        "Author and run a generated script for data processing tasks.",
        "code-execution",
        (_p("task_description", required=True), _p("input_files", "list-of-strings", required=True)),
        "fixture",
    ),
    ToolDescriptor(
        "python_repl",
        "Run a short snippet for quick analysis or plotting.",
        "code-execution",
        (_p("code", required=True),),
        "fixture",
    ),
    # plumbing
    ToolDescriptor(
        "read_fasta",
        "Parse a FASTA file into records.",
        "plumbing",
        (_p("fasta_file", "file-path", required=True),),
        "plumbing",
    ),
    ToolDescriptor(
        "read_skill",
        "Fetch a skill document by id.",
        "plumbing",
        (_p("skill_id", required=True),),
        "plumbing",
    ),
)

BUILTIN_SKILLS = (
    SkillDoc(
        "rdkit-skill",
        "Small-molecule handling with RDKit",
        "## When to use\nLigand preparation and descriptor math.\n"
        "## Steps\n1. Load SMILES. 2. Sanitize. 3. Compute descriptors.",
    ),
    SkillDoc(
        "brenda_database",
        "Enzyme kinetics lookups",
        "## When to use\nKinetic constants and reaction conditions per EC class.\n"
        "## Steps\n1. Resolve the EC number. 2. Query kinetics. 3. Record units.",
    ),
)


def build_builtin_registry(
    manifests_dir: Optional[Path] = None,
    checkpoint_resolver: Optional[Callable[[str], bool]] = None,
) -> Registry:
    reg = Registry(
        executor_keys=EXECUTOR_KEYS,
        manifests_dir=manifests_dir,
        checkpoint_resolver=checkpoint_resolver,
    )
    for tool in BUILTIN_TOOLS:
        if not reg.has_tool(tool.name):
            reg.register_tool(tool)
    for skill in BUILTIN_SKILLS:
        reg.register_skill(skill)
    return reg


# -- execution context and fixture store ------------------------------------------


class FixtureStore:
    """Scripted tool outputs: an ordered queue per tool name, each entry
    holding the returned artifact and optional files to materialize."""

    def __init__(self, entries: Mapping[str, list[dict]]):
        self._entries = {name: list(items) for name, items in entries.items()}
        self._cursors: dict[str, int] = {}

    @classmethod
    def from_dir(cls, path: str | Path) -> "FixtureStore":
        tools_file = Path(path) / "tools.json"
        if not tools_file.exists():
            return cls({})
        return cls(json.loads(tools_file.read_text()))

    def fresh(self) -> "FixtureStore":
        return FixtureStore(self._entries)

    def pop(self, tool_name: str) -> Optional[dict]:
        queue = self._entries.get(tool_name, [])
        turn = self._cursors.get(tool_name, 0)
        if turn >= len(queue):
            return None
        self._cursors[tool_name] = turn + 1
        return copy.deepcopy(queue[turn])


@dataclass
class ExecutionContext:
    workspace: Path
    data_dir: Path
    registry: Registry
    fixtures: Optional[FixtureStore] = None
    created_at: str = "1970-01-01T00:00:00Z"
    provenance: str = ""

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.workspace / p


def _materialize(ctx: ExecutionContext, writes: Mapping[str, str]) -> None:
    for rel, content in writes.items():
        path = ctx.resolve(rel)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content)


def _fail(message: str) -> dict:
    return {"success": False, "error": message}


def fixture_executor(tool: ToolDescriptor, args: dict, ctx: ExecutionContext) -> dict:
    entry = ctx.fixtures.pop(tool.name) if ctx.fixtures else None
    if entry is None:
        return _fail(f"no scripted output available for tool {tool.name!r}")
    _materialize(ctx, entry.get("writes", {}))
    return entry.get("output", {"success": True})


_SEQ_COLUMNS = ("aa_seq", "seq", "sequence")
_LABEL_COLUMNS = ("label", "target", "y")


def _detect_columns(header: list[str]) -> tuple[Optional[str], Optional[str]]:
    seq = next((c for c in _SEQ_COLUMNS if c in header), None)
    label = next((c for c in _LABEL_COLUMNS if c in header), None)
    return seq, label


def automl_config_executor(tool: ToolDescriptor, args: dict, ctx: ExecutionContext) -> dict:
    rel = args.get("csv_file") or args.get("dataset_path")
    if not rel:
        return _fail("csv_file or dataset_path is required")
    path = ctx.resolve(rel)
    if not path.exists():
        return _fail(f"File not found: {rel}")
    csv_text = path.read_text()
    header = csv_text.splitlines()[0].split(",") if csv_text else []
    seq_col, label_col = _detect_columns([h.strip() for h in header])
    if not seq_col or not label_col:
        return _fail(f"could not find sequence/label columns in header {header}")
    manifest = automl.DataManifest(
        train_csv=rel,
        valid_csv=args.get("valid_csv_file"),
        test_csv=args.get("test_csv_file"),
        sequence_column=seq_col,
        label_column=label_col,
    )
    try:
        manifest = automl.inspect_csv(csv_text, manifest)
        config = automl.generate_config(
            manifest,
            user_requirements=args.get("user_requirements"),
            output_name=args.get("output_name"),
        )
    except ProtlabError as exc:
        return _fail(str(exc))
    stem = args.get("output_name") or path.stem
    out_rel = f"outputs/configs/{stem}_config.json"
    out_path = ctx.resolve(out_rel)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(config.to_json())
    return {"success": True, "config_path": out_rel, "config": config.to_dict()}


def _stub_metric(seedtext: str, lo: float, hi: float) -> float:
    h = int(hashlib.sha256(seedtext.encode()).hexdigest()[:8], 16)
    return round(lo + (hi - lo) * (h / 0xFFFFFFFF), 4)


def training_executor(tool: ToolDescriptor, args: dict, ctx: ExecutionContext) -> dict:
    """Fixture outputs when scripted; otherwise a deterministic stand-in that
    writes a checkpoint marker and derives metrics from the config hash.
    Real fine-tuning happens outside this repo."""
    entry = ctx.fixtures.pop(tool.name) if ctx.fixtures else None
    if entry is not None:
        _materialize(ctx, entry.get("writes", {}))
        return entry.get("output", {"success": True})

    config_path = ctx.resolve(args["config_path"])
    if not config_path.exists():
        return _fail(f"File not found: {args['config_path']}")
    config = automl.config_from_json(config_path.read_text())
    model_name = config.output_model_name or "model.pt"
    model_rel = f"outputs/ckpt/{model_name}"
    ckpt = ctx.resolve(model_rel)
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    ckpt.write_text(f"checkpoint {config.plm_model} seed {config.seed}\n")
    key = config.canonical()
    if config.problem_type in automl.REGRESSION_KINDS:
        metrics = {
            "spearman": _stub_metric(key + "spearman", 0.55, 0.9),
            "mse": _stub_metric(key + "mse", 0.05, 0.4),
        }
    else:
        metrics = {
            "accuracy": _stub_metric(key + "accuracy", 0.8, 0.95),
            "mcc": _stub_metric(key + "mcc", 0.5, 0.85),
            "f1": _stub_metric(key + "f1", 0.78, 0.95),
            "auroc": _stub_metric(key + "auroc", 0.85, 0.98),
        }
    return {
        "success": True,
        "message": "training run completed",
        "model_path": model_rel,
        "metrics": metrics,
    }


def registry_ops_executor(tool: ToolDescriptor, args: dict, ctx: ExecutionContext) -> dict:
    config_path = ctx.resolve(args["config_path"])
    if not config_path.exists():
        return _fail(f"File not found: {args['config_path']}")
    config = automl.config_from_json(config_path.read_text())
    metrics = args.get("metrics") or {}
    try:
        manifest = automl.package_manifest(
            config,
            metrics,
            checkpoint_ref=args["model_path"],
            tool_name=args["tool_name"],
            description=args.get("description"),
            created_at=ctx.created_at,
            provenance=ctx.provenance,
        )
        receipt = ctx.registry.register_synthesized(manifest)
    except ProtlabError as exc:
        return _fail(str(exc))
    manifest_rel = None
    if receipt.manifest_path:
        try:
            manifest_rel = str(Path(receipt.manifest_path).relative_to(ctx.data_dir))
        except ValueError:
            manifest_rel = receipt.manifest_path
    return {
        "success": True,
        "tool_name": receipt.name,
        "registry_version": receipt.version,
        "manifest_path": manifest_rel,
    }


def _read_rel(ctx: ExecutionContext, rel: str) -> Optional[str]:
    path = ctx.resolve(rel)
    return path.read_text() if path.exists() else None


def evolve_executor(tool: ToolDescriptor, args: dict, ctx: ExecutionContext) -> dict:
    try:
        if tool.name == "fit_ridge_regression":
            text = _read_rel(ctx, args["observations_csv"])
            if text is None:
                return _fail(f"File not found: {args['observations_csv']}")
            model = evolve.fit_ridge(evolve.read_observations(text), lam=float(args["lambda"]))
            out_rel = args.get("model_out") or "outputs/ridge_model.json"
            out = ctx.resolve(out_rel)
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(model.to_json())
            return {
                "success": True,
                "model_path": out_rel,
                "metrics": {"r2_score_train": model.train_r2, "rmse_train": model.train_rmse},
                "n_features": len(model.feature_index),
            }
        if tool.name == "rank_mutation_combinations":
            text = _read_rel(ctx, args["model_file"])
            if text is None:
                return _fail(f"File not found: {args['model_file']}")
            model = evolve.RidgeModel.from_json(text)
            orders = tuple(int(o) for o in args["orders"])
            ranked = evolve.enumerate_top_combinations(model, orders, int(args["top_k"]))
            return {
                "success": True,
                "top_predicted_combinations": {
                    f"{order}_point_mutations": [
                        {"variant": r.variant, "predicted_score": r.score}
                        for r in ranked[order]
                    ]
                    for order in sorted(ranked)
                },
            }
        if tool.name == "screen_rank_tables":
            tables = []
            for rel in args["csv_files"]:
                text = _read_rel(ctx, rel)
                if text is None:
                    return _fail(f"File not found: {rel}")
                tables.append((Path(rel).stem, text))
            raw_col = str(args.get("sort_column", "-1"))
            column = int(raw_col) if raw_col.lstrip("-").isdigit() else raw_col
            summary = evolve.rank_screening_tables(tables, column, int(args["top_k"]))
            return {
                "success": True,
                "per_property": {
                    prop: [{"candidate": t["candidate"], "value": t["value"]} for t in tops]
                    for prop, tops in summary.per_property.items()
                },
                "merged": summary.merged,
                "warnings": summary.warnings,
            }
    except ProtlabError as exc:
        return _fail(str(exc))
    return _fail(f"evolve executor cannot serve tool {tool.name!r}")


def plumbing_executor(tool: ToolDescriptor, args: dict, ctx: ExecutionContext) -> dict:
    try:
        if tool.name == "read_fasta":
            text = _read_rel(ctx, args["fasta_file"])
            if text is None:
                return _fail(f"File not found: {args['fasta_file']}")
            records = evolve.parse_fasta(text)
            return {
                "success": True,
                "records": [
                    {"id": r.id, "description": r.description, "sequence": r.sequence}
                    for r in records
                ],
            }
        if tool.name == "read_skill":
            doc = ctx.registry.lookup_skill(args["skill_id"])
            return {"success": True, "skill_id": doc.skill_id, "title": doc.title, "body": doc.body}
    except ProtlabError as exc:
        return _fail(str(exc))
    return _fail(f"plumbing executor cannot serve tool {tool.name!r}")


def synthesized_model_executor(tool: ToolDescriptor, args: dict, ctx: ExecutionContext) -> dict:
    manifest = ctx.registry.manifest_for(tool.name)
    if manifest is None:
        return _fail(f"no manifest recorded for {tool.name!r}")
    if not ctx.resolve(manifest.checkpoint_ref).exists():
        return _fail(f"checkpoint missing: {manifest.checkpoint_ref}")
    entry = ctx.fixtures.pop(tool.name) if ctx.fixtures else None
    if entry is not None:
        _materialize(ctx, entry.get("writes", {}))
        return entry.get("output", {"success": True})
    return {
        "success": True,
        "tool": tool.name,
        "checkpoint_ref": manifest.checkpoint_ref,
        "metrics": dict(manifest.metrics),
        "note": "desk-scale stub; live inference runs outside this repo",
    }


def build_executor_table() -> dict[str, Callable[[ToolDescriptor, dict, ExecutionContext], dict]]:
    return {
        "fixture": fixture_executor,
        "automl-config": automl_config_executor,
        "training": training_executor,
        "registry-ops": registry_ops_executor,
        "evolve": evolve_executor,
        "plumbing": plumbing_executor,
        "synthesized-model": synthesized_model_executor,
    }
