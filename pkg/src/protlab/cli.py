"""Operator entry points: run sessions headless, call tools directly, fit and
rank mutation models, manage configs, score benchmarks, serve the gateway.

Exit codes: 0 success, 1 domain error, 2 usage error. `--json` switches every
subcommand to machine-readable output on stdout.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import automl, evolve
from .agents import ScriptedBackend
from .builtins import FixtureStore, build_builtin_registry
from .errors import ProtlabError
from .evalharness import (
    PAPER_SHAPE,
    aggregate_corpus,
    load_benchmark,
    run_tournament,
    score_curation,
    score_tournament,
)
from .orchestrator import Phase, Session, SessionConfig, audit_run_record


class Ctx:
    def __init__(self):
        self.data_dir = Path("protlab-data")
        self.as_json = False
        self.seed = 0
        self.backend = "scripted"
        self.fixtures: Path | None = None
        self.config_file: Path | None = None


pass_ctx = click.make_pass_decorator(Ctx, ensure=True)


def emit(ctx: Ctx, payload, human: str | None = None):
    if ctx.as_json:
        click.echo(json.dumps(payload, indent=2, sort_keys=True, default=str))
    else:
        click.echo(human if human is not None else json.dumps(payload, indent=2, default=str))


def fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
@click.option("--config", "config_file", type=click.Path(path_type=Path), help="JSON config file.")
@click.option("--data-dir", type=click.Path(path_type=Path), default="protlab-data", show_default=True)
@click.option("--backend", type=click.Choice(["scripted", "http"]), default="scripted", show_default=True)
@click.option("--fixtures", type=click.Path(path_type=Path), help="Fixture directory for scripted runs.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.pass_context
def main(click_ctx, config_file, data_dir, backend, fixtures, seed, as_json):
    """Research-workflow engine for protein discovery and directed evolution."""
    ctx = click_ctx.ensure_object(Ctx)
    ctx.data_dir = data_dir
    ctx.as_json = as_json
    ctx.seed = seed
    ctx.backend = backend
    ctx.fixtures = fixtures
    ctx.config_file = config_file
    if config_file and config_file.exists():
        overrides = json.loads(config_file.read_text())
        ctx.data_dir = Path(overrides.get("data_dir", ctx.data_dir))
        ctx.seed = overrides.get("seed", ctx.seed)


@main.command("run")
@click.argument("objective", required=False)
@click.option("--strict-citations", is_flag=True)
@pass_ctx
def run_cmd(ctx: Ctx, objective, strict_citations):
    """Run one session to completion against the configured backend."""
    if ctx.backend == "scripted":
        if not ctx.fixtures:
            raise click.UsageError("--backend scripted requires --fixtures")
        meta = json.loads((ctx.fixtures / "session.json").read_text())
        objective = objective or meta.get("objective")
        config = SessionConfig(
            data_dir=ctx.data_dir,
            backend=ScriptedBackend.from_dir(ctx.fixtures),
            fixtures=FixtureStore.from_dir(ctx.fixtures),
            seed=ctx.seed,
            uploads=meta.get("uploads", {}),
            context_note=meta.get("context_note", ""),
            strict_citations=strict_citations,
        )
    else:
        raise click.UsageError(
            "http backend sessions need endpoint configuration; use `serve` "
            "or a scripted run"
        )
    if not objective:
        raise click.UsageError("no objective given and none in the fixture session.json")
    try:
        session = Session(objective, config)
        state = session.start()
    except ProtlabError as exc:
        fail(str(exc))
    record_path = str(session.recorder.path)
    checks = audit_run_record(session.recorder.snapshot())
    payload = {
        "session_id": state.session_id,
        "phase": state.phase.value,
        "record": record_path,
        "steps": [
            {"step": o.step, "success": o.success, "goal_met": o.goal_met}
            for o in state.history.entries
        ],
        "audit": checks,
        "report_excerpt": (state.report.text.splitlines()[:3] if state.report else []),
    }
    lines = [
        f"session {state.session_id}: {state.phase.value}",
        f"record: {record_path}",
        f"audit ok: {checks['ok']}",
    ]
    if state.phase is Phase.FAILED:
        lines.append(f"failure: {state.failure_reason}")
    emit(ctx, payload, "\n".join(lines))
    if state.phase is Phase.FAILED:
        sys.exit(1)


@main.group()
def tools():
    """Inspect or invoke registry tools."""


def _registry(ctx: Ctx):
    return build_builtin_registry(manifests_dir=ctx.data_dir / "manifests")


@tools.command("list")
@pass_ctx
def tools_list(ctx: Ctx):
    registry = _registry(ctx)
    items = [t.to_dict() for t in registry.tools()]
    human = "\n".join(f"{t['name']:45s} {t['category']}" for t in items)
    emit(ctx, items, human)


@tools.command("show")
@click.argument("name")
@pass_ctx
def tools_show(ctx: Ctx, name):
    registry = _registry(ctx)
    try:
        desc = registry.lookup(name)
    except ProtlabError as exc:
        fail(str(exc))
    payload = desc.to_dict()
    manifest = registry.manifest_for(name)
    if manifest:
        payload["manifest"] = manifest.to_dict()
    emit(ctx, payload)


@tools.command("call")
@click.argument("name")
@click.option("--args", "args_json", default="{}", help="JSON argument map.")
@click.option("--workspace", type=click.Path(path_type=Path), default=None)
@pass_ctx
def tools_call(ctx: Ctx, name, args_json, workspace):
    """Validate arguments and invoke one tool directly (fixture-backed tools
    need --fixtures)."""
    from .builtins import ExecutionContext, build_executor_table

    registry = _registry(ctx)
    fixtures = FixtureStore.from_dir(ctx.fixtures) if ctx.fixtures else None
    ws = workspace or (ctx.data_dir / "adhoc")
    ws.mkdir(parents=True, exist_ok=True)
    context = ExecutionContext(
        workspace=ws, data_dir=ctx.data_dir, registry=registry, fixtures=fixtures
    )
    try:
        desc = registry.lookup(name)
        args = registry.validate_invocation(name, json.loads(args_json))
        artifact = build_executor_table()[desc.executor](desc, args, context)
    except ProtlabError as exc:
        fail(str(exc))
    emit(ctx, artifact)
    if artifact.get("success", True) is False:
        sys.exit(1)


# Click name "evolve"; the function name avoids shadowing the module import.
@main.group(name="evolve")
def evolve_cmd():
    """Directed-evolution numerics."""


@evolve_cmd.command("fit")
@click.argument("observations", type=click.Path(exists=True, path_type=Path))
@click.option("--lam", "--lambda", "lam", type=float, default=1.0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=Path("ridge_model.json"), show_default=True)
@pass_ctx
def evolve_fit(ctx: Ctx, observations, lam, out):
    """Fit the additive one-hot ridge model from a variant,score CSV."""
    try:
        obs = evolve.read_observations(observations.read_text())
        model = evolve.fit_ridge(obs, lam=lam)
    except ProtlabError as exc:
        fail(str(exc))
    out.write_text(model.to_json())
    payload = {
        "model": str(out),
        "n_observations": len(obs),
        "n_features": len(model.feature_index),
        "train_r2": model.train_r2,
        "train_rmse": model.train_rmse,
        "intercept": model.intercept,
    }
    emit(ctx, payload, f"wrote {out} (r2 {model.train_r2:.4f}, rmse {model.train_rmse:.4f})")


@evolve_cmd.command("combos")
@click.argument("model_file", type=click.Path(exists=True, path_type=Path))
@click.option("--order", "orders", type=int, multiple=True, default=(2, 3, 4), show_default=True)
@click.option("--top", "top_k", type=int, default=5, show_default=True)
@pass_ctx
def evolve_combos(ctx: Ctx, model_file, orders, top_k):
    """Rank multi-site combinations under a fitted model."""
    try:
        model = evolve.RidgeModel.from_json(model_file.read_text())
        ranked = evolve.enumerate_top_combinations(model, orders, top_k)
    except ProtlabError as exc:
        fail(str(exc))
    payload = {
        str(order): [{"variant": r.variant, "predicted_score": r.score} for r in rows]
        for order, rows in ranked.items()
    }
    lines = []
    for order, rows in ranked.items():
        lines.append(f"order {order}:")
        lines.extend(f"  {r.variant:30s} {r.score: .6f}" for r in rows)
    emit(ctx, payload, "\n".join(lines))


@main.group()
def screen():
    """Screening-table operations."""


@screen.command("rank")
@click.argument("csv_files", nargs=-1, required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--column", "sort_column", default="-1", show_default=True,
              help="Sort column name or index.")
@click.option("--top-k", type=int, default=3, show_default=True)
@pass_ctx
def screen_rank(ctx: Ctx, csv_files, sort_column, top_k):
    """Sort screening CSVs, extract the top rows, and merge by candidate."""
    column = int(sort_column) if sort_column.lstrip("-").isdigit() else sort_column
    tables = [(p.stem, p.read_text()) for p in csv_files]
    try:
        summary = evolve.rank_screening_tables(tables, column, top_k)
    except ProtlabError as exc:
        fail(str(exc))
    payload = {
        "per_property": {
            prop: [{"candidate": t["candidate"], "value": t["value"]} for t in tops]
            for prop, tops in summary.per_property.items()
        },
        "merged": summary.merged,
        "warnings": summary.warnings,
    }
    lines = []
    for prop, tops in summary.per_property.items():
        lines.append(f"{prop}:")
        lines.extend(f"  {t['candidate']:20s} {t['value']}" for t in tops)
    emit(ctx, payload, "\n".join(lines))


@main.group(name="automl")
def automl_group():
    """Training-configuration operations."""


@automl_group.command("gen-config")
@click.argument("csv_file", type=click.Path(exists=True, path_type=Path))
@click.option("--requirements", default=None)
@click.option("--task", default="auto", show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@pass_ctx
def automl_gen(ctx: Ctx, csv_file, requirements, task, out):
    header = csv_file.read_text().splitlines()[0].split(",")
    seq_col = next((c for c in ("aa_seq", "seq", "sequence") if c in header), None)
    label_col = next((c for c in ("label", "target", "y") if c in header), None)
    if not seq_col or not label_col:
        fail(f"could not find sequence/label columns in {header}")
    manifest = automl.DataManifest(
        train_csv=str(csv_file), sequence_column=seq_col, label_column=label_col
    )
    try:
        manifest = automl.inspect_csv(csv_file.read_text(), manifest)
        config = automl.generate_config(manifest, task=task, user_requirements=requirements,
                                        output_name=csv_file.stem)
    except ProtlabError as exc:
        fail(str(exc))
    text = config.to_json()
    if out:
        out.write_text(text)
        emit(ctx, {"config_path": str(out)}, f"wrote {out}")
    else:
        click.echo(text)


@automl_group.command("validate")
@click.argument("config_file", type=click.Path(exists=True, path_type=Path))
@pass_ctx
def automl_validate(ctx: Ctx, config_file):
    config = automl.config_from_json(config_file.read_text())
    diags = automl.validate_config(config)
    emit(ctx, {"diagnostics": diags}, "ok" if not diags else "\n".join(diags))
    if diags:
        sys.exit(1)


@automl_group.command("search")
@click.argument("csv_file", type=click.Path(exists=True, path_type=Path))
@click.option("--budget", type=int, default=6, show_default=True)
@click.option("--plm", "plms", multiple=True, default=("ESM2-8M", "ESM2-150M"), show_default=True)
@pass_ctx
def automl_search(ctx: Ctx, csv_file, budget, plms):
    """Budgeted config search against the desk-scale training stand-in."""
    from .builtins import ExecutionContext, build_executor_table, build_builtin_registry

    header = csv_file.read_text().splitlines()[0].split(",")
    seq_col = next((c for c in ("aa_seq", "seq", "sequence") if c in header), "seq")
    label_col = next((c for c in ("label", "target", "y") if c in header), "label")
    manifest = automl.inspect_csv(
        csv_file.read_text(),
        automl.DataManifest(train_csv=str(csv_file), sequence_column=seq_col, label_column=label_col),
    )
    base = automl.generate_config(manifest, output_name=csv_file.stem)
    space = automl.SearchSpace(
        base=base,
        plm_models=tuple(plms),
        training_methods=("freeze", "plm-lora", "ses-adapter"),
        learning_rates=(1e-3, 5e-4, 1e-4),
        pooling_methods=("mean", "light_attention"),
    )
    registry = build_builtin_registry()
    ws = ctx.data_dir / "search"
    ws.mkdir(parents=True, exist_ok=True)
    context = ExecutionContext(workspace=ws, data_dir=ctx.data_dir, registry=registry)
    table = build_executor_table()
    train_tool = registry.lookup("train_protein_model")
    history: list[automl.TrialRecord] = []
    while True:
        config = automl.propose_next_config(history, space, budget)
        if config is None:
            break
        config_path = ws / f"trial_{len(history)}.json"
        config_path.write_text(config.to_json())
        artifact = table["training"](train_tool, {"config_path": f"trial_{len(history)}.json"}, context)
        metric = config.monitor if config.monitor != "loss" else "accuracy"
        value = artifact.get("metrics", {}).get(metric, 0.0)
        history.append(automl.TrialRecord(config, metric, value))
    best = max(history, key=lambda t: t.metric_value)
    payload = {
        "trials": [
            {
                "plm_model": t.config.plm_model,
                "training_method": t.config.training_method,
                "learning_rate": t.config.learning_rate,
                "pooling_method": t.config.pooling_method,
                "metric": t.metric_name,
                "value": t.metric_value,
            }
            for t in history
        ],
        "best": {"plm_model": best.config.plm_model, "value": best.metric_value},
    }
    emit(ctx, payload, f"ran {len(history)} trials; best {best.config.plm_model} "
                       f"{best.metric_name}={best.metric_value}")


@main.group(name="eval")
def eval_group():
    """Benchmark loading, judging, and scoring."""


@eval_group.command("run")
@click.argument("benchmark", type=click.Path(exists=True, path_type=Path))
@click.option("--responses", type=click.Path(exists=True, path_type=Path), required=True,
              help="JSON: {model: {instance_id: response}}")
@click.option("--judging-fixtures", type=click.Path(exists=True, path_type=Path), required=True,
              help="agents.json with analyst/judge turn lists.")
@click.option("--csv", "csv_out", type=click.Path(path_type=Path), default=None,
              help="Also write per-instance scores as CSV.")
@pass_ctx
def eval_run(ctx: Ctx, benchmark, responses, judging_fixtures, csv_out):
    """Exhaustive pairwise tournaments per instance with scripted judging."""
    instances, _ = load_benchmark(benchmark)
    by_model = json.loads(responses.read_text())
    backend = ScriptedBackend.from_dir(judging_fixtures.parent if judging_fixtures.name == "agents.json" else judging_fixtures)
    results = []
    tiers = {}
    for inst in instances:
        table = {m: r[inst.id] for m, r in by_model.items() if inst.id in r}
        if len(table) < 2:
            continue
        wins = run_tournament(inst, table, backend, backend, seed=ctx.seed)
        results.append(score_tournament(wins, instance_id=inst.id))
        tiers[inst.id] = inst.tier
    if csv_out and results:
        csv_out.write_text(_results_csv(results))
    table = aggregate_corpus(results, tiers) if results else {}
    payload = {
        "instances_judged": len(results),
        "per_tier_mean": table,
    }
    emit(ctx, payload)


def _results_csv(results) -> str:
    models = sorted(results[0].scores) if results else []
    lines = ["instance_id," + ",".join(models)]
    for r in results:
        lines.append(r.instance_id + "," + ",".join(f"{r.scores[m]:.6f}" for m in models))
    return "\n".join(lines) + "\n"


@eval_group.command("score")
@click.argument("wins_file", type=click.Path(exists=True, path_type=Path))
@click.option("--csv", "csv_out", type=click.Path(path_type=Path), default=None,
              help="Also write per-instance scores as CSV.")
@pass_ctx
def eval_score(ctx: Ctx, wins_file, csv_out):
    """Score win tables: JSON [{instance_id, wins, tier?}]."""
    rows = json.loads(wins_file.read_text())
    results, tiers = [], {}
    try:
        for row in rows:
            results.append(score_tournament(row["wins"], instance_id=row.get("instance_id", "")))
            if "tier" in row:
                tiers[row.get("instance_id", "")] = row["tier"]
    except ProtlabError as exc:
        fail(str(exc))
    if csv_out and results:
        csv_out.write_text(_results_csv(results))
    payload = {
        "results": [
            {"instance_id": r.instance_id, "scores": r.scores, "ranks": r.ranks} for r in results
        ],
    }
    if tiers:
        payload["per_tier_mean"] = aggregate_corpus(results, tiers)
    emit(ctx, payload)


@eval_group.command("curate")
@click.argument("scores_file", type=click.Path(exists=True, path_type=Path))
@click.option("--top", type=int, default=None)
@pass_ctx
def eval_curate(ctx: Ctx, scores_file, top):
    """Total committee scores: JSON [{question_id, committee: {agent: score}}]."""
    from .evalharness import select_top_questions

    rows = json.loads(scores_file.read_text())
    try:
        scored = [score_curation(r["committee"], question_id=r.get("question_id", "")) for r in rows]
    except ProtlabError as exc:
        fail(str(exc))
    if top:
        scored = select_top_questions(scored, top)
    payload = [
        {"question_id": s.question_id, "total": s.total, "committee": s.committee_scores}
        for s in scored
    ]
    emit(ctx, payload, "\n".join(f"{s.question_id:10s} {s.total:.2f}" for s in scored))


@main.command("serve")
@click.option("--port", type=int, default=8321, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@pass_ctx
def serve(ctx: Ctx, port, host):
    """Serve the HTTP gateway (and the console UI if built)."""
    import uvicorn

    from .gateway import SessionManager, create_app

    manager = SessionManager(ctx.data_dir, fixtures_dir=ctx.fixtures, seed=ctx.seed)
    app = create_app(manager)
    frontend = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if frontend.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend, html=True), name="ui")
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
