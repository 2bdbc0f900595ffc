"""Command-line interface: serve the API plus file-driven utilities."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .agreement import ContingencyTable, build_contingency, cohen_kappa, format_report
from .bank import import_bank
from .errors import McqForgeError
from .items import load_items, render_mcq, save_items
from .pipeline import GateDecision, GenerationInput, Pipeline
from .providers import demo_hub, hub_from_config
from .quality import lint_deterministic
from .similarity import (
    TverskyParams,
    contextual_features,
    item_linguistic_features,
    matrix_errata,
    pairwise_matrix,
)


def _make_hub(config_path, mock, transcript_path=None):
    if config_path:
        config = json.loads(Path(config_path).read_text(encoding="utf-8"))
        return hub_from_config(config, force_mock=mock, transcript_path=transcript_path,
                               base_dir=str(Path(config_path).parent))
    return demo_hub(transcript_path)


@click.group()
def main():
    """Human-in-the-loop MCQ generation, linting, and banking."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Provider configuration JSON (defaults to bundled mock fixtures).")
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--mock", is_flag=True, help="Force mock backends regardless of config.")
@click.option("--data-dir", type=click.Path(), default=None,
              help="Directory for bank files and transcript logs.")
@click.option("--token", envvar="MCQFORGE_TOKEN", default=None,
              help="Static bearer token (or MCQFORGE_TOKEN env var).")
def serve(config_path, port, host, mock, data_dir, token):
    """Run the HTTP review service."""
    import uvicorn

    from .service import create_app

    transcript = None
    if data_dir:
        Path(data_dir).mkdir(parents=True, exist_ok=True)
        transcript = str(Path(data_dir) / "transcript.jsonl")
    hub = _make_hub(config_path, mock, transcript)
    app = create_app(hub, data_dir=data_dir, token=token)
    uvicorn.run(app, host=host, port=port)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--mock", is_flag=True)
@click.option("--mode", type=click.Choice(["prototype", "one_step"]), default="prototype",
              show_default=True)
@click.option("--kind", type=click.Choice(["learning_objective", "textbook_fragment"]),
              default="learning_objective", show_default=True)
@click.option("--body", required=True, help="Learning objective text or fragment path.")
@click.option("--topic", default="", help="Topic label for provenance.")
@click.option("--discipline", required=True)
@click.option("--level", "education_level", required=True)
@click.option("--speciality", default="")
@click.option("--count", default=1, show_default=True)
@click.option("--select-concept", default=None,
              help="Scripted G1 selection (prototype mode).")
@click.option("--select-question", default=None, type=int,
              help="Scripted G2 selection (prototype mode).")
@click.option("--approve-all", is_flag=True, help="Approve every G3 candidate.")
@click.option("--out", type=click.Path(), default=None, help="Write accepted items (JSONL).")
def generate(config_path, mock, mode, kind, body, topic, discipline, education_level,
             speciality, count, select_concept, select_question, approve_all, out):
    """Run a generation session (scripted gates for non-interactive use)."""
    body_text = body
    if kind == "textbook_fragment" and Path(body).exists():
        body_text = Path(body).read_text(encoding="utf-8")
    gen_input = GenerationInput(
        kind=kind, body=body_text, topic=topic, discipline=discipline,
        education_level=education_level, speciality=speciality, requested_items=count,
    )
    pipeline = Pipeline(_make_hub(config_path, mock))
    if mode == "one_step":
        session = pipeline.run_one_step(gen_input)
    else:
        session = pipeline.start_prototype_session(gen_input)
        click.echo(f"session {session.id} at {session.stage}")
        click.echo(session.artifacts["concept_map"].text)
        if select_concept is None:
            click.echo("re-run with --select-concept to continue", err=True)
            return
        pipeline.submit_gate_decision(session.id, GateDecision(
            gate="G1_concept_map", action="select", selection=select_concept))
        for candidate in session.qa_candidates:
            click.echo(f"Question {candidate.number}: {candidate.question}")
            click.echo(f"  Answer: {candidate.answer}")
        if select_question is None:
            click.echo("re-run with --select-question to continue", err=True)
            return
        pipeline.submit_gate_decision(session.id, GateDecision(
            gate="G2_question_answer", action="select", selection=select_question))
        if approve_all:
            for item_id in list(session.open_item_ids()):
                pipeline.submit_gate_decision(session.id, GateDecision(
                    gate="G3_item", action="approve", item_id=item_id))
    click.echo(f"session {session.id} finished at {session.stage}: "
               f"{len(session.items)} items, {len(session.parse_reports)} parse failures")
    for item in session.items.values():
        click.echo("")
        click.echo(render_mcq(item))
    if out:
        save_items(session.items.values(), out)
        click.echo(f"wrote {len(session.items)} items to {out}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--mock", is_flag=True)
@click.option("--prototype", "prototype_path", type=click.Path(exists=True), required=True,
              help="JSONL file whose first item is the accepted prototype.")
@click.option("--mode", type=click.Choice(["example_based", "concept_derived"]),
              default="example_based", show_default=True)
@click.option("--count", default=5, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def series(config_path, mock, prototype_path, mode, count, out):
    """Expand an accepted prototype into a candidate series."""
    prototype = load_items(prototype_path)[0]
    pipeline = Pipeline(_make_hub(config_path, mock))
    session = pipeline.start_series_session(prototype, mode, count=count)
    click.echo(f"session {session.id} at {session.stage}: {len(session.items)} candidates")
    for item in session.items.values():
        click.echo("")
        click.echo(render_mcq(item))
    if out:
        save_items(session.items.values(), out)


@main.command()
@click.argument("items_file", type=click.Path(exists=True))
def lint(items_file):
    """Deterministic checks per item; prints compact result coding."""
    failures = 0
    for item in load_items(items_file):
        verdicts = lint_deterministic(item)
        failed = sorted({v.criterion for v in verdicts if not v.passed})
        coding = "acceptable" if not failed else ",".join(map(str, failed))
        click.echo(f"{item.id}\t{coding}")
        for v in verdicts:
            if not v.passed:
                click.echo(f"  criterion {v.criterion}: {'; '.join(v.evidence)}")
                failures += 1
    sys.exit(1 if failures else 0)


@main.command()
@click.option("--kind", type=click.Choice(["contextual", "linguistic"]), required=True)
@click.option("--features", "features_path", type=click.Path(exists=True), default=None,
              help="JSON {id: [feature, ...]} for contextual scoring.")
@click.option("--items", "items_path", type=click.Path(exists=True), default=None,
              help="JSONL items for linguistic scoring.")
@click.option("--theta", default=1.0, show_default=True)
@click.option("--alpha", default=0.5, show_default=True)
@click.option("--beta", default=0.5, show_default=True)
@click.option("--reference", "reference_path", type=click.Path(exists=True), default=None,
              help="Reference grid CSV; mismatching cells are reported as errata.")
@click.option("--out", type=click.Path(), default=None, help="Write full-precision CSV here.")
def similarity(kind, features_path, items_path, theta, alpha, beta, reference_path, out):
    """Pairwise feature-model similarity matrix."""
    params = TverskyParams(theta=theta, alpha=alpha, beta=beta)
    if kind == "contextual":
        if not features_path:
            raise click.UsageError("--features is required for contextual scoring")
        raw = json.loads(Path(features_path).read_text(encoding="utf-8"))
        feature_map = raw.get("features", raw)
        sets = [contextual_features(item_id, feats) for item_id, feats in feature_map.items()]
    else:
        if not items_path:
            raise click.UsageError("--items is required for linguistic scoring")
        sets = [item_linguistic_features(i) for i in load_items(items_path)]
    matrix = pairwise_matrix(sets, kind=kind, params=params)
    click.echo(matrix.to_csv(precision=1), nl=False)
    summary = matrix.summary()
    click.echo(f"# off-diagonal mean {summary.mean:.2f} +/- {summary.sd:.2f} "
               f"(range {summary.minimum} to {summary.maximum})")
    if reference_path:
        import csv as _csv

        rows = list(_csv.reader(Path(reference_path).read_text(encoding="utf-8").splitlines()))
        reference = [[float(v) for v in row[1:]] for row in rows[1:]]
        errata = matrix_errata(matrix, reference)
        if errata:
            click.echo(f"# {len(errata)} cells disagree with the reference grid:")
            for e in errata:
                click.echo(f"#   ({e.row_id},{e.col_id}) computed {e.computed} "
                           f"reference {e.reference}")
        else:
            click.echo("# reference grid matches computed values")
    if out:
        Path(out).write_text(matrix.to_csv(precision=None), encoding="utf-8")


@main.command()
@click.option("--counts", default=None, help="a,b,c,d joint counts.")
@click.option("--decisions", "decisions_path", type=click.Path(exists=True), default=None,
              help="JSON {human: {id: bool}, machine: {id: bool}}.")
def kappa(counts, decisions_path):
    """Chance-corrected agreement between two binary raters."""
    if counts:
        a, b, c, d = (int(x) for x in counts.split(","))
        table = ContingencyTable(a, b, c, d)
    elif decisions_path:
        raw = json.loads(Path(decisions_path).read_text(encoding="utf-8"))
        table = build_contingency(raw["human"], raw["machine"])
    else:
        raise click.UsageError("provide --counts or --decisions")
    click.echo(format_report(table, cohen_kappa(table)))


@main.group()
def bank():
    """Item bank operations."""


@bank.command("compile")
@click.option("--bank", "bank_path", type=click.Path(exists=True), required=True)
@click.option("--n", required=True, type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--allow-reuse", is_flag=True)
@click.option("--out", type=click.Path(), required=True)
def bank_compile(bank_path, n, seed, allow_reuse, out):
    """Compile n non-overlapping exam variants from a bank file."""
    loaded = import_bank(bank_path)
    variants = loaded.compile_variants(n=n, seed=seed, allow_reuse=allow_reuse)
    written = loaded.export_variant_sheets(variants, out)
    for path in written:
        click.echo(str(path))


@bank.command("show")
@click.option("--bank", "bank_path", type=click.Path(exists=True), required=True)
def bank_show(bank_path):
    """Print a bank's slot structure."""
    loaded = import_bank(bank_path)
    click.echo(f"bank {loaded.id} ({loaded.discipline})")
    for slot in loaded.slots:
        click.echo(f"  {slot.concept}: prototype {slot.prototype_id}, "
                   f"series of {len(slot.series_ids)}")


def run():
    try:
        main(standalone_mode=True)
    except McqForgeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    run()
