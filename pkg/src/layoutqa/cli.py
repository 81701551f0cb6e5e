"""Command-line interface.

Subcommands cover the pipeline stages individually (``layout``, ``prompt``,
``infer``, ``eval``, ``datagen``) and composed (``run``). Exit codes: 0 on
success, 1 on hard errors, 2 on usage errors, 3 when a ``--min-anls`` gate
fails.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from . import datagen as dg
from .client import BackendSpec, complete_batch
from .errors import LayoutQAError
from .evaluate import Prediction, anls_dataset
from .layout import LayoutConfig, render_layout
from .ocr import load_qa, parse_ocr
from .prompts import FilledPrompt, PromptVariant, TaskKind, fill_template, plain_join
from .runner import RunManifest, run as run_manifest

EXIT_GATE_FAILED = 3


def _layout_options(fn):
    fn = click.option("--min-gap-spaces", default=1, show_default=True,
                      help="Minimum spaces between adjacent segments.")(fn)
    fn = click.option("--overlap-threshold", default=0.5, show_default=True,
                      help="Vertical overlap fraction required to share a row.")(fn)
    fn = click.option("--indent/--no-indent", default=True, show_default=True,
                      help="Prefix lines with the left-margin gap as spaces.")(fn)
    fn = click.option("--max-chars", type=int, default=None,
                      help="Drop trailing lines to fit this character budget.")(fn)
    return fn


def _ocr_input_options(fn):
    fn = click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False),
                      default=None, help="OCR JSON file (default: stdin).")(fn)
    fn = click.option("--format", "ocr_format", type=click.Choice(["canonical", "azure_read"]),
                      default="canonical", show_default=True)(fn)
    fn = click.option("--granularity", type=click.Choice(["line", "word"]), default="line",
                      show_default=True, help="Segment granularity.")(fn)
    return fn


def _backend_options(fn):
    fn = click.option("--backend", "backend_kind",
                      type=click.Choice(["http_chat", "mock_echo", "mock_fixture"]),
                      default="mock_echo", show_default=True)(fn)
    fn = click.option("--endpoint", default=None, help="Chat-completion endpoint URL.")(fn)
    fn = click.option("--model", "model_name", default=None, help="Model name sent upstream.")(fn)
    fn = click.option("--fixtures", "fixtures_path", type=click.Path(exists=True, dir_okay=False),
                      default=None, help="JSON map question_id -> answer for mock_fixture.")(fn)
    fn = click.option("--cache-dir", default=None, help="Directory for the response cache.")(fn)
    fn = click.option("--api-key-env", default="LAYOUTQA_API_KEY", show_default=True,
                      help="Env var holding the API credential.")(fn)
    fn = click.option("--temperature", default=0.0, show_default=True)(fn)
    fn = click.option("--max-output-tokens", default=256, show_default=True)(fn)
    fn = click.option("--max-attempts", default=4, show_default=True)(fn)
    fn = click.option("--parallelism", default=4, show_default=True)(fn)
    return fn


def _build_layout_config(min_gap_spaces, overlap_threshold, indent, max_chars) -> LayoutConfig:
    return LayoutConfig(
        min_gap_spaces=min_gap_spaces,
        leading_indent=indent,
        row_overlap_threshold=overlap_threshold,
        max_chars=max_chars,
    )


def _build_backend(backend_kind, endpoint, model_name, fixtures_path, cache_dir,
                   api_key_env, temperature, max_output_tokens, max_attempts,
                   parallelism) -> BackendSpec:
    fixtures = None
    if fixtures_path:
        fixtures = json.loads(Path(fixtures_path).read_text(encoding="utf-8"))
    return BackendSpec(
        kind=backend_kind,
        endpoint=endpoint,
        model_name=model_name,
        fixtures=fixtures,
        cache_dir=cache_dir,
        api_key_env=api_key_env,
        temperature=temperature,
        max_output_tokens=max_output_tokens,
        max_attempts=max_attempts,
        parallelism=parallelism,
    )


def _read_ocr(input_path, ocr_format, granularity):
    raw = Path(input_path).read_bytes() if input_path else sys.stdin.buffer.read()
    return parse_ocr(raw, ocr_format, granularity=granularity)


@click.group()
def main():
    """Rebuild document layout as text, prompt LLMs, and score with ANLS."""


@main.command("layout")
@_ocr_input_options
@_layout_options
def layout_cmd(input_path, ocr_format, granularity, min_gap_spaces, overlap_threshold,
               indent, max_chars):
    """Render OCR JSON as layout-preserving plain text."""
    try:
        page = _read_ocr(input_path, ocr_format, granularity)
        cfg = _build_layout_config(min_gap_spaces, overlap_threshold, indent, max_chars)
        click.echo(render_layout(page, cfg).text)
    except LayoutQAError as exc:
        raise click.ClickException(str(exc))


@main.command("prompt")
@_ocr_input_options
@_layout_options
@click.option("--task", type=click.Choice([t.value for t in TaskKind]), required=True)
@click.option("--question", required=True)
@click.option("--question-id", default="")
@click.option("--no-layout", is_flag=True, help="Use space-joined text instead of layout.")
@click.option("--no-task", is_flag=True, help="Use the minimal baseline skeleton.")
def prompt_cmd(input_path, ocr_format, granularity, min_gap_spaces, overlap_threshold,
               indent, max_chars, task, question, question_id, no_layout, no_task):
    """Build the filled prompt for one page and question."""
    try:
        page = _read_ocr(input_path, ocr_format, granularity)
        cfg = _build_layout_config(min_gap_spaces, overlap_threshold, indent, max_chars)
        variant = PromptVariant(layout_on=not no_layout, task_on=not no_task)
        doc = render_layout(page, cfg).text if variant.layout_on else plain_join(page)
        filled = fill_template(TaskKind(task), variant, doc, question, question_id=question_id)
        click.echo(filled.text)
    except LayoutQAError as exc:
        raise click.ClickException(str(exc))


@main.command("infer")
@click.option("--prompts", "prompts_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="JSONL with {question_id, prompt} rows.")
@click.option("--output", "output_path", type=click.Path(dir_okay=False), default=None,
              help="Completions JSONL (default: stdout).")
@_backend_options
def infer_cmd(prompts_path, output_path, **backend_opts):
    """Send prompts to a backend and record the completions."""
    prompts = []
    for line in Path(prompts_path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        prompts.append(FilledPrompt(text=row["prompt"], question_id=row.get("question_id", "")))
    backend = _build_backend(**backend_opts)
    items = complete_batch(backend, prompts)
    out = open(output_path, "w", encoding="utf-8") if output_path else sys.stdout
    try:
        for prompt, item in zip(prompts, items):
            row = {"question_id": prompt.question_id}
            if item.ok:
                row.update(completion=item.completion.text,
                           latency_ms=item.completion.latency_ms,
                           attempts=item.completion.attempt_count)
            else:
                row["error"] = item.error
            out.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
    finally:
        if output_path:
            out.close()


@main.command("eval")
@click.option("--predictions", "predictions_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="JSONL with {question_id, answer, confidence?} rows.")
@click.option("--qa", "qa_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="QA records (JSON array or JSONL).")
@click.option("--tau", default=0.5, show_default=True, help="Similarity threshold.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None,
              help="Write the report JSON here (default: stdout).")
@click.option("--per-question-csv", type=click.Path(dir_okay=False), default=None)
@click.option("--min-anls", type=float, default=None,
              help="Exit with status 3 when the mean falls below this gate.")
def eval_cmd(predictions_path, qa_path, tau, report_path, per_question_csv, min_anls):
    """Score predictions against gold answers."""
    try:
        records = load_qa(Path(qa_path).read_bytes())
        preds = []
        for line in Path(predictions_path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            row = json.loads(line)
            preds.append(Prediction(row["question_id"], row.get("answer", ""),
                                    row.get("confidence")))
        report = anls_dataset(preds, records, tau)
    except LayoutQAError as exc:
        raise click.ClickException(str(exc))
    payload = json.dumps(
        {"mean": report.mean, "count": report.count, "per_question": report.per_question},
        indent=2, sort_keys=True,
    )
    if report_path:
        Path(report_path).write_text(payload + "\n", encoding="utf-8")
        click.echo(f"mean ANLS {report.mean:.4f} over {report.count} questions")
    else:
        click.echo(payload)
    if per_question_csv:
        with open(per_question_csv, "w", newline="", encoding="utf-8") as fp:
            writer = csv.writer(fp)
            writer.writerow(["question_id", "anls"])
            for qid, score in report.per_question.items():
                writer.writerow([qid, f"{score:.6f}"])
    if min_anls is not None and report.mean < min_anls:
        click.echo(f"gate failed: mean {report.mean:.4f} < {min_anls}", err=True)
        sys.exit(EXIT_GATE_FAILED)


@main.command("datagen")
@click.option("--tables-dir", type=click.Path(exists=True, file_okay=False), required=True,
              help="Directory of CSV tables.")
@click.option("--n", default=100, show_default=True, help="Examples to request.")
@click.option("--seed", default=0, show_default=True)
@click.option("--output", "output_path", type=click.Path(dir_okay=False), required=True,
              help="Tuning JSONL path; stats go to <output>.stats.json.")
@_backend_options
def datagen_cmd(tables_dir, n, seed, output_path, **backend_opts):
    """Generate instruction-tuning examples from CSV tables."""
    try:
        tables = dg.load_tables_dir(tables_dir)
        backend = _build_backend(**backend_opts)
        examples, stats = dg.generate_dataset(tables, n, backend, seed)
    except LayoutQAError as exc:
        raise click.ClickException(str(exc))
    with open(output_path, "w", encoding="utf-8") as fp:
        dg.write_examples(examples, fp)
    stats_path = Path(output_path).with_suffix(Path(output_path).suffix + ".stats.json")
    stats_path.write_text(json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
    click.echo(f"wrote {stats.emitted} examples to {output_path} "
               f"({stats.parse_failures} parse failures, "
               f"{stats.backend_failures} backend failures)")


@main.command("run")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Run manifest JSON.")
@click.option("--min-anls", type=float, default=None,
              help="Exit with status 3 when the mean falls below this gate.")
def run_cmd(manifest_path, min_anls):
    """Execute a full OCR -> layout -> prompt -> infer -> eval run."""
    path = Path(manifest_path)
    try:
        manifest = RunManifest.from_dict(
            json.loads(path.read_text(encoding="utf-8")), base_dir=path.parent
        )
        report = run_manifest(manifest)
    except LayoutQAError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"mean ANLS {report.mean:.4f} over {report.count} questions "
               f"(artifacts in {manifest.output_dir}/run-{manifest.run_id()})")
    if min_anls is not None and report.mean < min_anls:
        click.echo(f"gate failed: mean {report.mean:.4f} < {min_anls}", err=True)
        sys.exit(EXIT_GATE_FAILED)


if __name__ == "__main__":
    main()
