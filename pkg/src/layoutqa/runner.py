"""End-to-end QA runs: OCR -> layout -> prompt -> complete -> score.

A run is described by a :class:`RunManifest`. Artifacts (the manifest copy,
predictions, a per-prompt log, and the score report) land in a
content-addressed directory under the manifest's output dir, so re-running
the same manifest overwrites the same artifacts and, with a warm response
cache, performs zero backend calls.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .client import BackendSpec, BatchItem, complete_batch, prompt_hash
from .errors import LayoutQAError, ParseError, RecordError
from .evaluate import AnlsReport, Prediction, anls_dataset, max_conf_select, parse_confident_answer
from .layout import LayoutConfig, render_layout
from .ocr import OcrPage, QARecord, load_qa, parse_ocr
from .prompts import FilledPrompt, PromptVariant, TaskKind, fill_template, plain_join


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce one evaluation run."""

    task: TaskKind
    variant: PromptVariant
    backend: BackendSpec
    layout: LayoutConfig
    ocr_path: str
    qa_path: str
    output_dir: str
    seed: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "task": self.task.value,
            "variant": {"layout_on": self.variant.layout_on, "task_on": self.variant.task_on},
            "backend": self.backend.to_dict(),
            "layout": {
                "min_gap_spaces": self.layout.min_gap_spaces,
                "leading_indent": self.layout.leading_indent,
                "row_overlap_threshold": self.layout.row_overlap_threshold,
                "max_chars": self.layout.max_chars,
            },
            "ocr_path": self.ocr_path,
            "qa_path": self.qa_path,
            "output_dir": self.output_dir,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: str | Path | None = None) -> "RunManifest":
        """Build a manifest from its JSON form; relative paths resolve
        against ``base_dir`` (typically the manifest file's directory)."""
        base = Path(base_dir) if base_dir is not None else None

        def _path(value: str) -> str:
            p = Path(value)
            if base is not None and not p.is_absolute():
                p = base / p
            return str(p)

        variant = data.get("variant", {})
        backend_data = dict(data["backend"])
        fixtures_path = backend_data.pop("fixtures_path", None)
        if fixtures_path:
            backend_data["fixtures"] = json.loads(Path(_path(fixtures_path)).read_text("utf-8"))
        if backend_data.get("cache_dir"):
            backend_data["cache_dir"] = _path(backend_data["cache_dir"])
        layout_data = data.get("layout", {})
        return cls(
            task=TaskKind(data["task"]),
            variant=PromptVariant(
                layout_on=bool(variant.get("layout_on", True)),
                task_on=bool(variant.get("task_on", True)),
            ),
            backend=BackendSpec(**backend_data),
            layout=LayoutConfig(**layout_data),
            ocr_path=_path(data["ocr_path"]),
            qa_path=_path(data["qa_path"]),
            output_dir=_path(data["output_dir"]),
            seed=int(data.get("seed", 0)),
        )

    def run_id(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


class PageStore:
    """Resolves page ids to :class:`OcrPage` values.

    Accepts either a directory of ``{page_id}.json`` canonical files or a
    single JSON file holding one page object or an array of page objects.
    """

    def __init__(self, path: str | Path):
        self._dir: Path | None = None
        self._pages: dict[str, OcrPage] = {}
        p = Path(path)
        if p.is_dir():
            self._dir = p
        else:
            data = json.loads(p.read_text(encoding="utf-8"))
            objs = data if isinstance(data, list) else [data]
            for obj in objs:
                page = parse_ocr(json.dumps(obj), "canonical")
                self._pages[page.page_id] = page

    def get(self, page_id: str) -> OcrPage:
        if page_id in self._pages:
            return self._pages[page_id]
        if self._dir is not None:
            candidate = self._dir / f"{page_id}.json"
            if candidate.exists():
                page = parse_ocr(candidate.read_bytes(), "canonical", page_id=page_id)
                self._pages[page_id] = page
                return page
        raise ParseError(f"no OCR data for page {page_id!r}")


def run(manifest: RunManifest) -> AnlsReport:
    """Execute a full run and return the score report.

    Per-prompt backend failures become empty-answer predictions and are
    recorded in the run log; harder errors are re-raised with the question id
    attached, after flushing everything produced so far.
    """
    records = load_qa(Path(manifest.qa_path).read_bytes())
    store = PageStore(manifest.ocr_path)

    jobs: list[tuple[QARecord, list[FilledPrompt]]] = []
    for record in records:
        try:
            jobs.append((record, _prompts_for(record, store, manifest)))
        except LayoutQAError as exc:
            raise type(exc)(f"question {record.question_id!r}: {exc}") from exc

    flat = [p for _, ps in jobs for p in ps]
    items = complete_batch(manifest.backend, flat)

    run_dir = Path(manifest.output_dir) / f"run-{manifest.run_id()}"
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    predictions: list[Prediction] = []
    cursor = 0
    with open(run_dir / "predictions.jsonl", "w", encoding="utf-8") as pred_fp, \
         open(run_dir / "run_log.jsonl", "w", encoding="utf-8") as log_fp:
        for record, prompts in jobs:
            page_items = items[cursor:cursor + len(prompts)]
            cursor += len(prompts)
            for prompt, item in zip(prompts, page_items):
                _log_item(log_fp, manifest.backend, prompt, item)
            prediction = _prediction_for(record, manifest.task, prompts, page_items)
            predictions.append(prediction)
            pred_fp.write(json.dumps(_prediction_row(prediction), ensure_ascii=False,
                                     sort_keys=True) + "\n")
            pred_fp.flush()

    report = anls_dataset(predictions, records)
    (run_dir / "report.json").write_text(
        json.dumps(
            {"mean": report.mean, "count": report.count, "per_question": report.per_question},
            indent=2, sort_keys=True,
        ) + "\n",
        encoding="utf-8",
    )
    return report


def _prompts_for(record: QARecord, store: PageStore, manifest: RunManifest) -> list[FilledPrompt]:
    if manifest.task != TaskKind.MPDOCVQA and len(record.page_ids) != 1:
        raise RecordError(
            f"task {manifest.task.value} expects exactly one page, got {len(record.page_ids)}"
        )
    prompts = []
    for page_id in record.page_ids:
        page = store.get(page_id)
        if manifest.variant.layout_on:
            doc = render_layout(page, manifest.layout).text
        else:
            doc = plain_join(page)
        prompts.append(fill_template(
            manifest.task, manifest.variant, doc, record.question,
            question_id=record.question_id,
        ))
    return prompts


def _prediction_for(
    record: QARecord,
    task: TaskKind,
    prompts: list[FilledPrompt],
    items: list[BatchItem],
) -> Prediction:
    if task == TaskKind.MPDOCVQA:
        candidates = [
            parse_confident_answer(item.completion.text, record.question_id)
            for item in items if item.ok
        ]
        if not candidates:
            return Prediction(record.question_id, "", 0)
        return max_conf_select(candidates)
    item = items[0]
    answer = item.completion.text.strip() if item.ok else ""
    return Prediction(record.question_id, answer)


def _prediction_row(prediction: Prediction) -> dict[str, Any]:
    row: dict[str, Any] = {"question_id": prediction.question_id, "answer": prediction.answer}
    if prediction.confidence is not None:
        row["confidence"] = prediction.confidence
    return row


def _log_item(log_fp, backend: BackendSpec, prompt: FilledPrompt, item: BatchItem) -> None:
    entry: dict[str, Any] = {
        "question_id": prompt.question_id,
        "prompt_hash": prompt_hash(backend, prompt.text),
    }
    if item.ok:
        entry.update(
            completion=item.completion.text,
            latency_ms=item.completion.latency_ms,
            attempts=item.completion.attempt_count,
        )
    else:
        entry["error"] = item.error
    log_fp.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")
    log_fp.flush()
