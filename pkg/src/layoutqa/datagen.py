"""Generate layout-aware instruction-tuning examples from CSV tables.

Each sampled table is rendered as a fixed-width string, sent through a
question-generation prompt, and the parsed question/answer pair is packed
into a tuning example whose input is the instruction prompt and whose target
is the answer. Sampling is with replacement from a seeded RNG, so a fixed
seed makes the whole run byte-reproducible with a deterministic backend.
"""

from __future__ import annotations

import csv
import io
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Sequence

from .client import BackendSpec, complete_batch
from .errors import DatasetError, PromptError, QaParseError, TableError
from .prompts import FilledPrompt, fill_instruction_prompt, fill_qgen_prompt

COLUMN_SEPARATOR = "  "


@dataclass(frozen=True)
class TableSpec:
    """A rectangular table: header row plus at least one data row."""

    headers: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "headers", tuple(self.headers))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        if not self.headers:
            raise TableError("table needs at least one column")
        if not self.rows:
            raise TableError("table needs at least one data row")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.headers):
                raise TableError(
                    f"row {i} has {len(row)} cells, expected {len(self.headers)}"
                )
        for cells in (self.headers, *self.rows):
            for cell in cells:
                if "\n" in cell or "\r" in cell:
                    raise TableError("cells must not contain line breaks")


@dataclass(frozen=True)
class TuningExample:
    """One instruction-tuning pair. ``target_in_document`` flags whether the
    answer actually occurs in the rendered table (a backend-quality signal;
    violations are kept, not dropped)."""

    input: str
    target: str
    target_in_document: bool = True

    def __post_init__(self):
        if not self.target:
            raise ValueError("target must be non-empty")


@dataclass(frozen=True)
class DatagenStats:
    requested: int
    emitted: int
    parse_failures: int
    backend_failures: int
    target_not_in_document: int

    def to_dict(self) -> dict:
        return {
            "requested": self.requested,
            "emitted": self.emitted,
            "parse_failures": self.parse_failures,
            "backend_failures": self.backend_failures,
            "target_not_in_document": self.target_not_in_document,
        }


def table_from_csv(text: str) -> TableSpec:
    """Parse CSV text (RFC 4180, quoted fields allowed) into a TableSpec.

    The first row is the header. Newlines inside quoted cells are collapsed
    to spaces because the fixed-width rendering is line-oriented.
    """
    rows = [row for row in csv.reader(io.StringIO(text)) if row]
    if len(rows) < 2:
        raise TableError("CSV needs a header row and at least one data row")
    cleaned = [tuple(" ".join(cell.split()) for cell in row) for row in rows]
    return TableSpec(headers=cleaned[0], rows=tuple(cleaned[1:]))


def load_tables_dir(path: str | Path) -> list[TableSpec]:
    """Load every ``*.csv`` file under ``path`` (sorted by name)."""
    base = Path(path)
    files = sorted(base.glob("*.csv"))
    if not files:
        raise DatasetError(f"no .csv files found under {base}")
    tables = []
    for file in files:
        try:
            tables.append(table_from_csv(file.read_text(encoding="utf-8")))
        except TableError as exc:
            raise TableError(f"{file.name}: {exc}") from exc
    return tables


def render_table(table: TableSpec) -> str:
    """Render with fixed-width columns: each column as wide as its longest
    cell, cells left-aligned, columns separated by two spaces, no trailing
    spaces."""
    widths = [
        max(len(table.headers[c]), *(len(row[c]) for row in table.rows))
        for c in range(len(table.headers))
    ]
    lines = []
    for cells in (table.headers, *table.rows):
        line = COLUMN_SEPARATOR.join(cell.ljust(w) for cell, w in zip(cells, widths))
        lines.append(line.rstrip())
    return "\n".join(lines)


def parse_qa_response(raw: str) -> tuple[str, str]:
    """Extract the generated pair: first "Question:" line, then the first
    subsequent "Answer:" line."""
    lines = raw.splitlines()
    q_index = None
    question = None
    for i, line in enumerate(lines):
        stripped = line.strip()
        if stripped.startswith("Question:"):
            q_index, question = i, stripped[len("Question:"):].strip()
            break
    if question is None:
        raise QaParseError("no 'Question:' line in response")
    for line in lines[q_index + 1:]:
        stripped = line.strip()
        if stripped.startswith("Answer:"):
            answer = stripped[len("Answer:"):].strip()
            if not question or not answer:
                raise QaParseError("empty question or answer in response")
            return question, answer
    raise QaParseError("no 'Answer:' line after the question")


def build_tuning_example(doc: str, question: str, answer: str) -> TuningExample:
    """Pack a document, question, and answer into a tuning example."""
    if not doc or not question or not answer:
        raise PromptError("doc, question, and answer must all be non-empty")
    return TuningExample(
        input=fill_instruction_prompt(doc, question),
        target=answer,
        target_in_document=answer in doc,
    )


def generate_dataset(
    tables: Sequence[TableSpec],
    n: int,
    backend: BackendSpec,
    seed: int,
    parallelism: int | None = None,
) -> tuple[list[TuningExample], DatagenStats]:
    """Sample ``n`` tables with replacement and build tuning examples.

    The sampling order is fixed by the seed before any parallel work, so the
    emitted order is deterministic. Items whose response fails to parse are
    skipped and counted; backend failures are counted per item. If nothing
    usable comes back, the whole run is an error.
    """
    tables = list(tables)
    if not tables:
        raise DatasetError("table source is empty")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = random.Random(seed)
    picks = [rng.randrange(len(tables)) for _ in range(n)]
    docs = [render_table(tables[i]) for i in picks]
    prompts = [
        FilledPrompt(text=fill_qgen_prompt(doc), question_id=f"sample-{k:05d}")
        for k, doc in enumerate(docs)
    ]
    items = complete_batch(backend, prompts, parallelism)

    examples: list[TuningExample] = []
    parse_failures = backend_failures = violations = 0
    for doc, item in zip(docs, items):
        if not item.ok:
            backend_failures += 1
            continue
        try:
            question, answer = parse_qa_response(item.completion.text)
        except QaParseError:
            parse_failures += 1
            continue
        example = build_tuning_example(doc, question, answer)
        if not example.target_in_document:
            violations += 1
        examples.append(example)
    if not examples:
        raise DatasetError(
            f"no usable examples out of {n} "
            f"({backend_failures} backend failures, {parse_failures} parse failures)"
        )
    stats = DatagenStats(
        requested=n,
        emitted=len(examples),
        parse_failures=parse_failures,
        backend_failures=backend_failures,
        target_not_in_document=violations,
    )
    return examples, stats


def write_examples(examples: Sequence[TuningExample], stream: IO[str]) -> None:
    """Write examples as JSONL ``{"input": ..., "target": ...}`` lines."""
    for example in examples:
        stream.write(json.dumps(
            {"input": example.input, "target": example.target},
            ensure_ascii=False, sort_keys=True,
        ))
        stream.write("\n")
