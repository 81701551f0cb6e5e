"""Prompt assembly for document QA and its ablation variants.

Templates live as versioned text files under ``templates/`` with
``{document}`` and ``{question}`` placeholders; code never embeds template
prose, so the files are the single source of truth. Each task template
states the answer-format contract (extractive span, list format, or
confidence output) around the document and question. The minimal baseline
skeleton puts the document and question inline with a one-line instruction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources

from .errors import PromptError
from .layout import LayoutText, sort_segments
from .ocr import OcrPage


class TaskKind(str, Enum):
    DOCVQA = "docvqa"
    INFOGRAPHICVQA = "infographicvqa"
    MPDOCVQA = "mpdocvqa"


@dataclass(frozen=True)
class PromptVariant:
    """Ablation switches: layout-aware document text and task instruction.

    Both on is the full prompt; ``layout_on=False`` expects the caller to
    pass the space-joined document (see :func:`plain_join`); ``task_on=False``
    swaps the task template for the minimal baseline skeleton.
    """

    layout_on: bool = True
    task_on: bool = True

    def label(self) -> str:
        match (self.layout_on, self.task_on):
            case (True, True):
                return "full"
            case (False, True):
                return "no-layout"
            case (True, False):
                return "no-task"
            case _:
                return "no-task-no-layout"


@dataclass(frozen=True)
class FilledPrompt:
    """A template with document and question substituted."""

    text: str
    task: TaskKind | None = None
    variant: PromptVariant | None = None
    question_id: str = ""


_TASK_TEMPLATES = {
    TaskKind.DOCVQA: "docvqa.txt",
    TaskKind.INFOGRAPHICVQA: "infographicvqa.txt",
    TaskKind.MPDOCVQA: "mpdocvqa.txt",
}
PLAIN_TEMPLATE = "plain.txt"

_PLACEHOLDER = re.compile(r"\{document\}|\{question\}")


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    """Read a template file from the package, byte-for-byte."""
    return (resources.files("layoutqa") / "templates" / name).read_text(encoding="utf-8")


def substitute(template: str, document: str, question: str) -> str:
    """Replace both placeholders in one pass (substituted text is never rescanned)."""
    def repl(match: re.Match) -> str:
        return document if match.group(0) == "{document}" else question

    return _PLACEHOLDER.sub(repl, template)


def fill_template(
    task: TaskKind,
    variant: PromptVariant,
    doc: LayoutText | str,
    question: str,
    *,
    question_id: str = "",
) -> FilledPrompt:
    """Fill the prompt for ``task`` under the given ablation variant.

    With ``task_on`` the task's template is used verbatim; otherwise the
    minimal baseline skeleton. ``doc`` is taken as-is: callers pass the
    layout rendering when ``layout_on`` and the space-joined text otherwise.
    """
    doc_text = doc.text if isinstance(doc, LayoutText) else doc
    if not doc_text:
        raise PromptError("document text is empty")
    if not question:
        raise PromptError("question is empty")
    name = _TASK_TEMPLATES[TaskKind(task)] if variant.task_on else PLAIN_TEMPLATE
    text = substitute(load_template(name), doc_text, question)
    return FilledPrompt(text=text, task=TaskKind(task), variant=variant, question_id=question_id)


def plain_join(page: OcrPage) -> str:
    """Reading-ordered segment texts joined by single spaces.

    Internal whitespace runs are collapsed too, so the result has no line
    breaks and no run of two or more spaces.
    """
    ordered = sort_segments(page)
    return " ".join(" ".join(seg.text.split()) for seg in ordered)


def fill_qgen_prompt(doc: str) -> str:
    """Fill the question-generation prompt used for tuning-data construction."""
    if not doc:
        raise PromptError("document text is empty")
    return substitute(load_template("table_qgen.txt"), doc, "")


def fill_instruction_prompt(doc: str, question: str) -> str:
    """Fill the tuning-example input prompt with a document and question."""
    if not doc or not question:
        raise PromptError("document and question must be non-empty")
    return substitute(load_template("table_instruction.txt"), doc, question)
