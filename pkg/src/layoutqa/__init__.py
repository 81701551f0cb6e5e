"""Layout-aware document QA toolkit.

Reconstructs the visual layout of a document image as plain text (spaces and
line breaks) from OCR segments, wraps it in task-aware prompts, runs them
against pluggable completion backends, scores answers with ANLS, and builds
layout-aware instruction-tuning data from tables.
"""

from .client import BackendSpec, BatchItem, Completion, complete, complete_batch
from .datagen import (
    DatagenStats,
    TableSpec,
    TuningExample,
    build_tuning_example,
    generate_dataset,
    parse_qa_response,
    render_table,
)
from .errors import (
    BackendError,
    ConfigError,
    DatasetError,
    EmptyDocument,
    EvalError,
    LayoutQAError,
    ParseError,
    PromptError,
    QaParseError,
    RecordError,
    TableError,
)
from .evaluate import (
    AnlsReport,
    Prediction,
    anls_dataset,
    anls_question,
    max_conf_select,
    normalized_levenshtein,
    parse_confident_answer,
)
from .layout import (
    CharWidth,
    LayoutConfig,
    LayoutText,
    Row,
    estimate_char_width,
    group_rows,
    render_layout,
    render_row,
    sort_segments,
)
from .ocr import BBox, OcrPage, QARecord, TextSegment, load_qa, parse_ocr
from .prompts import (
    FilledPrompt,
    PromptVariant,
    TaskKind,
    fill_qgen_prompt,
    fill_template,
    plain_join,
)
from .runner import RunManifest, run

__version__ = "0.1.0"
