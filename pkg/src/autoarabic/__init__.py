"""Localization toolkit for video-caption benchmarks targeting Modern Standard Arabic.

The pipeline runs in three stages: machine translation of English captions,
automatic flagging of likely translation errors, and budgeted human
post-editing through a review service. Alongside the pipeline sit corpus
statistics and cross-modal retrieval scoring, so a localized benchmark can
be audited end to end.
"""

from .arabic_text import (
    has_diacritics,
    normalize_for_compare,
    strip_diacritics,
    token_count,
    tokenize,
)
from .corpus import (
    CaptionRecord,
    CaptionStatus,
    Corpus,
    CorpusError,
    CorpusStore,
    EditRecord,
    ErrorCategory,
    FlagRecord,
    Moment,
    VideoRef,
    ingest_didemo,
    load,
    store,
)
from .review import Budget

__version__ = "0.1.0"

__all__ = [
    "Budget",
    "CaptionRecord",
    "CaptionStatus",
    "Corpus",
    "CorpusError",
    "CorpusStore",
    "EditRecord",
    "ErrorCategory",
    "FlagRecord",
    "Moment",
    "VideoRef",
    "__version__",
    "has_diacritics",
    "ingest_didemo",
    "load",
    "normalize_for_compare",
    "store",
    "strip_diacritics",
    "token_count",
    "tokenize",
]
