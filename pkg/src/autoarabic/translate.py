"""Machine translation stage: pending captions in, raw Arabic out.

Runs every pending caption through the provider with a fixed prompt, strips
a known boilerplate suffix some models append, and advances the caption to
``translated``. Failures are noted on the record and skipped, never fatal;
a rerun picks up exactly the captions that are still pending, and the
provider cache makes repeated prompts free.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Callable, List, Optional

from .arabic_text import tokenize
from .corpus import CaptionStatus, Corpus, CorpusStore
from .provider import ProviderClient, ProviderError

logger = logging.getLogger(__name__)

# The exact instruction sent for every caption. Whitespace is significant:
# the template is part of the provider cache key, so any byte change
# invalidates existing caches.
PROMPT_TEMPLATE = (
    "You will receive an English sentence that \n"
    "serves as a caption for a short video clip. \n"
    "Your task is to translate this caption \n"
    "into Modern Standard Arabic while ensuring \n"
    "that the translation remains suitable  \n"
    "and appropriate as a caption.\n"
    "The English caption: {caption}\n"
    "Arabic caption:"
)

# Boilerplate tail meaning "in the Arabic language"; some models append it
# to otherwise fine translations. Only a sentence-final occurrence is
# removed, and trailing punctuation survives the cut.
SUFFIX_PHRASE = "باللغة العربية"

_SUFFIX_RE = re.compile(r"\s*باللغة\s+العربية\s*(?P<tail>[.!؟،؛]*)\s*$")


def build_prompt(caption: str) -> str:
    return PROMPT_TEMPLATE.replace("{caption}", caption)


def strip_suffix_artifact(text: str) -> tuple[str, bool]:
    """Drop a terminal boilerplate phrase; returns (text, whether removed).

    If removing the phrase would leave nothing, the text is returned
    untouched and detection deals with it instead.
    """
    match = _SUFFIX_RE.search(text)
    if not match:
        return text, False
    cleaned = text[: match.start()] + match.group("tail")
    if not tokenize(cleaned).tokens:
        return text, False
    return cleaned, True


@dataclass
class TranslateReport:
    translated: int = 0
    failed: int = 0
    skipped: int = 0
    suffix_removed: int = 0
    failed_ids: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "translated": self.translated,
            "failed": self.failed,
            "skipped": self.skipped,
            "suffix_removed": self.suffix_removed,
            "failed_ids": list(self.failed_ids),
        }


def translate_caption(client: ProviderClient, source_text: str) -> tuple[str, bool]:
    """One caption through the model; returns (clean text, suffix removed)."""
    raw = client.complete(build_prompt(source_text))
    return strip_suffix_artifact(raw.strip())


def translate_corpus(
    corpus: Corpus,
    client: ProviderClient,
    store: Optional[CorpusStore] = None,
    progress: Optional[Callable[[str], None]] = None,
) -> TranslateReport:
    """Translate every pending caption, in caption-id order.

    Source text, moments, and history are never touched. With a ``store``,
    each completed caption is appended immediately, so an interrupted run
    loses at most the caption in flight.
    """
    report = TranslateReport()
    for record in corpus.captions():
        if record.status is not CaptionStatus.PENDING:
            report.skipped += 1
            continue
        try:
            text, removed = translate_caption(client, record.source_text)
        except ProviderError as exc:
            record.error_note = f"translation failed: {exc}"
            report.failed += 1
            report.failed_ids.append(record.caption_id)
            logger.warning("%s: %s", record.caption_id, record.error_note)
            continue
        with corpus.lock:
            record.raw_translation = text
            record.error_note = None
            record.transition(CaptionStatus.TRANSLATED)
        if removed:
            report.suffix_removed += 1
            logger.info("%s: removed boilerplate suffix", record.caption_id)
        report.translated += 1
        if store is not None:
            store.append(record)
        if progress is not None:
            progress(record.caption_id)
    return report
