"""Automatic error flagging for raw translations.

Two detector families run over every translated caption: deterministic
rules (diacritics present, known loanwords, suspiciously short output) and
an LLM judge that answers with a single ``FLAGS:`` line. Rule verdicts are
authoritative; the judge can only add categories. A caption with any
category, or with judge output we could not parse, moves to ``flagged`` so
a human sees it; clean captions stay ``translated``.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .arabic_text import has_diacritics, strip_diacritics, tokenize
from .corpus import (
    CaptionRecord,
    CaptionStatus,
    CATEGORY_TOKENS,
    Corpus,
    CorpusParseError,
    CorpusStore,
    ErrorCategory,
    FlagRecord,
)
from .provider import ProviderClient, ProviderError

logger = logging.getLogger(__name__)

__all__ = [
    "FlagRecord",
    "LexiconEntry",
    "DEFAULT_LOANWORDS",
    "load_lexicon",
    "JUDGE_PROMPT_TEMPLATE",
    "build_judge_prompt",
    "parse_judge_output",
    "ParsedFlags",
    "rule_flags",
    "detect_corpus",
    "DetectReport",
    "PARTIAL_RATIO_THRESHOLD",
]

# Output shorter than this fraction of the source token count is treated as
# an incomplete rendering of the caption.
PARTIAL_RATIO_THRESHOLD = 0.3

RULE_SOURCE = "rule"
JUDGE_SOURCE = "judge"


@dataclass(frozen=True)
class LexiconEntry:
    """One transliterated foreign word and the native term to prefer."""

    surface: str
    preferred: str
    policy: str = "replace"  # "replace" or "keep"


DEFAULT_LOANWORDS: Tuple[LexiconEntry, ...] = (
    LexiconEntry("كاميرا", "آلة التصوير", "replace"),
)


def load_lexicon(path) -> Tuple[LexiconEntry, ...]:
    """Read a TSV lexicon: surface, preferred, policy. '#' starts a comment."""
    entries = []
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split("\t")
        if len(parts) == 2:
            parts.append("replace")
        if len(parts) != 3 or not parts[0] or not parts[1]:
            raise CorpusParseError(f"{path}: line {lineno}: expected 3 TSV fields")
        if parts[2] not in ("replace", "keep"):
            raise CorpusParseError(
                f"{path}: line {lineno}: policy must be replace or keep"
            )
        entries.append(LexiconEntry(parts[0], parts[1], parts[2]))
    return tuple(entries)


JUDGE_PROMPT_TEMPLATE = (
    "You review the Arabic translation of an English video caption.\n"
    "Compare it with the English source and list every error category that applies.\n"
    "\n"
    "Categories:\n"
    "- lexical: a wrong or imprecise word choice changes what is described.\n"
    "- literal: word-for-word phrasing that reads unnaturally in Arabic.\n"
    "- hallucination: content that does not appear in the English source.\n"
    "- tense_shift: a verb tense that differs from the English source.\n"
    "- loanword: a transliterated foreign word where a native Arabic term exists.\n"
    "- diacritics: vocalization marks that a caption should not carry.\n"
    "\n"
    "Answer with a single line: \"FLAGS: \" followed by a comma-separated list\n"
    "of category tokens, or \"FLAGS: none\" if the translation is fine.\n"
    "\n"
    "English caption: {source}\n"
    "Arabic translation: {translation}\n"
)


def build_judge_prompt(source: str, translation: str) -> str:
    return JUDGE_PROMPT_TEMPLATE.replace("{source}", source).replace(
        "{translation}", translation
    )


@dataclass(frozen=True)
class ParsedFlags:
    categories: frozenset
    parse_error: bool
    raw: str


_FLAGS_LINE_RE = re.compile(r"^\s*FLAGS:\s*(?P<value>.*?)\s*$", re.MULTILINE)


def parse_judge_output(raw: str) -> ParsedFlags:
    """Extract categories from a judge reply.

    The grammar is one ``FLAGS:`` line holding either ``none`` or a
    comma-separated subset of the six category tokens. A reply with no such
    line, or with tokens outside the closed set, is marked as a parse error;
    recognized tokens are still kept so the reviewer sees what the judge
    meant.
    """
    matches = _FLAGS_LINE_RE.findall(raw)
    if not matches:
        return ParsedFlags(frozenset(), True, raw)
    value = matches[-1].strip()
    if value.lower() == "none":
        return ParsedFlags(frozenset(), False, raw)
    categories = set()
    bad = False
    for part in value.split(","):
        token = part.strip().lower()
        if not token:
            bad = True
            continue
        if token in CATEGORY_TOKENS:
            categories.add(ErrorCategory(token))
        else:
            bad = True
    return ParsedFlags(frozenset(categories), bad, raw)


def _loanword_hits(
    text: str, lexicon: Sequence[LexiconEntry]
) -> List[LexiconEntry]:
    """Whole-token match against the lexicon, with or without a leading ال."""
    tokens = set(tokenize(strip_diacritics(text)))
    hits = []
    for entry in lexicon:
        if entry.surface in tokens or ("ال" + entry.surface) in tokens:
            hits.append(entry)
    return hits


def rule_flags(
    record: CaptionRecord, lexicon: Sequence[LexiconEntry] = DEFAULT_LOANWORDS
) -> Set[ErrorCategory]:
    """Deterministic checks on the raw translation."""
    text = record.raw_translation or ""
    flags: Set[ErrorCategory] = set()
    if has_diacritics(text):
        flags.add(ErrorCategory.DIACRITICS)
    if _loanword_hits(text, lexicon):
        flags.add(ErrorCategory.LOANWORD)
    source_len = len(tokenize(record.source_text))
    if source_len and len(tokenize(text)) / source_len < PARTIAL_RATIO_THRESHOLD:
        # Far too short to cover the caption: treat as a failed rendering.
        flags.add(ErrorCategory.LITERAL)
    return flags


@dataclass
class DetectReport:
    examined: int = 0
    flagged: int = 0
    clean: int = 0
    skipped: int = 0
    judge_parse_errors: int = 0
    judge_failures: int = 0
    category_counts: Dict[str, int] = field(
        default_factory=lambda: {t: 0 for t in CATEGORY_TOKENS}
    )

    def to_dict(self) -> dict:
        return {
            "examined": self.examined,
            "flagged": self.flagged,
            "clean": self.clean,
            "skipped": self.skipped,
            "judge_parse_errors": self.judge_parse_errors,
            "judge_failures": self.judge_failures,
            "category_counts": dict(self.category_counts),
        }


def detect_caption(
    record: CaptionRecord,
    judge_client: Optional[ProviderClient] = None,
    lexicon: Sequence[LexiconEntry] = DEFAULT_LOANWORDS,
    now: Optional[datetime] = None,
) -> FlagRecord:
    """Run rules and (optionally) the judge on one translated caption.

    ``now`` pins the record timestamp; omit it for wall-clock time.
    """
    flags = FlagRecord(caption_id=record.caption_id)
    if now is not None:
        flags.created_at = now
    for category in rule_flags(record, lexicon):
        flags.categories.add(category)
        flags.sources[category] = RULE_SOURCE

    if judge_client is not None:
        prompt = build_judge_prompt(record.source_text, record.raw_translation or "")
        try:
            raw = judge_client.complete(prompt)
        except ProviderError as exc:
            # No verdict at all: force a human look rather than assume clean.
            logger.warning("%s: judge unavailable: %s", record.caption_id, exc)
            flags.judge_parse_error = True
            flags.judge_raw_output = None
            return flags
        parsed = parse_judge_output(raw)
        flags.judge_raw_output = raw
        flags.judge_parse_error = parsed.parse_error
        for category in parsed.categories:
            if category not in flags.categories:
                flags.categories.add(category)
                flags.sources[category] = JUDGE_SOURCE
    return flags


def detect_corpus(
    corpus: Corpus,
    judge_client: Optional[ProviderClient] = None,
    lexicon: Sequence[LexiconEntry] = DEFAULT_LOANWORDS,
    store: Optional[CorpusStore] = None,
    now: Optional[datetime] = None,
) -> DetectReport:
    """Flag every caption currently in ``translated`` status.

    Captions that come out clean keep their status; anything with a
    category or an unreadable judge verdict moves to ``flagged``. Flag
    records are kept for clean captions too, so detector quality can be
    scored on the full set of decisions later.
    """
    report = DetectReport()
    transport_failed_judge = False
    for record in corpus.captions():
        if record.status is not CaptionStatus.TRANSLATED:
            report.skipped += 1
            continue
        flags = detect_caption(record, judge_client, lexicon, now=now)
        report.examined += 1
        if flags.judge_parse_error:
            if flags.judge_raw_output is None and judge_client is not None:
                report.judge_failures += 1
                transport_failed_judge = True
            else:
                report.judge_parse_errors += 1
        for category in flags.categories:
            report.category_counts[category.value] += 1
        with corpus.lock:
            corpus.set_flags(flags)
            if flags.categories or flags.judge_parse_error:
                record.flags = set(flags.categories)
                record.transition(CaptionStatus.FLAGGED)
                report.flagged += 1
            else:
                report.clean += 1
        if store is not None:
            store.append_flags(flags)
            if record.status is CaptionStatus.FLAGGED:
                store.append(record)
    if transport_failed_judge:
        logger.warning(
            "judge transport failed for %d caption(s); they are queued for review",
            report.judge_failures,
        )
    return report
