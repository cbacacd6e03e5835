"""Corpus statistics, error-rate breakdowns, and detector quality scoring.

Everything here is read-only over a corpus (or plain mappings), so reports
can be rerun at any point in the pipeline without side effects.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .arabic_text import strip_diacritics, tokenize
from .corpus import (
    CaptionStatus,
    CATEGORY_TOKENS,
    Corpus,
    CorpusValidationError,
    ErrorCategory,
    FlagRecord,
)

POS_TAGS = ("VERB", "NOUN", "ADJ", "ADV")


def _target_tokens(text: str) -> Tuple[str, ...]:
    return tokenize(strip_diacritics(text)).tokens


def _source_tokens(text: str, lowercase: bool) -> Tuple[str, ...]:
    return tokenize(text.lower() if lowercase else text).tokens


def _texts_for_side(
    corpus: Corpus, side: str, lowercase_source: bool
) -> List[Tuple[str, ...]]:
    if side == "source":
        return [
            _source_tokens(rec.source_text, lowercase_source)
            for rec in corpus.captions()
        ]
    if side == "target":
        return [
            _target_tokens(rec.text)
            for rec in corpus.captions()
            if rec.text is not None
        ]
    raise CorpusValidationError(f"unknown side {side!r}; expected source or target")


@dataclass
class WordcountReport:
    side: str
    n_captions: int
    total_tokens: int
    mean_tokens: float
    histogram: Dict[int, int]

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "captions": self.n_captions,
            "total_tokens": self.total_tokens,
            "mean_tokens": round(self.mean_tokens, 1),
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


def wordcount_stats(
    corpus: Corpus, side: str = "target", lowercase_source: bool = True
) -> WordcountReport:
    """Token-count distribution per caption.

    Target text is counted after diacritic stripping (counts are unchanged,
    but every module sees the same surface forms that way); source text is
    counted as-is.
    """
    token_lists = _texts_for_side(corpus, side, lowercase_source)
    histogram: Dict[int, int] = {}
    total = 0
    for tokens in token_lists:
        n = len(tokens)
        total += n
        histogram[n] = histogram.get(n, 0) + 1
    count = len(token_lists)
    return WordcountReport(
        side=side,
        n_captions=count,
        total_tokens=total,
        mean_tokens=total / count if count else 0.0,
        histogram=histogram,
    )


def ngram_stats(
    corpus: Corpus,
    side: str = "target",
    n_values: Sequence[int] = (1, 2, 3, 4),
    lowercase_source: bool = True,
) -> Dict[int, int]:
    """Distinct n-gram counts per order; windows never cross caption bounds."""
    token_lists = _texts_for_side(corpus, side, lowercase_source)
    out: Dict[int, int] = {}
    for n in n_values:
        if n < 1:
            raise CorpusValidationError(f"n-gram order must be >= 1, got {n}")
        seen = set()
        for tokens in token_lists:
            for i in range(len(tokens) - n + 1):
                seen.add(tokens[i : i + n])
        out[n] = len(seen)
    return out


def pos_stats(
    corpus: Corpus,
    tagger: Callable[[str], str],
    side: str = "target",
    lowercase_source: bool = True,
) -> Dict[str, int]:
    """Distinct word types per coarse part-of-speech tag.

    ``tagger`` maps one token to a tag; only VERB/NOUN/ADJ/ADV are counted,
    anything else is ignored. Types are distinct surface forms, so a verb
    appearing in ten captions counts once.
    """
    token_lists = _texts_for_side(corpus, side, lowercase_source)
    types: Dict[str, set] = {tag: set() for tag in POS_TAGS}
    for tokens in token_lists:
        for token in tokens:
            tag = str(tagger(token)).upper()
            if tag in types:
                types[tag].add(token)
    return {tag: len(types[tag]) for tag in POS_TAGS}


_CATEGORY_BIT = {cat: 1 << i for i, cat in enumerate(ErrorCategory)}


def _as_category(value) -> ErrorCategory:
    if isinstance(value, ErrorCategory):
        return value
    token = str(value)
    if token not in CATEGORY_TOKENS:
        raise CorpusValidationError(f"unknown error category token: {token!r}")
    return ErrorCategory(token)


def _category_mask(categories: Iterable) -> int:
    mask = 0
    for value in categories:
        mask |= _CATEGORY_BIT[_as_category(value)]
    return mask


def _mask_tokens(mask: int) -> Tuple[str, ...]:
    return tuple(cat.value for cat in ErrorCategory if mask & _CATEGORY_BIT[cat])


@dataclass
class ErrorBreakdown:
    """Occurrence and co-occurrence rates for the six error categories.

    ``mask_counts[m]`` is the number of captions whose flag set is exactly
    the category subset encoded by bitmask ``m``, which makes any joint
    count a 64-term sum and keeps inclusion-exclusion checks exact.
    """

    n_captions: int
    mask_counts: List[int]

    def subset_count(self, categories: Iterable) -> int:
        """Captions flagged with at least all of ``categories``."""
        want = _category_mask(categories)
        return sum(
            count
            for mask, count in enumerate(self.mask_counts)
            if mask & want == want
        )

    def count(self, category) -> int:
        return self.subset_count([category])

    def rate(self, categories: Iterable) -> float:
        if self.n_captions == 0:
            return 0.0
        return self.subset_count(categories) / self.n_captions

    @property
    def union_count(self) -> int:
        return self.n_captions - self.mask_counts[0]

    @property
    def union_rate(self) -> float:
        return self.union_count / self.n_captions if self.n_captions else 0.0

    def inclusion_exclusion_union(self) -> int:
        """Union size rebuilt from all 63 joint counts; must equal
        ``union_count`` exactly, which pins the joint counts down."""
        total = 0
        categories = list(ErrorCategory)
        for size in range(1, len(categories) + 1):
            sign = 1 if size % 2 else -1
            for combo in itertools.combinations(categories, size):
                total += sign * self.subset_count(combo)
        return total

    def to_dict(self) -> dict:
        def pct(count: int) -> float:
            return round(100.0 * count / self.n_captions, 1) if self.n_captions else 0.0

        marginal = {cat.value: self.count(cat) for cat in ErrorCategory}
        pairs = {
            "&".join(sorted((a.value, b.value))): self.subset_count((a, b))
            for a, b in itertools.combinations(ErrorCategory, 2)
        }
        triples = {
            "&".join(sorted(t.value for t in combo)): self.subset_count(combo)
            for combo in itertools.combinations(ErrorCategory, 3)
        }
        return {
            "captions": self.n_captions,
            "counts": marginal,
            "percent": {k: pct(v) for k, v in marginal.items()},
            "pair_counts": pairs,
            "pair_percent": {k: pct(v) for k, v in pairs.items()},
            "triple_counts": triples,
            "triple_percent": {k: pct(v) for k, v in triples.items()},
            "union_count": self.union_count,
            "union_percent": pct(self.union_count),
        }


def error_breakdown(source) -> ErrorBreakdown:
    """Build the breakdown from a corpus or a caption-to-categories mapping.

    From a corpus, detector flag records are used when present (they cover
    clean captions too); otherwise the flags on translated captions stand
    in. The denominator is every caption with a decision, flagged or not.
    """
    if isinstance(source, Corpus):
        if source.flag_records:
            assignments: Mapping[str, Iterable] = {
                cid: fr.categories for cid, fr in source.flag_records.items()
            }
        else:
            assignments = {
                rec.caption_id: rec.flags
                for rec in source.captions()
                if rec.raw_translation is not None
            }
    else:
        assignments = source
    mask_counts = [0] * (1 << len(ErrorCategory))
    for categories in assignments.values():
        mask_counts[_category_mask(categories)] += 1
    return ErrorBreakdown(n_captions=len(assignments), mask_counts=mask_counts)


# Detector scoring collapses the six categories into the classes a reviewer
# actually distinguishes: content errors (hallucination/literal/lexical)
# blur together, and a clean caption is its own class.
NO_ERROR_CLASS = "no_error"
EVAL_CLASS_FOR_CATEGORY = {
    ErrorCategory.LEXICAL: "hallucination_literal",
    ErrorCategory.LITERAL: "hallucination_literal",
    ErrorCategory.HALLUCINATION: "hallucination_literal",
    ErrorCategory.TENSE_SHIFT: "tense_shifting",
    ErrorCategory.LOANWORD: "loanword",
    ErrorCategory.DIACRITICS: "diacritics",
}


def merge_categories(categories: Iterable) -> frozenset:
    """Project fine-grained categories onto evaluation classes."""
    classes = {EVAL_CLASS_FOR_CATEGORY[_as_category(c)] for c in categories}
    return frozenset(classes) if classes else frozenset((NO_ERROR_CLASS,))


@dataclass
class ClassMetrics:
    name: str
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def support(self) -> int:
        return self.tp + self.fn

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def to_dict(self) -> dict:
        return {
            "precision": round(self.precision, 4),
            "recall": round(self.recall, 4),
            "f1": round(self.f1, 4),
            "support": self.support,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
        }


@dataclass
class DetectorReport:
    classes: Dict[str, ClassMetrics]
    n_captions: int
    exact_match_accuracy: float
    decision_accuracy: float

    @property
    def macro_precision(self) -> float:
        return self._macro("precision")

    @property
    def macro_recall(self) -> float:
        return self._macro("recall")

    @property
    def macro_f1(self) -> float:
        return self._macro("f1")

    def _macro(self, metric: str) -> float:
        if not self.classes:
            return 0.0
        return sum(getattr(m, metric) for m in self.classes.values()) / len(self.classes)

    def to_dict(self) -> dict:
        return {
            "captions": self.n_captions,
            "classes": {name: m.to_dict() for name, m in sorted(self.classes.items())},
            "macro": {
                "precision": round(self.macro_precision, 4),
                "recall": round(self.macro_recall, 4),
                "f1": round(self.macro_f1, 4),
            },
            "exact_match_accuracy": round(self.exact_match_accuracy, 4),
            "decision_accuracy": round(self.decision_accuracy, 4),
        }


def _predicted_categories(value) -> Iterable:
    if isinstance(value, FlagRecord):
        return value.categories
    return value


def detector_report(
    gold: Mapping[str, Iterable], predicted: Mapping[str, object]
) -> DetectorReport:
    """Score predicted flags against a gold labeling of the same captions.

    Both sides are projected onto evaluation classes first. Metrics run per
    class over every caption; the class list is whatever actually occurs in
    gold or predictions, so toy fixtures are not diluted by absent classes.
    Exact-match accuracy asks for the whole class set to be right;
    decision accuracy scores each (caption, class) call on its own.
    """
    gold_ids = set(gold)
    pred_ids = set(predicted)
    if gold_ids != pred_ids:
        missing = sorted(gold_ids - pred_ids)
        extra = sorted(pred_ids - gold_ids)
        parts = []
        if missing:
            parts.append(f"missing predictions for: {', '.join(missing[:10])}")
        if extra:
            parts.append(f"predictions for unknown ids: {', '.join(extra[:10])}")
        raise CorpusValidationError("; ".join(parts), missing + extra)
    if not gold:
        raise CorpusValidationError("nothing to score: empty gold labeling")

    merged: List[Tuple[frozenset, frozenset]] = []
    for cid in sorted(gold_ids):
        g = merge_categories(gold[cid])
        p = merge_categories(_predicted_categories(predicted[cid]))
        merged.append((g, p))

    observed = sorted(set().union(*(g | p for g, p in merged)))
    classes = {name: ClassMetrics(name) for name in observed}
    exact = 0
    for g, p in merged:
        if g == p:
            exact += 1
        for name, metrics in classes.items():
            in_g = name in g
            in_p = name in p
            if in_g and in_p:
                metrics.tp += 1
            elif in_p:
                metrics.fp += 1
            elif in_g:
                metrics.fn += 1
            else:
                metrics.tn += 1

    n = len(merged)
    correct_decisions = sum(m.tp + m.tn for m in classes.values())
    return DetectorReport(
        classes=classes,
        n_captions=n,
        exact_match_accuracy=exact / n,
        decision_accuracy=correct_decisions / (n * len(classes)),
    )


def corpus_summary(corpus: Corpus) -> dict:
    """One-screen overview: sizes, splits, token means, flag pressure."""
    moments = {
        (r.video_id, r.moment.start_segment, r.moment.end_segment)
        for r in corpus.captions()
    }
    splits: Dict[str, int] = {}
    video_splits: Dict[str, str] = {}
    for rec in corpus.captions():
        splits[rec.split] = splits.get(rec.split, 0) + 1
        video_splits[rec.video_id] = rec.split
    split_videos: Dict[str, int] = {}
    for split in video_splits.values():
        split_videos[split] = split_videos.get(split, 0) + 1
    source = wordcount_stats(corpus, side="source")
    target = wordcount_stats(corpus, side="target")
    flagged = sum(1 for r in corpus.captions() if r.flags)
    return {
        "videos": len(video_splits),
        "moments": len(moments),
        "captions": len(corpus),
        "captions_by_split": dict(sorted(splits.items())),
        "videos_by_split": dict(sorted(split_videos.items())),
        "mean_source_tokens": round(source.mean_tokens, 1),
        "mean_target_tokens": round(target.mean_tokens, 1),
        "flagged_captions": flagged,
        "by_status": corpus.counts_by_status(),
    }
