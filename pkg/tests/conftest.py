"""Shared builders for corpus objects used across the suite."""

from datetime import datetime, timezone

import pytest

from autoarabic.corpus import (
    CaptionRecord,
    CaptionStatus,
    Corpus,
    EditRecord,
    ErrorCategory,
    FlagRecord,
    Moment,
)

FIXED_TS = datetime(2026, 1, 15, 9, 30, 0, tzinfo=timezone.utc)


def make_caption(
    cid="v1#0-0#0",
    video="v1",
    split="train",
    start=0,
    end=0,
    source="A man walks.",
    raw=None,
    current=None,
    status=CaptionStatus.PENDING,
    flags=(),
):
    return CaptionRecord(
        caption_id=cid,
        moment=Moment(video, start, end),
        split=split,
        source_text=source,
        raw_translation=raw,
        current_text=current,
        status=status,
        flags={ErrorCategory(f) if isinstance(f, str) else f for f in flags},
    )


def make_edit(before, after, categories=(), annotator="ann-1", ts=FIXED_TS):
    return EditRecord(
        before=before,
        after=after,
        categories=tuple(
            ErrorCategory(c) if isinstance(c, str) else c for c in categories
        ),
        annotator_id=annotator,
        timestamp=ts,
    )


@pytest.fixture
def small_corpus():
    """Four captions: flagged, clean translated, pending, and approved."""
    corpus = Corpus()
    flagged = make_caption(
        cid="vid-a#0-0#0",
        video="vid-a",
        source="The camera zooms in.",
        raw="تقترب الكاميرا.",
        status=CaptionStatus.FLAGGED,
        flags=(ErrorCategory.LOANWORD,),
    )
    corpus.add(flagged)
    corpus.set_flags(
        FlagRecord(
            caption_id=flagged.caption_id,
            categories={ErrorCategory.LOANWORD},
            sources={ErrorCategory.LOANWORD: "rule"},
            created_at=FIXED_TS,
        )
    )
    clean = make_caption(
        cid="vid-b#1-2#0",
        video="vid-b",
        split="val",
        start=1,
        end=2,
        source="A dog runs.",
        raw="يجري كلب.",
        status=CaptionStatus.TRANSLATED,
    )
    corpus.add(clean)
    corpus.set_flags(FlagRecord(caption_id=clean.caption_id, created_at=FIXED_TS))
    corpus.add(
        make_caption(cid="vid-c#0-1#0", video="vid-c", source="A child waves.")
    )
    approved = make_caption(
        cid="vid-d#2-3#0",
        video="vid-d",
        split="test",
        start=2,
        end=3,
        source="Someone opens a door.",
        raw="يفتح شخص الباب.",
        current="يفتح شخص الباب.",
        status=CaptionStatus.APPROVED,
    )
    approved.history.append(
        make_edit("يفتح شخص الباب.", "يفتح شخص الباب.", annotator="ann-2")
    )
    corpus.add(approved)
    return corpus
