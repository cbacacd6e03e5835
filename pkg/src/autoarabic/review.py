"""Human post-editing: budgeted queues, edits, approval, materialization.

The editing budget decides how much human attention the corpus gets:
``zero`` ships raw translations untouched, ``few`` reviews only flagged
captions, ``full`` reviews everything. Edits use optimistic concurrency (a
caption's version is its history length), every change lands in the
append-only history, and ``materialize`` projects the corpus to the text
each budget would publish. The HTTP service here is the only write path a
review frontend needs.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .arabic_text import normalize_for_compare, strip_diacritics
from .corpus import (
    CaptionRecord,
    CaptionStatus,
    Corpus,
    CorpusError,
    CorpusStore,
    CorpusValidationError,
    EditRecord,
    ErrorCategory,
    FILE_HEADER,
    FlagRecord,
    category_from_token,
    utcnow,
)

logger = logging.getLogger(__name__)


class Budget(str, Enum):
    ZERO = "zero"
    FEW = "few"
    FULL = "full"

    def __str__(self) -> str:
        return self.value


class ReviewConflict(CorpusError):
    """Stale version or an attempt to change an approved caption."""

    def __init__(self, message: str, current_version: Optional[int] = None):
        super().__init__(message)
        self.current_version = current_version


def parse_budget(value) -> Budget:
    if isinstance(value, Budget):
        return value
    try:
        return Budget(str(value).lower())
    except ValueError:
        raise CorpusValidationError(
            f"unknown budget {value!r}; expected zero, few, or full"
        ) from None


def _was_flagged(record: CaptionRecord, flags: Optional[FlagRecord]) -> bool:
    if record.flags:
        return True
    if flags is not None and (flags.categories or flags.judge_parse_error):
        return True
    return False


def suggested_fix(
    record: CaptionRecord, flags: Optional[FlagRecord]
) -> Optional[str]:
    """Mechanical fix offered to the reviewer, when one is safe.

    Only the pure-diacritics case has one: stripping marks cannot change
    meaning. Anything else needs human judgement.
    """
    categories = (
        set(flags.categories) if flags is not None and flags.categories else set(record.flags)
    )
    if flags is not None and flags.judge_parse_error:
        return None
    if categories != {ErrorCategory.DIACRITICS}:
        return None
    text = record.text
    if text is None:
        return None
    fixed = strip_diacritics(text)
    return fixed if fixed != text else None


@dataclass
class ReviewTask:
    caption_id: str
    state: str  # "open" or "done"
    status: CaptionStatus
    split: str
    source_text: str
    raw_translation: Optional[str]
    current_text: Optional[str]
    flags: List[str]
    flag_sources: Dict[str, str]
    judge_parse_error: bool
    suggested_fix: Optional[str]
    version: int

    def to_dict(self) -> dict:
        return {
            "caption_id": self.caption_id,
            "state": self.state,
            "status": self.status.value,
            "split": self.split,
            "source_text": self.source_text,
            "raw_translation": self.raw_translation,
            "current_text": self.current_text,
            "flags": list(self.flags),
            "flag_sources": dict(self.flag_sources),
            "judge_parse_error": self.judge_parse_error,
            "suggested_fix": self.suggested_fix,
            "version": self.version,
        }


def _task_for(record: CaptionRecord, flags: Optional[FlagRecord]) -> ReviewTask:
    state = (
        "done"
        if record.status in (CaptionStatus.EDITED, CaptionStatus.APPROVED)
        else "open"
    )
    return ReviewTask(
        caption_id=record.caption_id,
        state=state,
        status=record.status,
        split=record.split,
        source_text=record.source_text,
        raw_translation=record.raw_translation,
        current_text=record.current_text,
        flags=sorted(c.value for c in record.flags),
        flag_sources=(
            {c.value: s for c, s in sorted(flags.sources.items())} if flags else {}
        ),
        judge_parse_error=bool(flags.judge_parse_error) if flags else False,
        suggested_fix=suggested_fix(record, flags),
        version=len(record.history),
    )


def build_queue(corpus: Corpus, budget) -> List[ReviewTask]:
    """Review tasks for a budget: flagged captions first, then by id."""
    budget = parse_budget(budget)
    if budget is Budget.ZERO:
        return []
    tasks = []
    for record in corpus.captions():
        if record.status is CaptionStatus.PENDING:
            continue
        flags = corpus.flag_records.get(record.caption_id)
        if budget is Budget.FEW and not _was_flagged(record, flags):
            continue
        tasks.append(_task_for(record, flags))
    tasks.sort(key=lambda t: (0 if t.flags or t.judge_parse_error else 1, t.caption_id))
    return tasks


def _check_version(record: CaptionRecord, version: int) -> None:
    current = len(record.history)
    if version != current:
        raise ReviewConflict(
            f"{record.caption_id}: version {version} is stale, "
            f"caption is at {current}",
            current_version=current,
        )


def _parse_categories(categories: Iterable) -> tuple:
    return tuple(
        c if isinstance(c, ErrorCategory) else category_from_token(str(c))
        for c in categories
    )


def submit_edit(
    corpus: Corpus,
    caption_id: str,
    after: str,
    categories: Iterable = (),
    annotator_id: str = "",
    version: int = 0,
    timestamp: Optional[datetime] = None,
) -> CaptionRecord:
    """Record a post-edit. ``version`` must equal the caption's history length."""
    if not annotator_id or not annotator_id.strip():
        raise CorpusValidationError("annotator_id is required")
    if not normalize_for_compare(after):
        raise CorpusValidationError("edited text must not be empty")
    cats = _parse_categories(categories)
    record = corpus.get(caption_id)
    with corpus.lock:
        _check_version(record, version)
        if record.status is CaptionStatus.APPROVED:
            raise ReviewConflict(
                f"{caption_id}: caption is approved and closed to edits",
                current_version=len(record.history),
            )
        if record.status is CaptionStatus.PENDING:
            raise CorpusValidationError(
                f"{caption_id}: nothing to edit, caption is not translated yet"
            )
        edit = EditRecord(
            before=record.text or "",
            after=after,
            categories=cats,
            annotator_id=annotator_id,
            timestamp=timestamp or utcnow(),
        )
        record.transition(CaptionStatus.EDITED)
        record.append_edit(edit)
    return record


def approve(
    corpus: Corpus,
    caption_id: str,
    annotator_id: str = "",
    version: int = 0,
    timestamp: Optional[datetime] = None,
) -> CaptionRecord:
    """Close a caption. Approving an approved caption is a warned no-op."""
    if not annotator_id or not annotator_id.strip():
        raise CorpusValidationError("annotator_id is required")
    record = corpus.get(caption_id)
    with corpus.lock:
        if record.status is CaptionStatus.APPROVED:
            logger.warning("%s: already approved, ignoring", caption_id)
            return record
        _check_version(record, version)
        if record.status is CaptionStatus.PENDING:
            raise CorpusValidationError(
                f"{caption_id}: cannot approve an untranslated caption"
            )
        text = record.text or ""
        edit = EditRecord(
            before=text,
            after=text,
            categories=(),
            annotator_id=annotator_id,
            timestamp=timestamp or utcnow(),
        )
        record.transition(CaptionStatus.APPROVED)
        record.append_edit(edit)
    return record


def _materialized_text(
    record: CaptionRecord, flags: Optional[FlagRecord], budget: Budget
) -> str:
    raw = record.raw_translation or ""
    if budget is Budget.ZERO:
        return raw
    if budget is Budget.FEW:
        if _was_flagged(record, flags) and record.current_text is not None:
            return record.current_text
        return raw
    return record.current_text if record.current_text is not None else raw


def materialize(corpus: Corpus, budget) -> Dict[str, str]:
    """Caption id -> published text under a budget, in caption-id order.

    Pending captions have nothing to publish and are left out.
    """
    budget = parse_budget(budget)
    out: Dict[str, str] = {}
    for record in corpus.captions():
        if record.status is CaptionStatus.PENDING or record.raw_translation is None:
            continue
        flags = corpus.flag_records.get(record.caption_id)
        out[record.caption_id] = _materialized_text(record, flags, budget)
    return out


def render_materialized(corpus: Corpus, budget) -> str:
    """Corpus-file bytes with ``current_text`` replaced by the budget view.

    This is the single serialization used by both the export endpoint and
    the library, so the two can never drift apart.
    """
    budget = parse_budget(budget)
    texts = materialize(corpus, budget)
    lines = [FILE_HEADER]
    for record in corpus.captions():
        if record.caption_id not in texts:
            continue
        data = record.to_dict()
        data["current_text"] = texts[record.caption_id]
        lines.append(json.dumps(data, ensure_ascii=False, separators=(",", ":")))
    return "\n".join(lines) + "\n"


class EditRequest(BaseModel):
    after: str
    categories: List[str] = []
    annotator_id: str
    version: int


class ApproveRequest(BaseModel):
    annotator_id: str
    version: int


def _detail(corpus: Corpus, record: CaptionRecord) -> dict:
    task = _task_for(record, corpus.flag_records.get(record.caption_id))
    data = task.to_dict()
    data["history"] = [e.to_dict() for e in record.history]
    return data


def create_app(
    corpus: Corpus,
    store: Optional[CorpusStore] = None,
    default_budget: Budget = Budget.FEW,
    static_dir: Optional[str] = None,
) -> FastAPI:
    app = FastAPI(title="caption review")
    app.state.corpus = corpus
    app.state.store = store
    app.state.default_budget = default_budget

    def _get_record(caption_id: str) -> CaptionRecord:
        if caption_id not in corpus:
            raise HTTPException(status_code=404, detail=f"unknown caption: {caption_id}")
        return corpus.get(caption_id)

    def _persist(record: CaptionRecord) -> None:
        if store is not None:
            store.append(record)

    @app.get("/api/queue")
    def get_queue(budget: Optional[str] = Query(default=None)):
        try:
            chosen = parse_budget(budget) if budget else default_budget
            tasks = build_queue(corpus, chosen)
        except CorpusValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return {
            "budget": chosen.value,
            "open": sum(1 for t in tasks if t.state == "open"),
            "done": sum(1 for t in tasks if t.state == "done"),
            "tasks": [t.to_dict() for t in tasks],
        }

    @app.get("/api/captions/{caption_id}")
    def get_caption(caption_id: str):
        return _detail(corpus, _get_record(caption_id))

    @app.post("/api/captions/{caption_id}/edit")
    def post_edit(caption_id: str, body: EditRequest):
        record = _get_record(caption_id)
        try:
            record = submit_edit(
                corpus,
                caption_id,
                after=body.after,
                categories=body.categories,
                annotator_id=body.annotator_id,
                version=body.version,
            )
        except ReviewConflict as exc:
            raise HTTPException(
                status_code=409,
                detail={"message": str(exc), "current_version": exc.current_version},
            ) from None
        except CorpusValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        _persist(record)
        return _detail(corpus, record)

    @app.post("/api/captions/{caption_id}/approve")
    def post_approve(caption_id: str, body: ApproveRequest):
        record = _get_record(caption_id)
        try:
            record = approve(
                corpus,
                caption_id,
                annotator_id=body.annotator_id,
                version=body.version,
            )
        except ReviewConflict as exc:
            raise HTTPException(
                status_code=409,
                detail={"message": str(exc), "current_version": exc.current_version},
            ) from None
        except CorpusValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        _persist(record)
        return _detail(corpus, record)

    @app.get("/api/stats")
    def get_stats():
        flag_counts = {c.value: 0 for c in ErrorCategory}
        edits = 0
        parse_errors = 0
        for record in corpus.captions():
            for c in record.flags:
                flag_counts[c.value] += 1
            edits += len(record.history)
        for flags in corpus.flag_records.values():
            if flags.judge_parse_error:
                parse_errors += 1
        return {
            "captions": len(corpus),
            "by_status": corpus.counts_by_status(),
            "flag_counts": flag_counts,
            "history_events": edits,
            "judge_parse_errors": parse_errors,
            "open_tasks": {
                b.value: sum(1 for t in build_queue(corpus, b) if t.state == "open")
                for b in (Budget.FEW, Budget.FULL)
            },
        }

    @app.get("/api/export")
    def get_export(budget: Optional[str] = Query(default=None)):
        try:
            chosen = parse_budget(budget) if budget else default_budget
            payload = render_materialized(corpus, chosen)
        except CorpusValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return PlainTextResponse(payload, media_type="text/plain; charset=utf-8")

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def serve(
    corpus: Corpus,
    store: Optional[CorpusStore] = None,
    host: str = "127.0.0.1",
    port: int = 8000,
    default_budget: Budget = Budget.FEW,
    static_dir: Optional[str] = None,
) -> None:
    import uvicorn

    app = create_app(corpus, store, default_budget, static_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
