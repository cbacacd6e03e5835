"""Canonical caption data model and durable corpus storage.

A corpus is a set of caption records keyed by caption id, each tied to one
video moment and carrying the full localization lifecycle: source text, raw
machine translation, the current working text, error flags, and an
append-only edit history. Storage is a line-oriented UTF-8 file with a fixed
header, one JSON object per caption, deterministic key order, and captions
sorted by id, so the same corpus always serializes to the same bytes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

logger = logging.getLogger(__name__)

FILE_HEADER = "AUTOARABIC-CORPUS v1"
_HEADER_PREFIX = "AUTOARABIC-CORPUS v"

SPLITS = ("train", "val", "test")

# Segment grid for the source benchmark: clips are divided into 5-second
# segments and a video never exceeds six of them.
MAX_SEGMENTS = 6


class CorpusError(Exception):
    """Base class for everything raised by this module."""


class CorpusParseError(CorpusError):
    """Malformed input; message names the file and line or record."""


class CorpusVersionError(CorpusError):
    """Recognized file with an unsupported format version."""


class CorpusIntegrityError(CorpusError):
    """Structurally damaged store, e.g. a truncated final line."""


class CorpusValidationError(CorpusError):
    """Well-formed input that violates a domain invariant."""

    def __init__(self, message: str, offending_ids: Sequence[str] = ()):
        super().__init__(message)
        self.offending_ids = list(offending_ids)


class LifecycleError(CorpusError):
    """Disallowed caption status transition."""


class ErrorCategory(str, Enum):
    """Closed set of translation error categories."""

    LEXICAL = "lexical"
    LITERAL = "literal"
    HALLUCINATION = "hallucination"
    TENSE_SHIFT = "tense_shift"
    LOANWORD = "loanword"
    DIACRITICS = "diacritics"

    def __str__(self) -> str:  # keep f-strings readable
        return self.value


CATEGORY_TOKENS = tuple(c.value for c in ErrorCategory)


def category_from_token(token: str) -> ErrorCategory:
    try:
        return ErrorCategory(token)
    except ValueError:
        raise CorpusValidationError(f"unknown error category token: {token!r}") from None


class CaptionStatus(str, Enum):
    PENDING = "pending"
    TRANSLATED = "translated"
    FLAGGED = "flagged"
    EDITED = "edited"
    APPROVED = "approved"

    def __str__(self) -> str:
        return self.value


# Lifecycle: forward-only, except that an edited caption may be edited again.
_ALLOWED_TRANSITIONS = {
    CaptionStatus.PENDING: {CaptionStatus.TRANSLATED},
    CaptionStatus.TRANSLATED: {
        CaptionStatus.FLAGGED,
        CaptionStatus.EDITED,
        CaptionStatus.APPROVED,
    },
    CaptionStatus.FLAGGED: {CaptionStatus.EDITED, CaptionStatus.APPROVED},
    CaptionStatus.EDITED: {CaptionStatus.EDITED, CaptionStatus.APPROVED},
    CaptionStatus.APPROVED: set(),
}


def can_transition(old: CaptionStatus, new: CaptionStatus) -> bool:
    return new in _ALLOWED_TRANSITIONS[old]


def format_timestamp(dt: datetime) -> str:
    """RFC 3339 UTC with a Z suffix; fractional seconds only when present."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    dt = dt.astimezone(timezone.utc)
    base = dt.strftime("%Y-%m-%dT%H:%M:%S")
    if dt.microsecond:
        base += f".{dt.microsecond:06d}"
    return base + "Z"


def parse_timestamp(text: str) -> datetime:
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(raw)
    except ValueError:
        raise CorpusParseError(f"bad timestamp: {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class VideoRef:
    video_id: str
    split: str
    duration_segments: int

    def __post_init__(self):
        if self.split not in SPLITS:
            raise CorpusValidationError(
                f"unknown split {self.split!r} for video {self.video_id}"
            )
        if not 1 <= self.duration_segments <= MAX_SEGMENTS:
            raise CorpusValidationError(
                f"video {self.video_id}: duration_segments must be in "
                f"1..{MAX_SEGMENTS}, got {self.duration_segments}"
            )


@dataclass(frozen=True)
class Moment:
    video_id: str
    start_segment: int
    end_segment: int

    def __post_init__(self):
        if self.start_segment < 0 or self.end_segment < self.start_segment:
            raise CorpusValidationError(
                f"bad segment bounds for {self.video_id}: "
                f"{self.start_segment}..{self.end_segment}"
            )


@dataclass(frozen=True)
class EditRecord:
    """One post-editing event. History entries are never rewritten."""

    before: str
    after: str
    categories: Tuple[ErrorCategory, ...]
    annotator_id: str
    timestamp: datetime

    def to_dict(self) -> dict:
        return {
            "before": self.before,
            "after": self.after,
            "categories": sorted(c.value for c in self.categories),
            "annotator_id": self.annotator_id,
            "timestamp": format_timestamp(self.timestamp),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EditRecord":
        return cls(
            before=data["before"],
            after=data["after"],
            categories=tuple(
                category_from_token(t) for t in data.get("categories", [])
            ),
            annotator_id=data["annotator_id"],
            timestamp=parse_timestamp(data["timestamp"]),
        )


@dataclass
class FlagRecord:
    """Detector output for one caption: which categories fired and why."""

    caption_id: str
    categories: Set[ErrorCategory] = field(default_factory=set)
    sources: Dict[ErrorCategory, str] = field(default_factory=dict)
    judge_raw_output: Optional[str] = None
    judge_parse_error: bool = False
    created_at: datetime = field(default_factory=utcnow)

    def to_dict(self) -> dict:
        return {
            "caption_id": self.caption_id,
            "categories": sorted(c.value for c in self.categories),
            "sources": {c.value: s for c, s in sorted(self.sources.items())},
            "judge_raw_output": self.judge_raw_output,
            "judge_parse_error": self.judge_parse_error,
            "created_at": format_timestamp(self.created_at),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "FlagRecord":
        return cls(
            caption_id=data["caption_id"],
            categories={category_from_token(t) for t in data.get("categories", [])},
            sources={
                category_from_token(t): s for t, s in data.get("sources", {}).items()
            },
            judge_raw_output=data.get("judge_raw_output"),
            judge_parse_error=bool(data.get("judge_parse_error", False)),
            created_at=parse_timestamp(data["created_at"]),
        )


_CAPTION_KEYS = (
    "caption_id",
    "video_id",
    "split",
    "start_segment",
    "end_segment",
    "source_text",
    "raw_translation",
    "current_text",
    "status",
    "flags",
    "history",
)


@dataclass
class CaptionRecord:
    caption_id: str
    moment: Moment
    split: str
    source_text: str
    raw_translation: Optional[str] = None
    current_text: Optional[str] = None
    status: CaptionStatus = CaptionStatus.PENDING
    flags: Set[ErrorCategory] = field(default_factory=set)
    history: List[EditRecord] = field(default_factory=list)
    # Operational annotation only (e.g. a provider failure while translating);
    # deliberately absent from the file format.
    error_note: Optional[str] = None

    @property
    def video_id(self) -> str:
        return self.moment.video_id

    @property
    def text(self) -> Optional[str]:
        """The live text: latest edit if any, otherwise the raw translation."""
        return self.current_text if self.current_text is not None else self.raw_translation

    def transition(self, new: CaptionStatus) -> None:
        if not can_transition(self.status, new):
            raise LifecycleError(
                f"{self.caption_id}: cannot move from {self.status} to {new}"
            )
        self.status = new

    def append_edit(self, edit: EditRecord) -> None:
        self.history.append(edit)
        self.current_text = edit.after

    def to_dict(self) -> dict:
        return {
            "caption_id": self.caption_id,
            "video_id": self.moment.video_id,
            "split": self.split,
            "start_segment": self.moment.start_segment,
            "end_segment": self.moment.end_segment,
            "source_text": self.source_text,
            "raw_translation": self.raw_translation,
            "current_text": self.current_text,
            "status": self.status.value,
            "flags": sorted(c.value for c in self.flags),
            "history": [e.to_dict() for e in self.history],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CaptionRecord":
        missing = [k for k in _CAPTION_KEYS if k not in data]
        if missing:
            raise CorpusParseError(f"caption object missing keys: {', '.join(missing)}")
        try:
            status = CaptionStatus(data["status"])
        except ValueError:
            raise CorpusParseError(f"unknown status: {data['status']!r}") from None
        return cls(
            caption_id=data["caption_id"],
            moment=Moment(data["video_id"], data["start_segment"], data["end_segment"]),
            split=data["split"],
            source_text=data["source_text"],
            raw_translation=data["raw_translation"],
            current_text=data["current_text"],
            status=status,
            flags={category_from_token(t) for t in data["flags"]},
            history=[EditRecord.from_dict(e) for e in data["history"]],
        )

    def to_line(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_line(cls, line: str) -> "CaptionRecord":
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusParseError(f"bad JSON: {exc}") from None
        if not isinstance(data, dict):
            raise CorpusParseError("caption line is not a JSON object")
        return cls.from_dict(data)


class Corpus:
    """In-memory caption collection with single-writer locking.

    Reads never need the lock; every mutation goes through a method that
    takes it, so one writer and any number of readers can share an instance.
    """

    def __init__(self):
        self._captions: Dict[str, CaptionRecord] = {}
        self.videos: Dict[str, VideoRef] = {}
        self.flag_records: Dict[str, FlagRecord] = {}
        self._lock = threading.RLock()

    @property
    def lock(self) -> threading.RLock:
        return self._lock

    def __len__(self) -> int:
        return len(self._captions)

    def __contains__(self, caption_id: str) -> bool:
        return caption_id in self._captions

    def get(self, caption_id: str) -> CaptionRecord:
        try:
            return self._captions[caption_id]
        except KeyError:
            raise CorpusValidationError(
                f"unknown caption id: {caption_id}", [caption_id]
            ) from None

    def captions(self) -> List[CaptionRecord]:
        """All captions in ascending caption-id order."""
        return [self._captions[k] for k in sorted(self._captions)]

    def add(self, record: CaptionRecord) -> None:
        with self._lock:
            if record.caption_id in self._captions:
                raise CorpusValidationError(
                    f"duplicate caption id: {record.caption_id}", [record.caption_id]
                )
            self._captions[record.caption_id] = record

    def replace(self, record: CaptionRecord) -> None:
        with self._lock:
            self._captions[record.caption_id] = record

    def add_video(self, video: VideoRef) -> None:
        with self._lock:
            self.videos[video.video_id] = video

    def set_flags(self, record: FlagRecord) -> None:
        with self._lock:
            self.flag_records[record.caption_id] = record

    def query(
        self,
        split: Optional[str] = None,
        status: Optional[CaptionStatus] = None,
        category: Optional[ErrorCategory] = None,
    ) -> List[CaptionRecord]:
        out = []
        for rec in self.captions():
            if split is not None and rec.split != split:
                continue
            if status is not None and rec.status != status:
                continue
            if category is not None and category not in rec.flags:
                continue
            out.append(rec)
        return out

    def canonical_lines(self) -> List[str]:
        return [rec.to_line() for rec in self.captions()]

    def serialize(self) -> str:
        lines = [FILE_HEADER]
        lines.extend(self.canonical_lines())
        return "\n".join(lines) + "\n"

    def content_hash(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return self.canonical_lines() == other.canonical_lines()

    def __hash__(self):  # mutable container; identity hash is deliberate
        return id(self)

    def counts_by_status(self) -> Dict[str, int]:
        out = {s.value: 0 for s in CaptionStatus}
        for rec in self._captions.values():
            out[rec.status.value] += 1
        return out


class CorpusStore:
    """File-backed persistence: canonical snapshots plus an append log.

    ``snapshot`` rewrites the whole file canonically (atomic rename).
    ``append`` adds one full caption line after a snapshot, so a crash can
    lose at most the line being written; on load, later lines win. Flag
    records live in a ``.flags`` sidecar next to the corpus file.
    """

    def __init__(self, path):
        self.path = Path(path)

    @property
    def flags_path(self) -> Path:
        return Path(str(self.path) + ".flags")

    def snapshot(self, corpus: Corpus) -> None:
        payload = corpus.serialize().encode("utf-8")
        self._write_atomic(self.path, payload)
        flag_lines = [
            json.dumps(
                corpus.flag_records[cid].to_dict(),
                ensure_ascii=False,
                separators=(",", ":"),
            )
            for cid in sorted(corpus.flag_records)
        ]
        if flag_lines or self.flags_path.exists():
            self._write_atomic(
                self.flags_path,
                ("".join(line + "\n" for line in flag_lines)).encode("utf-8"),
            )

    @staticmethod
    def _write_atomic(path: Path, payload: bytes) -> None:
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def append(self, record: CaptionRecord) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(record.to_line() + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def append_flags(self, record: FlagRecord) -> None:
        line = json.dumps(record.to_dict(), ensure_ascii=False, separators=(",", ":"))
        with open(self.flags_path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def load(self, recover: bool = False) -> Corpus:
        """Read the store back into memory.

        Strict mode refuses damaged files. With ``recover=True`` a truncated
        final line (interrupted append) is dropped with a warning; damage
        anywhere else is still an error.
        """
        try:
            raw = self.path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise CorpusIntegrityError(f"no corpus file at {self.path}") from None
        if not raw:
            raise CorpusIntegrityError(f"{self.path}: empty file, missing header")

        truncated_tail = not raw.endswith("\n")
        lines = raw.split("\n")
        if truncated_tail:
            partial = lines.pop()
        else:
            lines.pop()  # artifact of the trailing newline

        if not lines:
            raise CorpusIntegrityError(f"{self.path}: missing header line")
        header = lines[0]
        if header != FILE_HEADER:
            if header.startswith(_HEADER_PREFIX):
                raise CorpusVersionError(
                    f"{self.path}: unsupported format version {header!r}, "
                    f"expected {FILE_HEADER!r}"
                )
            raise CorpusParseError(f"{self.path}: line 1: bad header {header!r}")

        if truncated_tail:
            if not recover:
                raise CorpusIntegrityError(
                    f"{self.path}: truncated final line (no trailing newline)"
                )
            logger.warning(
                "%s: dropping truncated final line (%d bytes)",
                self.path,
                len(partial.encode("utf-8")),
            )

        corpus = Corpus()
        for lineno, line in enumerate(lines[1:], start=2):
            if not line:
                raise CorpusParseError(f"{self.path}: line {lineno}: blank line")
            try:
                record = CaptionRecord.from_line(line)
            except CorpusParseError as exc:
                raise CorpusParseError(f"{self.path}: line {lineno}: {exc}") from None
            # Append log semantics: a later line supersedes an earlier one.
            corpus.replace(record)

        self._load_flags(corpus, recover)
        return corpus

    def _load_flags(self, corpus: Corpus, recover: bool) -> None:
        try:
            raw = self.flags_path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return
        truncated_tail = bool(raw) and not raw.endswith("\n")
        lines = raw.split("\n")
        lines.pop()  # partial tail or newline artifact
        if truncated_tail:
            if not recover:
                raise CorpusIntegrityError(f"{self.flags_path}: truncated final line")
            logger.warning("%s: dropping truncated final line", self.flags_path)
        for lineno, line in enumerate(lines, start=1):
            if not line:
                raise CorpusParseError(f"{self.flags_path}: line {lineno}: blank line")
            try:
                record = FlagRecord.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, CorpusError) as exc:
                raise CorpusParseError(
                    f"{self.flags_path}: line {lineno}: {exc}"
                ) from None
            corpus.set_flags(record)


def store(corpus: Corpus, path) -> CorpusStore:
    writer = CorpusStore(path)
    writer.snapshot(corpus)
    return writer


def load(path, recover: bool = False) -> Corpus:
    return CorpusStore(path).load(recover=recover)


def _majority_moment(video_id: str, times: Sequence[Sequence[int]]) -> Moment:
    """Pick the (start, end) pair most annotators agreed on; ties go to the
    earliest pair in (start, end) order."""
    counts: Dict[Tuple[int, int], int] = {}
    for pair in times:
        if len(pair) != 2:
            raise CorpusParseError(f"bad times entry for {video_id}: {pair!r}")
        key = (int(pair[0]), int(pair[1]))
        counts[key] = counts.get(key, 0) + 1
    best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
    return Moment(video_id, best[0], best[1])


def ingest_didemo(
    source_files: Iterable, split_assignment: Mapping[str, str]
) -> Corpus:
    """Build a fresh corpus from raw annotation files.

    Each file holds a JSON array (or one JSON object per line) of records
    with ``video``, ``description``, and ``times`` (a list of [start, end]
    segment pairs from individual annotators), plus optional
    ``num_segments``. ``split_assignment`` maps a file path or bare file
    name to one of train/val/test. Files are processed in sorted path order
    and records in file order, so identical inputs always produce an
    identical corpus.
    """
    paths = sorted(Path(p) for p in source_files)
    corpus = Corpus()
    durations: Dict[str, int] = {}
    moments_bounds: List[Tuple[str, Moment]] = []
    per_moment_ordinal: Dict[Tuple[str, int, int], int] = {}

    for path in paths:
        split = split_assignment.get(str(path), split_assignment.get(path.name))
        if split is None:
            raise CorpusValidationError(f"no split assigned for {path}")
        if split not in SPLITS:
            raise CorpusValidationError(f"bad split {split!r} for {path}")
        records = _read_source_records(path)
        for index, rec in enumerate(records):
            try:
                video_id = rec["video"]
                description = rec["description"]
                times = rec["times"]
            except (KeyError, TypeError):
                raise CorpusParseError(
                    f"{path}: record {index}: missing video/description/times"
                ) from None
            if not isinstance(description, str) or not description.strip():
                raise CorpusParseError(f"{path}: record {index}: empty description")
            if not times:
                raise CorpusParseError(f"{path}: record {index}: no times")
            moment = _majority_moment(video_id, times)
            if "num_segments" in rec:
                n = int(rec["num_segments"])
                durations[video_id] = max(durations.get(video_id, 0), n)
            key = (video_id, moment.start_segment, moment.end_segment)
            k = per_moment_ordinal.get(key, 0)
            per_moment_ordinal[key] = k + 1
            caption_id = f"{video_id}#{moment.start_segment}-{moment.end_segment}#{k}"
            record = CaptionRecord(
                caption_id=caption_id,
                moment=moment,
                split=split,
                source_text=description.strip(),
            )
            corpus.add(record)
            moments_bounds.append((caption_id, moment))

    video_splits: Dict[str, str] = {}
    for rec in corpus.captions():
        seen = video_splits.get(rec.video_id)
        if seen is not None and seen != rec.split:
            raise CorpusValidationError(
                f"video {rec.video_id} assigned to more than one split"
            )
        video_splits[rec.video_id] = rec.split

    observed: Dict[str, int] = {}
    for _, moment in moments_bounds:
        observed[moment.video_id] = max(
            observed.get(moment.video_id, 0), moment.end_segment + 1
        )
    for video_id, split in sorted(video_splits.items()):
        duration = durations.get(video_id, observed[video_id])
        corpus.add_video(VideoRef(video_id, split, duration))

    bad = [
        cid
        for cid, moment in moments_bounds
        if moment.end_segment >= corpus.videos[moment.video_id].duration_segments
    ]
    if bad:
        raise CorpusValidationError(
            f"{len(bad)} caption(s) extend past their video's final segment: "
            + ", ".join(sorted(bad)[:10]),
            sorted(bad),
        )
    return corpus


def _read_source_records(path: Path) -> List[dict]:
    try:
        raw = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CorpusParseError(f"missing source file: {path}") from None
    stripped = raw.lstrip()
    if not stripped:
        raise CorpusParseError(f"{path}: empty source file")
    if stripped.startswith("["):
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CorpusParseError(f"{path}: line {exc.lineno}: {exc.msg}") from None
        if not isinstance(data, list):
            raise CorpusParseError(f"{path}: expected a JSON array")
        return data
    records = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise CorpusParseError(f"{path}: line {lineno}: {exc.msg}") from None
    return records
