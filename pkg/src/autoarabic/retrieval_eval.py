"""Cross-modal retrieval scoring over precomputed embeddings or similarities.

Embeddings and similarity matrices travel as small binary files (float32,
little-endian, with a magic tag and explicit shape) plus text sidecars for
row and column ids, so results are reproducible byte-for-byte across
machines. Ranking follows the best-ground-truth convention: a query's rank
is decided by its highest-scoring relevant candidate, with ties broken in
the query's favor unless the pessimistic policy is asked for.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from .corpus import CorpusParseError, CorpusValidationError

EMBEDDINGS_MAGIC = b"EMB1"
SIMILARITY_MAGIC = b"SIM1"

DIRECTIONS = ("t2v", "v2t")
TIE_POLICIES = ("optimistic", "pessimistic")
BUDGET_ORDER = ("zero", "few", "full")

_HEADER = struct.Struct("<4sII")


def _write_ids(path: Path, ids: Sequence[str]) -> None:
    for value in ids:
        if not value or "\n" in value or "\t" in value:
            raise CorpusValidationError(f"id not writable as a sidecar line: {value!r}")
    path.write_text("".join(i + "\n" for i in ids), encoding="utf-8")


def _read_ids(path: Path, expected: int) -> List[str]:
    try:
        raw = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CorpusParseError(f"missing id sidecar: {path}") from None
    ids = raw.splitlines()
    if any(not i for i in ids):
        raise CorpusParseError(f"{path}: empty id line")
    if len(ids) != expected:
        raise CorpusParseError(
            f"{path}: {len(ids)} ids but the matrix has {expected} rows"
        )
    if len(set(ids)) != len(ids):
        raise CorpusValidationError(f"{path}: duplicate ids")
    return ids


def _write_matrix(path: Path, magic: bytes, matrix: np.ndarray) -> None:
    arr = np.ascontiguousarray(np.asarray(matrix), dtype="<f4")
    if arr.ndim != 2:
        raise CorpusValidationError(f"expected a 2-d matrix, got shape {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def _read_matrix(path: Path, magic: bytes) -> np.ndarray:
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError:
        raise CorpusParseError(f"missing file: {path}") from None
    if len(raw) < _HEADER.size:
        raise CorpusParseError(f"{path}: file shorter than its header")
    tag, rows, cols = _HEADER.unpack_from(raw)
    if tag != magic:
        raise CorpusParseError(
            f"{path}: bad magic {tag!r}, expected {magic.decode()!r}"
        )
    expected = _HEADER.size + rows * cols * 4
    if len(raw) != expected:
        raise CorpusParseError(
            f"{path}: {len(raw)} bytes, expected {expected} for a "
            f"{rows}x{cols} float32 matrix"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return data.reshape(rows, cols).copy()


def write_embeddings(path, ids: Sequence[str], matrix) -> None:
    path = Path(path)
    arr = np.asarray(matrix)
    if arr.ndim != 2 or arr.shape[0] != len(ids):
        raise CorpusValidationError(
            f"{len(ids)} ids but embedding matrix has shape {arr.shape}"
        )
    _write_matrix(path, EMBEDDINGS_MAGIC, arr)
    _write_ids(Path(str(path) + ".ids"), ids)


def read_embeddings(path) -> Tuple[List[str], np.ndarray]:
    path = Path(path)
    matrix = _read_matrix(path, EMBEDDINGS_MAGIC)
    ids = _read_ids(Path(str(path) + ".ids"), matrix.shape[0])
    return ids, matrix


def write_similarity(
    path, query_ids: Sequence[str], candidate_ids: Sequence[str], matrix
) -> None:
    path = Path(path)
    arr = np.asarray(matrix)
    if arr.ndim != 2 or arr.shape != (len(query_ids), len(candidate_ids)):
        raise CorpusValidationError(
            f"matrix shape {arr.shape} does not match "
            f"{len(query_ids)} queries x {len(candidate_ids)} candidates"
        )
    _write_matrix(path, SIMILARITY_MAGIC, arr)
    _write_ids(Path(str(path) + ".qids"), query_ids)
    _write_ids(Path(str(path) + ".cids"), candidate_ids)


def read_similarity(path) -> Tuple[List[str], List[str], np.ndarray]:
    path = Path(path)
    matrix = _read_matrix(path, SIMILARITY_MAGIC)
    query_ids = _read_ids(Path(str(path) + ".qids"), matrix.shape[0])
    candidate_ids = _read_ids(Path(str(path) + ".cids"), matrix.shape[1])
    return query_ids, candidate_ids, matrix


def read_ground_truth(path) -> Dict[str, List[str]]:
    """TSV of ``query_id<TAB>candidate_id``; repeated query ids accumulate."""
    out: Dict[str, List[str]] = {}
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CorpusParseError(f"missing ground-truth file: {path}") from None
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise CorpusParseError(f"{path}: line {lineno}: expected 2 TSV fields")
        out.setdefault(parts[0], []).append(parts[1])
    return out


def write_ground_truth(path, mapping: Mapping[str, Iterable[str]]) -> None:
    lines = []
    for qid in mapping:
        for cid in mapping[qid]:
            lines.append(f"{qid}\t{cid}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


def cosine_similarity(queries, candidates) -> np.ndarray:
    """Row-normalized dot products; zero vectors are rejected, not guessed at."""
    q = np.asarray(queries, dtype=np.float64)
    c = np.asarray(candidates, dtype=np.float64)
    if q.ndim != 2 or c.ndim != 2 or q.shape[1] != c.shape[1]:
        raise CorpusValidationError(
            f"incompatible shapes {q.shape} and {c.shape} for cosine similarity"
        )
    qn = np.linalg.norm(q, axis=1)
    cn = np.linalg.norm(c, axis=1)
    bad_q = np.flatnonzero(qn == 0)
    bad_c = np.flatnonzero(cn == 0)
    if bad_q.size or bad_c.size:
        raise CorpusValidationError(
            "zero-norm embedding rows: "
            f"queries {bad_q.tolist()[:10]}, candidates {bad_c.tolist()[:10]}"
        )
    return (q / qn[:, None]) @ (c / cn[:, None]).T


def ranks_from_similarity(
    similarity,
    query_ids: Sequence[str],
    candidate_ids: Sequence[str],
    ground_truth: Mapping[str, Sequence[str]],
    tie_policy: str = "optimistic",
) -> np.ndarray:
    """Retrieval rank per query row.

    The rank is one plus the number of candidates scoring strictly above
    the best-scoring relevant candidate. Under ``pessimistic``, irrelevant
    candidates tied with that score also count against the query.
    """
    if tie_policy not in TIE_POLICIES:
        raise CorpusValidationError(
            f"unknown tie policy {tie_policy!r}; expected one of {TIE_POLICIES}"
        )
    sim = np.asarray(similarity)
    if sim.ndim != 2 or sim.shape != (len(query_ids), len(candidate_ids)):
        raise CorpusValidationError(
            f"similarity shape {sim.shape} does not match "
            f"{len(query_ids)} queries x {len(candidate_ids)} candidates"
        )
    index = {cid: j for j, cid in enumerate(candidate_ids)}
    if len(index) != len(candidate_ids):
        raise CorpusValidationError("duplicate candidate ids")

    missing = [q for q in query_ids if not ground_truth.get(q)]
    if missing:
        raise CorpusValidationError(
            f"no ground truth for {len(missing)} query(s): "
            + ", ".join(missing[:10]),
            missing,
        )
    unknown = sorted(
        {
            c
            for q in query_ids
            for c in ground_truth[q]
            if c not in index
        }
    )
    if unknown:
        raise CorpusValidationError(
            "ground truth names unknown candidates: " + ", ".join(unknown[:10]),
            unknown,
        )

    ranks = np.empty(len(query_ids), dtype=np.int64)
    for i, qid in enumerate(query_ids):
        row = sim[i]
        gt_cols = [index[c] for c in ground_truth[qid]]
        best = row[gt_cols].max()
        rank = 1 + int((row > best).sum())
        if tie_policy == "pessimistic":
            tied = int((row == best).sum())
            tied_gt = int((row[gt_cols] == best).sum())
            rank += tied - tied_gt
        ranks[i] = rank
    return ranks


@dataclass(frozen=True)
class RetrievalReport:
    direction: str
    n_queries: int
    n_candidates: int
    recall_at_1: float
    recall_at_5: float
    recall_at_10: float
    median_rank: int
    mean_rank: float

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "queries": self.n_queries,
            "candidates": self.n_candidates,
            "recall_at_1": round(self.recall_at_1, 4),
            "recall_at_5": round(self.recall_at_5, 4),
            "recall_at_10": round(self.recall_at_10, 4),
            "median_rank": self.median_rank,
            "mean_rank": round(self.mean_rank, 1),
        }

    def format_row(self) -> str:
        return (
            f"{self.direction}  R@1 {self.recall_at_1:.4f}  "
            f"R@5 {self.recall_at_5:.4f}  R@10 {self.recall_at_10:.4f}  "
            f"MedR {self.median_rank}  MeanR {self.mean_rank:.1f}"
        )


def report_from_ranks(
    direction: str, ranks, n_candidates: int
) -> RetrievalReport:
    """Metrics from raw rank lists; the entry point for replaying published
    numbers as well as the tail of every matrix evaluation."""
    if direction not in DIRECTIONS:
        raise CorpusValidationError(
            f"unknown direction {direction!r}; expected one of {DIRECTIONS}"
        )
    arr = np.asarray(ranks, dtype=np.int64)
    if arr.ndim != 1 or arr.size == 0:
        raise CorpusValidationError("ranks must be a non-empty 1-d sequence")
    if arr.min() < 1 or arr.max() > n_candidates:
        raise CorpusValidationError(
            f"ranks must lie in 1..{n_candidates}, "
            f"got {int(arr.min())}..{int(arr.max())}"
        )
    ordered = np.sort(arr)
    return RetrievalReport(
        direction=direction,
        n_queries=int(arr.size),
        n_candidates=int(n_candidates),
        recall_at_1=float((arr <= 1).mean()),
        recall_at_5=float((arr <= 5).mean()),
        recall_at_10=float((arr <= 10).mean()),
        # Lower median: no averaging of the two middle ranks on even counts.
        median_rank=int(ordered[(arr.size - 1) // 2]),
        mean_rank=float(arr.mean()),
    )


def evaluate(
    similarity,
    query_ids: Sequence[str],
    candidate_ids: Sequence[str],
    ground_truth: Mapping[str, Sequence[str]],
    direction: str,
    tie_policy: str = "optimistic",
) -> RetrievalReport:
    ranks = ranks_from_similarity(
        similarity, query_ids, candidate_ids, ground_truth, tie_policy
    )
    return report_from_ranks(direction, ranks, len(candidate_ids))


def evaluate_files(
    similarity_path, ground_truth_path, direction: str, tie_policy: str = "optimistic"
) -> RetrievalReport:
    query_ids, candidate_ids, matrix = read_similarity(similarity_path)
    ground_truth = read_ground_truth(ground_truth_path)
    return evaluate(matrix, query_ids, candidate_ids, ground_truth, direction, tie_policy)


def compare_reports(a: RetrievalReport, b: RetrievalReport) -> Dict[str, float]:
    """Metric deltas ``b - a``; both reports must score the same direction."""
    if a.direction != b.direction:
        raise CorpusValidationError(
            f"cannot compare {a.direction} against {b.direction}"
        )
    return {
        "recall_at_1": b.recall_at_1 - a.recall_at_1,
        "recall_at_5": b.recall_at_5 - a.recall_at_5,
        "recall_at_10": b.recall_at_10 - a.recall_at_10,
        "median_rank": b.median_rank - a.median_rank,
        "mean_rank": b.mean_rank - a.mean_rank,
    }


def budget_sweep(
    reports: Mapping[str, RetrievalReport]
) -> List[Tuple[str, RetrievalReport]]:
    """Order per-budget reports zero, few, full; anything else is an error."""
    missing = [b for b in BUDGET_ORDER if b not in reports]
    if missing:
        raise CorpusValidationError("missing budgets: " + ", ".join(missing), missing)
    unknown = sorted(set(reports) - set(BUDGET_ORDER))
    if unknown:
        raise CorpusValidationError("unknown budgets: " + ", ".join(unknown), unknown)
    return [(b, reports[b]) for b in BUDGET_ORDER]
