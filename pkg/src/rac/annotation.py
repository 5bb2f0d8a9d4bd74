"""Human-coder annotation collection and agreement reporting.

Coders work through the same seeded sample of notes in the same order, may
not skip, and never see the reference codes. Submissions are persisted to an
append-only JSONL log before they are acknowledged; replaying the log after
a crash rebuilds the exact acknowledged state (a resubmission replaces the
earlier record for that annotator/note pair).
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .corpus import CodeTitleTable
from .metrics import set_agreement
from .numerics import Rng


class AnnotationError(ValueError):
    pass


@dataclass(frozen=True)
class AnnotationRecord:
    annotator_id: str
    note_id: str
    codes: frozenset[str]
    started_at: float
    submitted_at: float

    def __post_init__(self):
        if self.submitted_at < self.started_at:
            raise AnnotationError("submitted_at must be >= started_at")

    def to_json(self) -> str:
        payload = asdict(self)
        payload["codes"] = sorted(self.codes)
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "AnnotationRecord":
        payload = json.loads(line)
        return cls(
            annotator_id=str(payload["annotator_id"]),
            note_id=str(payload["note_id"]),
            codes=frozenset(payload["codes"]),
            started_at=float(payload["started_at"]),
            submitted_at=float(payload["submitted_at"]),
        )


class AnnotationStore:
    """Append-only JSONL record log; one writer, lock-free snapshot reads."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: dict[tuple[str, str], AnnotationRecord] = {}
        if self.path.exists():
            self._replay()
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.touch()

    def _replay(self) -> None:
        raw = self.path.read_text(encoding="utf-8")
        lines = raw.split("\n")
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                record = AnnotationRecord.from_json(line)
            except (json.JSONDecodeError, KeyError):
                # a torn final line is an unacknowledged write; anything else
                # is real corruption
                if i == len(lines) - 1:
                    break
                raise AnnotationError(f"{self.path}:{i + 1}: corrupt annotation record")
            self._records[(record.annotator_id, record.note_id)] = record

    def append(self, record: AnnotationRecord) -> None:
        """Durably persist (write, flush, fsync) before updating the snapshot."""
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(record.to_json() + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            self._records[(record.annotator_id, record.note_id)] = record

    def records(self) -> list[AnnotationRecord]:
        return list(self._records.values())

    def by_annotator(self, annotator_id: str) -> dict[str, AnnotationRecord]:
        return {
            note_id: rec
            for (annotator, note_id), rec in self._records.items()
            if annotator == annotator_id
        }

    def annotators(self) -> list[str]:
        return sorted({annotator for annotator, _ in self._records})

    def __len__(self) -> int:
        return len(self._records)


def sample_note_ids(note_ids: list[str], sample_size: int, seed: int) -> list[str]:
    """Seeded sample without replacement; identical for every annotator."""
    if sample_size > len(note_ids):
        raise AnnotationError(
            f"sample_size {sample_size} exceeds the {len(note_ids)} available notes"
        )
    perm = Rng(seed).permutation(len(note_ids))
    return [note_ids[int(i)] for i in perm[:sample_size]]


class AnnotationSession:
    """One coder's queue over the shared note sample; order is enforced."""

    def __init__(self, annotator_id: str, queue: list[str], store: AnnotationStore):
        self.annotator_id = annotator_id
        self.queue = list(queue)
        self._store = store

    @property
    def completed(self) -> set[str]:
        done = set(self._store.by_annotator(self.annotator_id))
        return {n for n in self.queue if n in done}

    @property
    def completed_count(self) -> int:
        return len(self.completed)

    @property
    def next_note_id(self) -> str | None:
        done = self.completed
        for note_id in self.queue:
            if note_id not in done:
                return note_id
        return None

    def state(self) -> dict:
        return {
            "annotator_id": self.annotator_id,
            "queue_size": len(self.queue),
            "completed": self.completed_count,
            "next_note_id": self.next_note_id,
            "done": self.next_note_id is None,
        }


class AnnotationService:
    """Sessions + store + code search against one dataset."""

    def __init__(self, note_ids: list[str], code_table: CodeTitleTable,
                 store: AnnotationStore, sample_size: int | None = None, seed: int = 0):
        sample_size = len(note_ids) if sample_size is None else sample_size
        self.sample = sample_note_ids(note_ids, sample_size, seed)
        self.code_table = code_table
        self.store = store
        self._sessions: dict[str, AnnotationSession] = {}
        self._lock = threading.Lock()

    def create_session(self, annotator_id: str) -> AnnotationSession:
        with self._lock:
            if annotator_id in self._sessions:
                raise AnnotationError(f"session for annotator {annotator_id!r} already exists")
            session = AnnotationSession(annotator_id, self.sample, self.store)
            self._sessions[annotator_id] = session
            return session

    def get_or_create_session(self, annotator_id: str) -> AnnotationSession:
        with self._lock:
            if annotator_id not in self._sessions:
                self._sessions[annotator_id] = AnnotationSession(annotator_id, self.sample, self.store)
            return self._sessions[annotator_id]

    def submit(self, record: AnnotationRecord) -> dict:
        """Validate order and codes, persist, and acknowledge with the new state."""
        session = self.get_or_create_session(record.annotator_id)
        unknown = sorted(c for c in record.codes if c not in self.code_table)
        if unknown:
            raise AnnotationError(f"unknown code {unknown[0]!r}")
        if record.note_id not in session.queue:
            raise AnnotationError(f"note {record.note_id!r} is not part of this session")
        done = session.completed
        if record.note_id != session.next_note_id and record.note_id not in done:
            raise AnnotationError(
                f"note {record.note_id!r} submitted out of order (next is {session.next_note_id!r})"
            )
        self.store.append(record)
        return session.state()


def search_codes(code_table: CodeTitleTable, query: str, limit: int = 20) -> list[tuple[str, str]]:
    """Case-insensitive substring search over codes and concatenated titles.

    Matches whose code starts with the query rank first, then remaining code
    or title matches, each tier in table order.
    """
    if limit < 0:
        raise AnnotationError(f"limit must be >= 0, got {limit}")
    q = query.strip().lower()
    if not q:
        return [(e.code, e.concatenated) for e in code_table][:limit]
    prefix, other = [], []
    for entry in code_table:
        code_l = entry.code.lower()
        title_l = entry.concatenated.lower()
        if code_l.startswith(q):
            prefix.append((entry.code, entry.concatenated))
        elif q in code_l or q in title_l:
            other.append((entry.code, entry.concatenated))
    return (prefix + other)[:limit]


# ---------------------------------------------------------------------------
# agreement reporting


@dataclass
class AgreementReport:
    """Per-annotator and model agreement with the reference assignments.

    Values measure concordance with the dataset's reference codes, which are
    themselves human annotations, not ground truth.
    """

    rows: dict[str, dict[str, float]]
    note_counts: dict[str, int]
    threshold: float
    macro_axis: str = "label"

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "note_counts": self.note_counts,
            "threshold": self.threshold,
            "macro_axis": self.macro_axis,
            "comparison": "agreement with reference",
        }


def _label_matrix(code_table: CodeTitleTable, assignments: dict[str, frozenset[str] | set[str]],
                  note_ids: list[str]) -> np.ndarray:
    matrix = np.zeros((len(note_ids), len(code_table)), dtype=np.int64)
    for row, note_id in enumerate(note_ids):
        for code in assignments.get(note_id, ()):
            matrix[row, code_table.index_of(code)] = 1
    return matrix


def agreement_report(
    annotations: dict[str, dict[str, set[str]]],
    references: dict[str, set[str]],
    code_table: CodeTitleTable,
    model_scores: dict[str, np.ndarray] | None = None,
    threshold: float = 0.5,
    macro_axis: str = "label",
) -> AgreementReport:
    """Table of macro/micro Jaccard/precision/recall rows.

    One row per annotator over the notes that annotator completed, plus a
    "model" row from thresholded prediction scores over the union of all
    annotated notes, computed by the same set-agreement path.
    """
    rows: dict[str, dict[str, float]] = {}
    note_counts: dict[str, int] = {}
    annotated_union: list[str] = []
    seen = set()

    for annotator_id in sorted(annotations):
        per_note = annotations[annotator_id]
        note_ids = sorted(per_note)
        for note_id in note_ids:
            if note_id not in references:
                raise AnnotationError(f"note {note_id!r} has no reference assignment")
            if note_id not in seen:
                seen.add(note_id)
                annotated_union.append(note_id)
        refs = _label_matrix(code_table, references, note_ids)
        anns = _label_matrix(code_table, per_note, note_ids)
        rows[annotator_id] = set_agreement(anns, refs, macro_axis)
        note_counts[annotator_id] = len(note_ids)

    if model_scores is not None:
        note_ids = sorted(annotated_union) if annotated_union else sorted(references)
        for note_id in note_ids:
            if note_id not in model_scores:
                raise AnnotationError(f"note {note_id!r} has no model prediction")
            if note_id not in references:
                raise AnnotationError(f"note {note_id!r} has no reference assignment")
        scores = np.stack([np.asarray(model_scores[n], dtype=np.float64) for n in note_ids])
        pred = (scores >= threshold).astype(np.int64)
        refs = _label_matrix(code_table, references, note_ids)
        rows["model"] = set_agreement(pred, refs, macro_axis)
        note_counts["model"] = len(note_ids)

    return AgreementReport(rows=rows, note_counts=note_counts,
                           threshold=threshold, macro_axis=macro_axis)
