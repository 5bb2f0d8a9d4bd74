"""Note ingestion, tokenization, vocabularies and fixed-length encoding.

File formats:
  * notes: one JSON object per line, {"id": str, "text": str, "codes": [str]}
  * code titles: tab-separated with a ``code\tlong_title\tshort_title`` header
  * split manifest: JSON object {"train": [ids], "val": [ids], "test": [ids]}

All objects here are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import Rng


class CorpusError(ValueError):
    pass


PAD = 0
UNK = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on runs of non-alphanumerics, drop digit-only tokens."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if not t.isdigit()]


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    codes: frozenset[str] = frozenset()

    @staticmethod
    def make(doc_id: str, text: str, codes) -> "Document":
        return Document(id=str(doc_id), text=text, codes=frozenset(codes))


class Vocabulary:
    """Token/index bijection with PAD=0 and UNK=1.

    Indices are assigned by descending corpus frequency, ties broken by
    token order, so the mapping is reproducible for a given corpus.
    """

    def __init__(self, tokens: list[str], min_count: int):
        self.index_to_token = [PAD_TOKEN, UNK_TOKEN] + list(tokens)
        self.token_to_index = {t: i for i, t in enumerate(self.index_to_token)}
        if len(self.token_to_index) != len(self.index_to_token):
            raise CorpusError("vocabulary tokens must be unique")
        self.min_count = min_count

    @classmethod
    def build(cls, documents, min_count: int = 10) -> "Vocabulary":
        if min_count < 1:
            raise CorpusError(f"min_count must be >= 1, got {min_count}")
        counts = Counter()
        for doc in documents:
            counts.update(tokenize(doc.text))
        kept = [t for t, c in counts.items() if c >= min_count]
        kept.sort(key=lambda t: (-counts[t], t))
        return cls(kept, min_count)

    def __len__(self) -> int:
        return len(self.index_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_index

    def encode(self, tokens: list[str]) -> list[int]:
        get = self.token_to_index.get
        return [get(t, UNK) for t in tokens]

    def decode(self, ids, skip_special: bool = True) -> list[str]:
        out = []
        for i in ids:
            if skip_special and i in (PAD, UNK):
                continue
            out.append(self.index_to_token[i])
        return out

    def fingerprint(self) -> str:
        payload = "\n".join(self.index_to_token) + f"\nmin_count={self.min_count}"
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def save(self, path) -> None:
        payload = {"min_count": self.min_count, "tokens": self.index_to_token[2:]}
        Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(payload["tokens"], payload["min_count"])


@dataclass(frozen=True)
class CodeTitle:
    code: str
    long_title: str
    short_title: str

    @property
    def concatenated(self) -> str:
        return f"{self.long_title} {self.short_title}"


class CodeTitleTable:
    """Ordered code list; position defines the label index 0..n_y-1."""

    def __init__(self, entries: list[CodeTitle]):
        self.entries = list(entries)
        self._index = {e.code: i for i, e in enumerate(self.entries)}
        if len(self._index) != len(self.entries):
            raise CorpusError("duplicate code in title table")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, code: str) -> bool:
        return code in self._index

    @property
    def codes(self) -> list[str]:
        return [e.code for e in self.entries]

    @property
    def concatenated_titles(self) -> list[str]:
        return [e.concatenated for e in self.entries]

    def index_of(self, code: str) -> int:
        try:
            return self._index[code]
        except KeyError:
            raise CorpusError(f"unknown code {code!r}") from None

    def fingerprint(self) -> str:
        payload = "\n".join(f"{e.code}\t{e.long_title}\t{e.short_title}" for e in self.entries)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    @classmethod
    def from_tsv(cls, path) -> "CodeTitleTable":
        path = Path(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        if not lines:
            raise CorpusError(f"{path}: empty code-title file")
        header = [c.strip().lower() for c in lines[0].split("\t")]
        if header != ["code", "long_title", "short_title"]:
            raise CorpusError(f"{path}: expected header 'code\\tlong_title\\tshort_title', got {lines[0]!r}")
        entries = []
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise CorpusError(f"{path}:{lineno}: expected 3 tab-separated columns, got {len(cols)}")
            entries.append(CodeTitle(cols[0].strip(), cols[1].strip(), cols[2].strip()))
        return cls(entries)

    def to_tsv(self, path) -> None:
        lines = ["code\tlong_title\tshort_title"]
        lines += [f"{e.code}\t{e.long_title}\t{e.short_title}" for e in self.entries]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class TitleMatrix:
    """Token ids of each concatenated code title, padded to n_t columns."""

    ids: np.ndarray
    vocab_fingerprint: str
    table_fingerprint: str

    @property
    def n_y(self) -> int:
        return self.ids.shape[0]

    @property
    def n_t(self) -> int:
        return self.ids.shape[1]


@dataclass(frozen=True)
class EncodedExample:
    token_ids: np.ndarray
    label_vector: np.ndarray
    source_id: str


def pad_or_truncate(ids: list[int], length: int) -> np.ndarray:
    out = np.full(length, PAD, dtype=np.int64)
    ids = ids[:length]
    out[: len(ids)] = ids
    return out


def encode_document(doc: Document, vocab: Vocabulary, code_table: CodeTitleTable, n_x: int) -> EncodedExample:
    if n_x < 1:
        raise CorpusError(f"n_x must be >= 1, got {n_x}")
    token_ids = pad_or_truncate(vocab.encode(tokenize(doc.text)), n_x)
    labels = np.zeros(len(code_table), dtype=np.int64)
    for code in doc.codes:
        labels[code_table.index_of(code)] = 1
    return EncodedExample(token_ids=token_ids, label_vector=labels, source_id=doc.id)


def build_title_matrix(code_table: CodeTitleTable, vocab: Vocabulary, n_t: int = 36) -> TitleMatrix:
    if n_t < 1:
        raise CorpusError(f"n_t must be >= 1, got {n_t}")
    rows = [
        pad_or_truncate(vocab.encode(tokenize(title)), n_t)
        for title in code_table.concatenated_titles
    ]
    ids = np.stack(rows) if rows else np.zeros((0, n_t), dtype=np.int64)
    return TitleMatrix(ids=ids, vocab_fingerprint=vocab.fingerprint(), table_fingerprint=code_table.fingerprint())


# ---------------------------------------------------------------------------
# dataset files


def load_documents(path, code_table: CodeTitleTable | None = None) -> list[Document]:
    path = Path(path)
    docs = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed record ({exc.msg})") from None
            if not isinstance(record, dict) or not {"id", "text", "codes"} <= record.keys():
                raise CorpusError(f"{path}:{lineno}: record must have id, text and codes fields")
            doc_id = str(record["id"])
            if doc_id in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate document id {doc_id!r}")
            seen.add(doc_id)
            codes = record["codes"]
            if code_table is not None:
                for code in codes:
                    if code not in code_table:
                        raise CorpusError(f"{path}:{lineno}: unknown code {code!r}")
            docs.append(Document.make(doc_id, record["text"], codes))
    return docs


def save_documents(docs, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            record = {"id": doc.id, "text": doc.text, "codes": sorted(doc.codes)}
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")


def load_dataset(notes_path, codes_path) -> tuple[list[Document], CodeTitleTable]:
    """Load notes plus the code-title table, validating codes against it."""
    code_table = CodeTitleTable.from_tsv(codes_path)
    docs = load_documents(notes_path, code_table)
    return docs, code_table


def load_split_manifest(path) -> dict[str, list[str]]:
    manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    if set(manifest) != {"train", "val", "test"}:
        raise CorpusError(f"{path}: manifest must have exactly train/val/test keys")
    return {k: [str(i) for i in v] for k, v in manifest.items()}


def save_split_manifest(manifest: dict[str, list[str]], path) -> None:
    Path(path).write_text(json.dumps(manifest, sort_keys=True) + "\n", encoding="utf-8")


def split_dataset(docs: list[Document], manifest: dict[str, list[str]]) -> dict[str, list[Document]]:
    """Partition docs by a manifest; ids may appear in at most one split."""
    by_id = {d.id: d for d in docs}
    assigned = set()
    splits: dict[str, list[Document]] = {}
    for name in ("train", "val", "test"):
        ids = manifest.get(name, [])
        part = []
        for doc_id in ids:
            if doc_id in assigned:
                raise CorpusError(f"document id {doc_id!r} appears in more than one split")
            if doc_id not in by_id:
                raise CorpusError(f"manifest id {doc_id!r} not present in the dataset")
            assigned.add(doc_id)
            part.append(by_id[doc_id])
        splits[name] = part
    return splits


# ---------------------------------------------------------------------------
# synthetic data with a planted signal


def _weighted_sample_without_replacement(rng: Rng, weights: np.ndarray, k: int) -> list[int]:
    remaining = weights.copy()
    picks = []
    for _ in range(k):
        total = remaining.sum()
        cumulative = np.cumsum(remaining / total)
        idx = int(np.searchsorted(cumulative, float(rng.uniform())))
        idx = min(idx, len(remaining) - 1)
        picks.append(idx)
        remaining[idx] = 0.0
    return picks


@dataclass
class SyntheticDataset:
    documents: list[Document]
    code_table: CodeTitleTable
    triggers: dict[str, tuple[str, str]] = field(default_factory=dict)

    def split_manifest(self, n_train: int, n_val: int, n_test: int) -> dict[str, list[str]]:
        ids = [d.id for d in self.documents]
        if n_train + n_val + n_test > len(ids):
            raise CorpusError("split sizes exceed the number of generated documents")
        return {
            "train": ids[:n_train],
            "val": ids[n_train : n_train + n_val],
            "test": ids[n_train + n_val : n_train + n_val + n_test],
        }


def generate_synthetic(
    n_docs: int,
    n_codes: int,
    vocab_size: int,
    seed: int,
    min_labels: int = 5,
    max_labels: int = 8,
    noise_sentences: int = 5,
    noise_sentence_len: int = 6,
    trigger_repeats: int = 1,
    label_skew: float = 0.0,
) -> SyntheticDataset:
    """Notes where each labeled code plants its own two-token trigger phrase.

    Trigger tokens are disjoint from the noise pool and from each other, so
    the rule "code is present iff its trigger bigram occurs" holds exactly.
    ``label_skew`` > 0 draws codes from a Zipf-like distribution (code i with
    weight (i+1)^-skew) so low-index codes are common and the tail is rare,
    matching the long-tail shape of real code sets. Deterministic for a
    given seed.
    """
    if n_codes < 2:
        raise CorpusError(f"n_codes must be >= 2, got {n_codes}")
    n_trigger_tokens = 2 * n_codes
    if vocab_size < n_trigger_tokens + 10:
        raise CorpusError(
            f"vocab_size {vocab_size} too small to allot unique triggers for "
            f"{n_codes} codes (needs at least {n_trigger_tokens + 10})"
        )
    words = [f"w{i:04d}" for i in range(vocab_size)]
    noise_pool = words[n_trigger_tokens:]

    entries = []
    triggers: dict[str, tuple[str, str]] = {}
    for i in range(n_codes):
        code = f"{100 + i}.{i % 10}"
        first, second = words[2 * i], words[2 * i + 1]
        triggers[code] = (first, second)
        entries.append(CodeTitle(code, f"{first} {second} finding", f"{first} {second}"))
    code_table = CodeTitleTable(entries)

    rng = Rng(seed)
    min_labels = max(1, min(min_labels, n_codes))
    max_labels = max(min_labels, min(max_labels, n_codes))
    weights = np.arange(1, n_codes + 1, dtype=np.float64) ** (-label_skew)
    docs = []
    for j in range(n_docs):
        n_labels = int(rng.integers(min_labels, max_labels + 1))
        if label_skew > 0.0:
            label_idx = _weighted_sample_without_replacement(rng, weights, n_labels)
        else:
            label_idx = rng.sample_indices(n_codes, n_labels)
        codes = [code_table.entries[i].code for i in label_idx]
        # a labeled code's trigger may recur, the way diagnoses recur in notes
        sentences = [" ".join(triggers[c]) for c in codes for _ in range(trigger_repeats)]
        for _ in range(noise_sentences):
            picks = rng.integers(0, len(noise_pool), size=noise_sentence_len)
            sentences.append(" ".join(noise_pool[int(p)] for p in picks))
        rng.shuffle(sentences)
        text = ". ".join(sentences) + "."
        docs.append(Document.make(f"note{j:05d}", text, codes))
    return SyntheticDataset(documents=docs, code_table=code_table, triggers=triggers)
