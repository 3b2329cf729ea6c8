"""Frequent contiguous-subsequence mining and document-term matrices.

The same sparse matrix type backs both the patient x subsequence counts
(workflow side) and the patient x group-code counts (phenotype side).
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import sparse

from .errors import DataError, UsageError
from .ingest import DiagnosisRecord, PatientSequence

Subsequence = tuple[str, ...]
Term = Union[str, Subsequence]

# Separator used when rendering a subsequence as a single vocabulary string.
SUBSEQ_JOIN = " -> "


def term_repr(term: Term) -> str:
    if isinstance(term, str):
        return term
    return SUBSEQ_JOIN.join(term)


def parse_term(text: str) -> Term:
    if SUBSEQ_JOIN in text:
        return tuple(text.split(SUBSEQ_JOIN))
    return text


@dataclass
class DocTermMatrix:
    doc_ids: list[str]
    terms: list[Term]
    counts: sparse.csr_matrix

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.doc_ids), len(self.terms))

    def column_presence(self, j: int) -> int:
        """Number of documents with a non-zero count for term j."""
        return int((self.counts[:, j] > 0).sum())

    def save(self, matrix_path, vocab_path) -> None:
        """Persist as sparse triplets plus a sidecar vocabulary file."""
        coo = self.counts.tocoo()
        rows = sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))
        with open(matrix_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["doc_id", "term_id", "count"])
            for i, j, c in rows:
                writer.writerow([self.doc_ids[i], j, int(c)])
        with open(vocab_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["term_id", "term_repr"])
            for j, term in enumerate(self.terms):
                writer.writerow([j, term_repr(term)])

    @classmethod
    def load(cls, matrix_path, vocab_path) -> "DocTermMatrix":
        terms: list[Term] = []
        with open(vocab_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                j = int(row["term_id"])
                if j != len(terms):
                    raise DataError(f"{vocab_path}: non-contiguous term_id {j}")
                terms.append(parse_term(row["term_repr"]))
        doc_ids: list[str] = []
        doc_index: dict[str, int] = {}
        triplets: list[tuple[int, int, int]] = []
        with open(matrix_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                pid = row["doc_id"]
                if pid not in doc_index:
                    doc_index[pid] = len(doc_ids)
                    doc_ids.append(pid)
                triplets.append((doc_index[pid], int(row["term_id"]), int(row["count"])))
        return cls.from_triplets(doc_ids, terms, triplets)

    @classmethod
    def from_triplets(cls, doc_ids, terms, triplets) -> "DocTermMatrix":
        if triplets:
            i, j, c = zip(*triplets)
        else:
            i, j, c = (), (), ()
        counts = sparse.coo_matrix(
            (np.asarray(c, dtype=np.int64), (np.asarray(i), np.asarray(j))),
            shape=(len(doc_ids), len(terms)),
        ).tocsr()
        counts.eliminate_zeros()
        return cls(list(doc_ids), list(terms), counts)


def mine_frequent_subsequences(
    sequences: Sequence[PatientSequence],
    min_support: int,
    max_len: int,
    collapse_repeats: bool = False,
) -> list[Subsequence]:
    """Contiguous n-grams (length <= max_len) present in >= min_support patients.

    Support counts distinct patients, not occurrences. The result is sorted
    lexicographically so the vocabulary is deterministic.
    """
    if min_support < 1 or max_len < 1:
        raise UsageError("min_support and max_len must be >= 1")
    support: Counter[Subsequence] = Counter()
    for seq in sequences:
        labels = _maybe_collapse(seq.labels) if collapse_repeats else seq.labels
        length = len(labels)
        seen = set()
        for n in range(1, min(max_len, length) + 1):
            for i in range(length - n + 1):
                seen.add(labels[i : i + n])
        support.update(seen)
    return sorted(t for t, c in support.items() if c >= min_support)


def _maybe_collapse(labels: tuple[str, ...]) -> tuple[str, ...]:
    collapsed = [labels[0]] if labels else []
    for label in labels[1:]:
        if label != collapsed[-1]:
            collapsed.append(label)
    return tuple(collapsed)


def count_occurrences(
    sequences: Sequence[PatientSequence],
    vocabulary: Sequence[Subsequence],
    collapse_repeats: bool = False,
) -> DocTermMatrix:
    """Patient x subsequence counts; overlapping occurrences all count."""
    if not vocabulary:
        raise UsageError("empty vocabulary")
    index = {term: j for j, term in enumerate(vocabulary)}
    lengths = sorted({len(term) for term in vocabulary})
    doc_ids = [seq.patient_id for seq in sequences]
    triplets: list[tuple[int, int, int]] = []
    for i, seq in enumerate(sequences):
        labels = _maybe_collapse(seq.labels) if collapse_repeats else seq.labels
        length = len(labels)
        hits: Counter[int] = Counter()
        for n in lengths:
            for start in range(length - n + 1):
                j = index.get(labels[start : start + n])
                if j is not None:
                    hits[j] += 1
        triplets.extend((i, j, c) for j, c in hits.items())
    return DocTermMatrix.from_triplets(doc_ids, list(vocabulary), triplets)


def bag_to_matrix(records: Sequence[DiagnosisRecord]) -> DocTermMatrix:
    """Patient x code counts from (already code-mapped) diagnosis records."""
    doc_ids: list[str] = []
    doc_index: dict[str, int] = {}
    terms = sorted({r.code for r in records})
    term_index = {t: j for j, t in enumerate(terms)}
    triplets: list[tuple[int, int, int]] = []
    for record in records:
        if record.patient_id not in doc_index:
            doc_index[record.patient_id] = len(doc_ids)
            doc_ids.append(record.patient_id)
        triplets.append((doc_index[record.patient_id], term_index[record.code], record.count))
    return DocTermMatrix.from_triplets(doc_ids, terms, triplets)
