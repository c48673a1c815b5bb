"""Character- and word-level alignment between reference and hypothesis text.

The character aligner reports, besides the unit-cost edit distance, which
reference characters were lost ("missing") and which hypothesis characters
were invented ("extra") under one deterministic optimal alignment. Several
optimal alignments usually exist; the traceback walks from the string ends
back to the start and prefers match > substitution > deletion > insertion,
which pins down a single reproducible answer. A substitution contributes its
reference character to the missing string and its hypothesis character to the
extra string.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

# Traceback op codes.
_MATCH, _SUB, _DEL, _INS = 0, 1, 2, 3


@dataclass(frozen=True)
class AlignmentResult:
    """Unit-cost character alignment summary.

    distance: minimal edit distance (substitution/deletion/insertion, cost 1)
    missing_chars: reference characters consumed by deletions and
        substitutions, in reference order
    extra_chars: hypothesis characters produced by insertions and
        substitutions, in hypothesis order
    """

    distance: int
    missing_chars: str
    extra_chars: str


@dataclass(frozen=True)
class WerReport:
    """Word-level edit distance decomposed into error types."""

    substitutions: int
    deletions: int
    insertions: int
    reference_words: int
    wer: float


def _edit_table(ref: Sequence, hyp: Sequence) -> list[list[int]]:
    """Full (len(ref)+1) x (len(hyp)+1) unit-cost DP table."""
    m, n = len(ref), len(hyp)
    table = [list(range(n + 1))]
    prev = table[0]
    for i in range(1, m + 1):
        ri = ref[i - 1]
        row = [i] + [0] * n
        for j in range(1, n + 1):
            if ri == hyp[j - 1]:
                row[j] = prev[j - 1]
            else:
                best = prev[j - 1]  # substitution
                if prev[j] < best:
                    best = prev[j]  # deletion
                if row[j - 1] < best:
                    best = row[j - 1]  # insertion
                row[j] = best + 1
        table.append(row)
        prev = row
    return table


def _traceback(ref: Sequence, hyp: Sequence, table: list[list[int]]) -> list[tuple[int, int, int]]:
    """Ops as (code, ref_index, hyp_index) in forward order.

    Walks from (len(ref), len(hyp)) back to the origin, preferring
    match > substitution > deletion > insertion whenever several predecessors
    are optimal. Indices are -1 where an op does not touch that side.
    """
    i, j = len(ref), len(hyp)
    ops: list[tuple[int, int, int]] = []
    while i > 0 or j > 0:
        here = table[i][j]
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and table[i - 1][j - 1] == here:
            ops.append((_MATCH, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and table[i - 1][j - 1] + 1 == here:
            ops.append((_SUB, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and table[i - 1][j] + 1 == here:
            ops.append((_DEL, i - 1, -1))
            i -= 1
        else:
            ops.append((_INS, -1, j - 1))
            j -= 1
    ops.reverse()
    return ops


def char_align(reference: str, hypothesis: str) -> AlignmentResult:
    """Optimal character alignment with missing/extra extraction.

    Either string may be empty. The text is aligned exactly as given; callers
    that want case-insensitive behaviour normalize first.
    """
    table = _edit_table(reference, hypothesis)
    ops = _traceback(reference, hypothesis, table)
    missing = [reference[i] for code, i, _ in ops if code in (_SUB, _DEL)]
    extra = [hypothesis[j] for code, _, j in ops if code in (_SUB, _INS)]
    return AlignmentResult(
        distance=table[len(reference)][len(hypothesis)],
        missing_chars="".join(missing),
        extra_chars="".join(extra),
    )


def word_align(reference: str, hypothesis: str) -> WerReport:
    """Word error rate between two transcriptions.

    Tokens are runs of non-whitespace. The reference must contain at least
    one token; WER over an empty reference is undefined.
    """
    ref_words = reference.split()
    hyp_words = hypothesis.split()
    if not ref_words:
        raise ValueError("WER undefined: reference has no words")
    table = _edit_table(ref_words, hyp_words)
    ops = _traceback(ref_words, hyp_words, table)
    subs = sum(1 for code, _, _ in ops if code == _SUB)
    dels = sum(1 for code, _, _ in ops if code == _DEL)
    ins = sum(1 for code, _, _ in ops if code == _INS)
    return WerReport(
        substitutions=subs,
        deletions=dels,
        insertions=ins,
        reference_words=len(ref_words),
        wer=(subs + dels + ins) / len(ref_words),
    )


def corpus_wer(pairs: Sequence[tuple[str, str]]) -> float:
    """Pooled WER: total edit errors over total reference words."""
    if not pairs:
        raise ValueError("corpus_wer needs at least one pair")
    errors = 0
    words = 0
    for reference, hypothesis in pairs:
        report = word_align(reference, hypothesis)
        errors += report.substitutions + report.deletions + report.insertions
        words += report.reference_words
    return errors / words


def overfitting_gap(wer_train: float, wer_test: float) -> float:
    """Training-vs-test WER gap of a transcription source.

    Returned as wer_train - wer_test; reports usually quote the magnitude.
    """
    if wer_train < 0 or wer_test < 0:
        raise ValueError("word error rates must be non-negative")
    return wer_train - wer_test
