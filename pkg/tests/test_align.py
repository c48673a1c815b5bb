import itertools

import pytest

from oracles import brute_edit_distance
from voiceaudit.align import char_align, corpus_wer, overfitting_gap, word_align
from voiceaudit.rng import Rng

KAFFAR_REF = "THAT IS KAFFAR'S KNIFE"
KAFFAR_HYP = "THAT IS CALF OUR'S KNIFE"


def test_kaffar_example_exact():
    result = char_align(KAFFAR_REF, KAFFAR_HYP)
    assert result.missing_chars == "KFA"
    assert result.extra_chars == "CL OU"  # the blank is real: one word became two


def test_identity():
    result = char_align("ABC", "ABC")
    assert result == char_align("ABC", "ABC")
    assert (result.distance, result.missing_chars, result.extra_chars) == (0, "", "")


def test_pure_insertion():
    result = char_align("", "AB")
    assert (result.distance, result.missing_chars, result.extra_chars) == (2, "", "AB")


def test_pure_deletion():
    result = char_align("AB", "")
    assert (result.distance, result.missing_chars, result.extra_chars) == (2, "AB", "")


def test_zero_distance_iff_identical():
    rng = Rng(404)
    alphabet = "ABC "
    for _ in range(200):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randrange(8)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randrange(8)))
        result = char_align(a, b)
        assert (result.distance == 0) == (a == b)
        assert (result.missing_chars == "" and result.extra_chars == "") == (a == b)


def test_distance_matches_brute_force_sampled():
    # exhaustive oracle equivalence runs in the acceptance suite; this is a
    # faster spot check over the same universe
    alphabet = "AB "
    strings = [""]
    for n in range(1, 5):
        strings.extend("".join(p) for p in itertools.product(alphabet, repeat=n))
    rng = Rng(77)
    for _ in range(400):
        a = rng.choice(strings)
        b = rng.choice(strings)
        assert char_align(a, b).distance == brute_edit_distance(a, b)


def test_missing_extra_lengths_decompose_distance():
    # len(missing) = D + S and len(extra) = I + S for the alignment's own
    # substitution/deletion/insertion counts, which must be non-negative,
    # sum to the distance, and account for the length gap
    rng = Rng(88)
    alphabet = "ABX "
    for _ in range(300):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randrange(10)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randrange(10)))
        r = char_align(a, b)
        subs = len(r.missing_chars) + len(r.extra_chars) - r.distance
        dels = len(r.missing_chars) - subs
        ins = len(r.extra_chars) - subs
        assert subs >= 0 and dels >= 0 and ins >= 0
        assert subs + dels + ins == r.distance
        assert dels - ins == len(a) - len(b)


def test_cost_symmetry():
    rng = Rng(99)
    alphabet = "AB "
    for _ in range(300):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randrange(9)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randrange(9)))
        assert char_align(a, b).distance == char_align(b, a).distance


def test_triangle_inequality():
    rng = Rng(123)
    alphabet = "ABC"
    for _ in range(200):
        a, b, c = (
            "".join(rng.choice(alphabet) for _ in range(rng.randrange(13)))
            for _ in range(3)
        )
        dab = char_align(a, b).distance
        dbc = char_align(b, c).distance
        dac = char_align(a, c).distance
        assert dac <= dab + dbc


def test_concatenation_monotonicity():
    rng = Rng(321)
    alphabet = "AB "
    for _ in range(200):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randrange(8)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randrange(8)))
        c = "".join(rng.choice(alphabet) for _ in range(rng.randrange(6)))
        assert char_align(a + c, b + c).distance <= char_align(a, b).distance


def test_traceback_deterministic():
    # repeated calls return identical strings, not just identical counts
    for _ in range(5):
        r = char_align(KAFFAR_REF, KAFFAR_HYP)
        assert (r.missing_chars, r.extra_chars) == ("KFA", "CL OU")


# --- word level ---------------------------------------------------------


def test_word_identity():
    report = word_align("A B C", "A B C")
    assert report.wer == 0.0
    assert (report.substitutions, report.deletions, report.insertions) == (0, 0, 0)


def test_word_sub_plus_insert():
    report = word_align("A B", "A X Y")
    assert (report.substitutions, report.insertions) == (1, 1)
    assert report.wer == 1.0


def test_word_total_deletion():
    report = word_align("A", "")
    assert report.deletions == 1
    assert report.wer == 1.0


def test_word_empty_reference_rejected():
    with pytest.raises(ValueError):
        word_align("   ", "A")


def test_word_align_matches_char_align_on_index_alphabet():
    # with all-distinct words, word-level alignment is character alignment
    # over a per-word symbol alphabet
    rng = Rng(55)
    vocab = ["ALPHA", "BRAVO", "CHARLIE", "DELTA", "ECHO", "FOX"]
    symbols = {w: chr(ord("a") + i) for i, w in enumerate(vocab)}
    for _ in range(200):
        ref_words = rng.sample(vocab, rng.randint(1, len(vocab)))
        hyp_words = [rng.choice(vocab) for _ in range(rng.randrange(6))]
        report = word_align(" ".join(ref_words), " ".join(hyp_words))
        encoded = char_align(
            "".join(symbols[w] for w in ref_words),
            "".join(symbols[w] for w in hyp_words),
        )
        assert report.substitutions + report.deletions + report.insertions == encoded.distance


def test_corpus_wer_pooled():
    assert corpus_wer([("A B", "A B"), ("A B", "A B")]) == 0.0
    assert corpus_wer([("A B", "A B"), ("C D", "C X")]) == pytest.approx(0.25)
    assert corpus_wer([("A", "B")]) == 1.0


def test_corpus_wer_empty_rejected():
    with pytest.raises(ValueError):
        corpus_wer([])


def test_overfitting_gap():
    gap = overfitting_gap(0.0506, 0.0908)
    assert gap == pytest.approx(-0.0402)
    assert round(abs(gap), 2) == 0.04
    assert overfitting_gap(0.3, 0.3) == 0.0
    for t in (0.0, 0.05, 0.2):
        assert overfitting_gap(0.14 + t, t) == pytest.approx(0.14)
    with pytest.raises(ValueError):
        overfitting_gap(-0.1, 0.2)
