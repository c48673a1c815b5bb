"""Synthetic transcriber behavior for desk-scale experiments.

No speech model is trained here. Instead, a seeded simulator generates
corpora and injects membership-conditioned character errors: utterances the
"model" saw during training are transcribed at a lower character error rate
than unseen ones. That gap is the only membership signal, so the full audit
pipeline can be exercised and calibrated (including the null case of equal
rates) without any audio.

Outputs are standard manifests and transcription tables, interchangeable
with real data downstream. Everything is a pure function of (inputs, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import AudioRecord, Dataset, EmbeddingTable, TranscriptionTable, split_dataset
from .rng import Rng, derive_seed, hash_string, unit_float

# Personal error scales span this interval; the mean is 1 so corpus-level
# error rates converge to the configured ones.
ERROR_SCALE_RANGE = (0.7, 1.3)
BASE_SPEED_RANGE = (10.0, 20.0)  # reference characters per second
DEFAULT_UTTERANCE_WORDS = (2, 8)

# Each record is transcribed on a calm or a burst channel: real transcribers
# garble the occasional utterance outright. The mixture has mean one
# ((1-p)*calm + p*burst = 1) so measured corpus rates still converge to the
# configured cer.
RECORD_BURST_PROBABILITY = 0.05
RECORD_BURST_MULTIPLIER = 3.85
RECORD_CALM_MULTIPLIER = 0.85


@dataclass(frozen=True)
class SpeakerProfile:
    """Stable per-speaker traits, derived from the user id alone."""

    user_id: str
    base_speed: float
    utterance_len_words: tuple[int, int]
    personal_error_scale: float

    def __post_init__(self):
        if self.base_speed <= 0:
            raise ValueError("base_speed must be positive")
        lo, hi = self.utterance_len_words
        if lo > hi or lo < 1:
            raise ValueError("bad utterance length range")
        if self.personal_error_scale <= 0:
            raise ValueError("personal_error_scale must be positive")


@dataclass(frozen=True)
class ErrorModel:
    """Membership-conditioned error injection rates.

    The member rate must not exceed the nonmember rate; their gap is the
    simulated membership signal. ``mix`` gives substitution/deletion/insertion
    proportions.
    """

    member_cer: float = 0.05
    nonmember_cer: float = 0.09
    noise_multiplier: float = 1.0
    mix: tuple[float, float, float] = (0.6, 0.2, 0.2)

    def __post_init__(self):
        if not 0.0 <= self.member_cer < 1.0 or not 0.0 <= self.nonmember_cer < 1.0:
            raise ValueError("character error rates must lie in [0, 1)")
        if self.member_cer > self.nonmember_cer:
            raise ValueError("member_cer must not exceed nonmember_cer")
        if self.noise_multiplier < 1.0:
            raise ValueError("noise_multiplier must be >= 1")
        if any(p < 0 for p in self.mix) or abs(sum(self.mix) - 1.0) > 1e-9:
            raise ValueError("mix proportions must be non-negative and sum to 1")


DEFAULT_ERROR_MODEL = ErrorModel()
NOISY_ERROR_MODEL = ErrorModel(noise_multiplier=2.0)


def personal_error_scale(user_id: str) -> float:
    """Speaker-specific error multiplier in ERROR_SCALE_RANGE, a pure
    function of the user id so any module can recompute it."""
    lo, hi = ERROR_SCALE_RANGE
    return lo + (hi - lo) * unit_float(hash_string("error-scale:" + user_id))


def speaker_profile(
    user_id: str, utterance_len_words: tuple[int, int] = DEFAULT_UTTERANCE_WORDS
) -> SpeakerProfile:
    """Profile for a user id; identical across corpora and seeds."""
    lo, hi = BASE_SPEED_RANGE
    speed = lo + (hi - lo) * unit_float(hash_string("base-speed:" + user_id))
    return SpeakerProfile(
        user_id=user_id,
        base_speed=speed,
        utterance_len_words=utterance_len_words,
        personal_error_scale=personal_error_scale(user_id),
    )


def load_wordlist(path: str | Path) -> tuple[str, ...]:
    """One word per line, uppercased; needs at least 50 usable words."""
    words = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        word = line.strip().upper()
        if word:
            words.append(word)
    if len(words) < 50:
        raise ValueError(f"wordlist has {len(words)} words; need at least 50")
    return tuple(words)


def bundled_wordlist() -> tuple[str, ...]:
    """The small word list shipped with the package (for tests and demos)."""
    return load_wordlist(Path(__file__).parent / "data" / "wordlist.txt")


def synthetic_embeddings(wordlist: Sequence[str], dimension: int = 24, seed: int = 0) -> EmbeddingTable:
    """Seeded stand-in for a pretrained vector file: one unit-norm random
    vector per word. Near-orthogonal vectors make the sentence cosine track
    word overlap, which is all the experiments need from an embedding."""
    rng = Rng(seed)
    vectors: dict[str, tuple[float, ...]] = {}
    for word in wordlist:
        token = word.lower()
        if token in vectors:
            continue
        vec = [rng.gauss() for _ in range(dimension)]
        norm = math.sqrt(sum(v * v for v in vec)) or 1.0
        vectors[token] = tuple(v / norm for v in vec)
    return EmbeddingTable(dimension=dimension, vectors=vectors)


def generate_corpus(
    n_users: int,
    records_per_user: tuple[int, int],
    wordlist: Sequence[str],
    seed: int,
    name: str = "sim",
    user_prefix: str = "spk",
    utterance_len_words: tuple[int, int] = DEFAULT_UTTERANCE_WORDS,
) -> Dataset:
    """Synthesize a corpus of uppercase word-sequence utterances.

    Reference texts and durations are seeded; speaker traits come from
    :func:`speaker_profile`. Durations are chars / base_speed with the speed
    perturbed by at most 10 percent, so each record's implied speed stays
    within 10 percent of the speaker's base speed.
    """
    if n_users < 2:
        raise ValueError("need at least 2 users")
    lo_rec, hi_rec = records_per_user
    if lo_rec < 1 or lo_rec > hi_rec:
        raise ValueError("bad records_per_user range")
    if len(wordlist) < 50:
        raise ValueError(f"wordlist has {len(wordlist)} words; need at least 50")
    words = [w.upper() for w in wordlist]
    rng = Rng(seed)
    records = []
    for u in range(n_users):
        user_id = f"{user_prefix}{u:05d}"
        profile = speaker_profile(user_id, utterance_len_words)
        for r in range(rng.randint(lo_rec, hi_rec)):
            n_words = rng.randint(*profile.utterance_len_words)
            text = " ".join(rng.choice(words) for _ in range(n_words))
            speed = profile.base_speed * rng.uniform(0.9, 1.1)
            records.append(
                AudioRecord(
                    user_id=user_id,
                    audio_id=f"utt{r:04d}",
                    reference_text=text,
                    duration_seconds=len(text) / speed,
                )
            )
    return Dataset(records=tuple(records), name=name)


def simulate_transcription(
    record: AudioRecord, is_member_record: bool, model: ErrorModel, seed: int
) -> str:
    """Transcribe one record with membership-conditioned errors.

    Walks the reference character by character; each position is hit with
    probability cer * personal_error_scale * noise_multiplier (clamped to 1)
    where cer depends on membership, further scaled by the record's mean-one
    calm/burst channel draw. A hit becomes a substitution, deletion, or
    insertion-before per the configured mix; replacement characters come from
    the reference's own alphabet. Deterministic per (record, seed).
    """
    base = model.member_cer if is_member_record else model.nonmember_cer
    rate = base * personal_error_scale(record.user_id) * model.noise_multiplier
    rng = Rng(derive_seed(seed, hash_string(record.user_id + "\x1f" + record.audio_id) >> 1))
    if rng.random() < RECORD_BURST_PROBABILITY:
        rate *= RECORD_BURST_MULTIPLIER
    else:
        rate *= RECORD_CALM_MULTIPLIER
    rate = min(1.0, rate)
    reference = record.reference_text
    alphabet = sorted(set(reference))
    p_sub, p_del, _ = model.mix
    out = []
    for ch in reference:
        if rng.random() >= rate:
            out.append(ch)
            continue
        roll = rng.random()
        if roll < p_sub:
            choices = [c for c in alphabet if c != ch]
            out.append(rng.choice(choices) if choices else ch)
        elif roll < p_sub + p_del:
            pass  # deletion
        else:
            out.append(rng.choice(alphabet))
            out.append(ch)
    return "".join(out)


@dataclass(frozen=True)
class ShadowRun:
    """One shadow transcriber's query log: a user-disjoint train/test split
    plus hypotheses for every record on both sides."""

    shadow_train: Dataset
    shadow_test: Dataset
    transcripts: TranscriptionTable

    def __post_init__(self):
        overlap = self.shadow_train.user_set() & self.shadow_test.user_set()
        if overlap:
            raise ValueError(f"shadow train/test share users: {sorted(overlap)[:3]}")


def simulate_shadow_run(
    corpus: Dataset, train_fraction: float, model: ErrorModel, seed: int
) -> ShadowRun:
    """Split a corpus at the user level and transcribe both sides.

    Train-side records are transcribed at the member rate, test-side records
    at the nonmember rate.
    """
    if len(corpus.users()) < 4:
        raise ValueError("shadow run needs at least 4 users")
    train, test = split_dataset(corpus, train_fraction, derive_seed(seed, 0))
    transcription_seed = derive_seed(seed, 1)
    entries = {}
    for dataset, is_member in ((train, True), (test, False)):
        for rec in dataset.records:
            entries[(rec.user_id, rec.audio_id)] = simulate_transcription(
                rec, is_member, model, transcription_seed
            )
    return ShadowRun(shadow_train=train, shadow_test=test, transcripts=TranscriptionTable(entries))
