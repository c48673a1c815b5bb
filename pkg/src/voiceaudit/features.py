"""Record-level feature extraction.

Each queried audio yields a 5-tuple: similarity between reference and
hypothesis, counts of missing and extra characters from the character
alignment, audio frame length (the utterance duration in seconds), and
speaking speed (reference characters per second). An optional audio-specific
path produces 13 mel-frequency cepstral coefficients per frame.

Everything here is a pure function; extraction over many records may run
concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .align import char_align
from .corpus import AudioSignal, EmbeddingTable


@dataclass(frozen=True)
class RecordFeatures:
    """The per-record feature 5-tuple."""

    similarity: float
    missing_count: int
    extra_count: int
    frame_length: float  # seconds
    speed: float  # reference characters per second

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (
            self.similarity,
            float(self.missing_count),
            float(self.extra_count),
            self.frame_length,
            self.speed,
        )


FEATURE_NAMES = ("similarity", "missing_count", "extra_count", "frame_length", "speed")


@dataclass(frozen=True)
class SimilarityProvider:
    """How transcription similarity is scored.

    ``char_edit`` scores 1 - distance/max_len on the uppercased pair and
    needs no external data. ``embedding`` averages token vectors of the
    lowercased sentences and takes the cosine.
    """

    kind: str  # "char_edit" | "embedding"
    table: EmbeddingTable | None = None

    def __post_init__(self):
        if self.kind not in ("char_edit", "embedding"):
            raise ValueError(f"unknown similarity kind {self.kind!r}")
        if self.kind == "embedding" and self.table is None:
            raise ValueError("embedding similarity requires a loaded table")

    def score(self, reference: str, hypothesis: str) -> float:
        if self.kind == "embedding":
            assert self.table is not None
            return similarity_embedding(reference, hypothesis, self.table)
        return similarity_char(reference.upper(), hypothesis.upper())


def char_edit_provider() -> SimilarityProvider:
    return SimilarityProvider(kind="char_edit")


def embedding_provider(table: EmbeddingTable) -> SimilarityProvider:
    return SimilarityProvider(kind="embedding", table=table)


def _sentence_vector(text: str, table: EmbeddingTable) -> np.ndarray | None:
    vecs = [table.vectors[tok] for tok in text.lower().split() if tok in table.vectors]
    if not vecs:
        return None
    return np.mean(np.asarray(vecs, dtype=np.float64), axis=0)


def similarity_embedding(reference: str, hypothesis: str, table: EmbeddingTable) -> float:
    """Cosine of the mean token vectors of the two sentences.

    Tokens are lowercased whitespace splits; out-of-vocabulary tokens are
    dropped. Returns 0.0 when either sentence has no in-vocabulary token or a
    zero-norm mean vector.
    """
    a = _sentence_vector(reference, table)
    b = _sentence_vector(hypothesis, table)
    if a is None or b is None:
        return 0.0
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    cos = float(np.dot(a, b) / (na * nb))
    return max(-1.0, min(1.0, cos))


def similarity_char(reference: str, hypothesis: str) -> float:
    """1 - edit_distance / max(len); two empty strings score 1.0."""
    longest = max(len(reference), len(hypothesis))
    if longest == 0:
        return 1.0
    return 1.0 - char_align(reference, hypothesis).distance / longest


def record_features(record, hypothesis: str, provider: SimilarityProvider) -> RecordFeatures:
    """Extract the 5-tuple for one queried audio.

    Both texts are uppercased before alignment. Frame length is the audio
    duration in seconds; speed is reference characters (whitespace-trimmed)
    per second, a speaker trait independent of the transcriber.
    """
    reference = record.reference_text
    alignment = char_align(reference.upper(), hypothesis.upper())
    frame_length = record.duration_seconds
    return RecordFeatures(
        similarity=provider.score(reference, hypothesis),
        missing_count=len(alignment.missing_chars),
        extra_count=len(alignment.extra_chars),
        frame_length=frame_length,
        speed=len(reference.strip()) / frame_length,
    )


@dataclass(frozen=True)
class MfccConfig:
    """Constants of the MFCC chain. Only the coefficient count (13) is
    load-bearing for the feature set; the rest are conventional defaults."""

    pre_emphasis: float = 0.97
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    fft_size: int = 512
    mel_filters: int = 26
    coefficients: int = 13

    def __post_init__(self):
        if self.coefficients > self.mel_filters:
            raise ValueError("coefficients must not exceed mel_filters")
        if self.fft_size <= 0 or self.fft_size & (self.fft_size - 1):
            raise ValueError("fft_size must be a positive power of two")
        if self.frame_ms <= 0 or self.hop_ms <= 0:
            raise ValueError("frame and hop must be positive")

    def frame_samples(self, sample_rate_hz: int) -> int:
        return round(sample_rate_hz * self.frame_ms / 1000.0)

    def hop_samples(self, sample_rate_hz: int) -> int:
        return round(sample_rate_hz * self.hop_ms / 1000.0)


def hz_to_mel(hz: float) -> float:
    return 2595.0 * math.log10(1.0 + hz / 700.0)


def mel_to_hz(mel: float) -> float:
    return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)


def mel_filterbank(config: MfccConfig, sample_rate_hz: int) -> np.ndarray:
    """Triangular filters (mel_filters x fft_size//2+1) spanning 0..Nyquist.

    Filter centers are equally spaced on the mel scale; each triangle is
    evaluated in Hz at the FFT bin frequencies.
    """
    nyquist = sample_rate_hz / 2.0
    mel_points = np.linspace(hz_to_mel(0.0), hz_to_mel(nyquist), config.mel_filters + 2)
    hz_points = np.array([mel_to_hz(m) for m in mel_points])
    bin_freqs = np.arange(config.fft_size // 2 + 1) * (sample_rate_hz / config.fft_size)
    bank = np.zeros((config.mel_filters, len(bin_freqs)))
    for j in range(config.mel_filters):
        left, center, right = hz_points[j], hz_points[j + 1], hz_points[j + 2]
        rising = (bin_freqs - left) / (center - left)
        falling = (right - bin_freqs) / (right - center)
        bank[j] = np.maximum(0.0, np.minimum(rising, falling))
    return bank


def filter_centers_hz(config: MfccConfig, sample_rate_hz: int) -> np.ndarray:
    """Center frequency of each mel filter, in Hz."""
    nyquist = sample_rate_hz / 2.0
    mel_points = np.linspace(hz_to_mel(0.0), hz_to_mel(nyquist), config.mel_filters + 2)
    return np.array([mel_to_hz(m) for m in mel_points[1:-1]])


def dct_matrix(rows: int, n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix (rows x n): M @ M.T == I when rows == n."""
    k = np.arange(rows)[:, None]
    i = np.arange(n)[None, :]
    mat = np.cos(np.pi * k * (2 * i + 1) / (2 * n)) * math.sqrt(2.0 / n)
    mat[0, :] *= 1.0 / math.sqrt(2.0)
    return mat


def frame_signal(signal: AudioSignal, config: MfccConfig) -> np.ndarray:
    """Pre-emphasize and slice into overlapping frames (last partial frame
    dropped). Raises if the signal is shorter than one frame."""
    frame = config.frame_samples(signal.sample_rate_hz)
    hop = config.hop_samples(signal.sample_rate_hz)
    if config.fft_size < frame:
        raise ValueError(f"fft_size {config.fft_size} smaller than frame of {frame} samples")
    x = np.asarray(signal.samples, dtype=np.float64)
    if len(x) < frame:
        raise ValueError(f"signal of {len(x)} samples shorter than one frame ({frame})")
    emphasized = np.empty_like(x)
    emphasized[0] = x[0]
    emphasized[1:] = x[1:] - config.pre_emphasis * x[:-1]
    n_frames = (len(x) - frame) // hop + 1
    idx = np.arange(frame)[None, :] + hop * np.arange(n_frames)[:, None]
    return emphasized[idx]


def filterbank_energies(signal: AudioSignal, config: MfccConfig) -> np.ndarray:
    """Mel filter energies per frame, before the log (n_frames x mel_filters).

    Frames are Hamming-windowed, zero-padded to fft_size, and turned into a
    power spectrum; energies are the filter-weighted sums of spectral power,
    so scaling the signal by a scales every energy by a**2.
    """
    frames = frame_signal(signal, config)
    window = np.hamming(frames.shape[1])
    spectrum = np.fft.rfft(frames * window, n=config.fft_size, axis=1)
    power = np.abs(spectrum) ** 2
    return power @ mel_filterbank(config, signal.sample_rate_hz).T


LOG_ENERGY_FLOOR = 1e-10


def mfcc(signal: AudioSignal, config: MfccConfig = MfccConfig()) -> np.ndarray:
    """Mel-frequency cepstral coefficients (n_frames x config.coefficients).

    Chain: pre-emphasis, 25 ms frames at a 10 ms hop, Hamming window, power
    spectrum, triangular mel filterbank, floored log, orthonormal DCT-II,
    first `coefficients` values kept.
    """
    if signal.sample_rate_hz < 8000:
        raise ValueError("sample rate below 8 kHz not supported")
    energies = filterbank_energies(signal, config)
    log_energies = np.log(np.maximum(energies, LOG_ENERGY_FLOOR))
    dct = dct_matrix(config.coefficients, config.mel_filters)
    return log_energies @ dct.T


def user_mfcc_means(matrices) -> np.ndarray:
    """Per-coefficient mean over all frames of all of a user's records."""
    mats = [np.asarray(m, dtype=np.float64) for m in matrices]
    if not mats:
        raise ValueError("need at least one coefficient matrix")
    stacked = np.concatenate(mats, axis=0)
    return stacked.mean(axis=0)
