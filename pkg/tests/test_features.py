import math

import numpy as np
import pytest

from oracles import naive_dft
from voiceaudit.corpus import AudioRecord, AudioSignal, EmbeddingTable
from voiceaudit.features import (
    LOG_ENERGY_FLOOR,
    MfccConfig,
    char_edit_provider,
    dct_matrix,
    embedding_provider,
    filter_centers_hz,
    filterbank_energies,
    frame_signal,
    mel_filterbank,
    mfcc,
    record_features,
    similarity_char,
    similarity_embedding,
    user_mfcc_means,
)
from voiceaudit.rng import Rng


def _record(text, duration, user="u1", audio="a1"):
    return AudioRecord(
        user_id=user, audio_id=audio, reference_text=text, duration_seconds=duration
    )


# --- similarity ----------------------------------------------------------


def test_similarity_char_basics():
    assert similarity_char("AB", "AB") == 1.0
    assert similarity_char("AB", "") == 0.0
    assert similarity_char("ABCD", "ABXD") == 0.75
    assert similarity_char("", "") == 1.0


def test_similarity_char_bounds_and_equality():
    rng = Rng(12)
    alphabet = "ABC "
    for _ in range(300):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randrange(10)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randrange(10)))
        s = similarity_char(a, b)
        assert 0.0 <= s <= 1.0
        assert (s == 1.0) == (a == b)


TWO_D_TABLE = EmbeddingTable(dimension=2, vectors={"hello": (1.0, 0.0), "world": (0.0, 1.0)})


def test_similarity_embedding_identical_sentence():
    assert similarity_embedding("HELLO WORLD", "hello world", TWO_D_TABLE) == pytest.approx(
        1.0, abs=1e-12
    )


def test_similarity_embedding_oov_returns_zero():
    assert similarity_embedding("XYZZY QUUX", "hello", TWO_D_TABLE) == 0.0
    assert similarity_embedding("hello", "", TWO_D_TABLE) == 0.0


def test_similarity_embedding_hand_computed_cosine():
    # mean("hello world") = (0.5, 0.5); mean("hello") = (1, 0)
    # cos = 0.5 / (sqrt(0.5) * 1) = 1/sqrt(2)
    got = similarity_embedding("hello world", "hello", TWO_D_TABLE)
    assert got == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-12)


def test_similarity_embedding_symmetric():
    table = EmbeddingTable(
        dimension=3,
        vectors={
            "one": (0.3, -0.2, 0.9),
            "two": (0.5, 0.5, 0.1),
            "three": (-0.7, 0.2, 0.2),
        },
    )
    pairs = [("one two", "two three"), ("one", "three two one"), ("two two", "three")]
    for a, b in pairs:
        assert similarity_embedding(a, b, table) == pytest.approx(
            similarity_embedding(b, a, table), abs=1e-12
        )


def test_embedding_provider_requires_table():
    with pytest.raises(ValueError):
        from voiceaudit.features import SimilarityProvider

        SimilarityProvider(kind="embedding")


# --- record features -----------------------------------------------------


def test_record_features_perfect_transcription():
    record = _record("ABCDEFGHIJKLMNOPQRST", 2.0)  # 20 chars
    feats = record_features(record, "ABCDEFGHIJKLMNOPQRST", char_edit_provider())
    assert feats.similarity == 1.0
    assert feats.missing_count == 0
    assert feats.extra_count == 0
    assert feats.frame_length == 2.0
    assert feats.speed == 10.0


def test_record_features_kaffar_counts():
    record = _record("THAT IS KAFFAR'S KNIFE", 3.0)
    feats = record_features(record, "THAT IS CALF OUR'S KNIFE", char_edit_provider())
    assert feats.missing_count == 3
    assert feats.extra_count == 5
    assert feats.frame_length == 3.0


def test_record_features_empty_hypothesis():
    record = _record("AB", 1.0)
    feats = record_features(record, "", char_edit_provider())
    assert feats.similarity == 0.0
    assert feats.missing_count == 2
    assert feats.extra_count == 0
    assert feats.speed == 2.0


def test_record_features_uppercases_before_alignment():
    record = _record("Hello", 1.0)
    feats = record_features(record, "hello", char_edit_provider())
    assert feats.missing_count == 0
    assert feats.extra_count == 0
    assert feats.similarity == 1.0


def test_speed_times_frame_length_recovers_char_count():
    rng = Rng(5)
    for _ in range(100):
        n = rng.randint(1, 40)
        text = "".join(rng.choice("ABC") for _ in range(n))
        duration = rng.uniform(0.2, 9.0)
        feats = record_features(_record(text, duration), text, char_edit_provider())
        assert feats.speed * feats.frame_length == pytest.approx(n, rel=1e-9)


# --- MFCC ----------------------------------------------------------------


def _sine(freq, rate=16000, seconds=0.5, amplitude=0.4):
    t = np.arange(int(rate * seconds)) / rate
    return AudioSignal(sample_rate_hz=rate, samples=amplitude * np.sin(2 * np.pi * freq * t))


def test_mfcc_config_validation():
    with pytest.raises(ValueError):
        MfccConfig(coefficients=30, mel_filters=26)
    with pytest.raises(ValueError):
        MfccConfig(fft_size=500)  # not a power of two
    with pytest.raises(ValueError):
        MfccConfig(frame_ms=0)


def test_mfcc_zero_signal_all_floor():
    signal = AudioSignal(sample_rate_hz=16000, samples=np.zeros(8000))
    config = MfccConfig()
    energies = filterbank_energies(signal, config)
    assert np.all(energies == 0.0)
    coeffs = mfcc(signal, config)
    # every frame identical, and log energies pinned at the floor
    expected_row = dct_matrix(13, 26) @ np.full(26, math.log(LOG_ENERGY_FLOOR))
    assert coeffs.shape == ((8000 - 400) // 160 + 1, 13)
    assert np.allclose(coeffs, expected_row[None, :])


def test_mfcc_shape_law_random_combos():
    rng = Rng(1010)
    for _ in range(20):
        rate = rng.choice([8000, 11025, 16000, 22050])
        config = MfccConfig(fft_size=1024)
        frame = config.frame_samples(rate)
        hop = config.hop_samples(rate)
        n = rng.randint(frame, frame + 5000)
        signal = AudioSignal(
            sample_rate_hz=rate,
            samples=np.array([rng.uniform(-0.5, 0.5) for _ in range(n)]),
        )
        coeffs = mfcc(signal, config)
        assert coeffs.shape == ((n - frame) // hop + 1, 13)


def test_mfcc_rejects_short_signal():
    signal = AudioSignal(sample_rate_hz=16000, samples=np.zeros(399))
    with pytest.raises(ValueError, match="shorter than one frame"):
        mfcc(signal, MfccConfig())


def test_fft_stage_matches_naive_dft():
    rng = Rng(2020)
    config = MfccConfig(fft_size=256, frame_ms=10.0)  # 160-sample frames at 16 kHz
    signal = AudioSignal(
        sample_rate_hz=16000,
        samples=np.array([rng.uniform(-0.5, 0.5) for _ in range(1000)]),
    )
    frames = frame_signal(signal, config)
    windowed = frames * np.hamming(frames.shape[1])
    fft = np.fft.rfft(windowed, n=config.fft_size, axis=1)
    for row in range(len(windowed)):
        padded = list(windowed[row]) + [0.0] * (config.fft_size - windowed.shape[1])
        oracle = naive_dft(padded)[: config.fft_size // 2 + 1]
        got = fft[row]
        scale = max(abs(v) for v in oracle) or 1.0
        assert max(abs(g - o) for g, o in zip(got, oracle)) / scale < 1e-6


def test_dct_matrix_orthonormal():
    mat = dct_matrix(26, 26)
    assert np.max(np.abs(mat @ mat.T - np.eye(26))) < 1e-10


def test_sine_energy_peaks_at_nearest_filter():
    config = MfccConfig()
    signal = _sine(1000.0)
    energies = filterbank_energies(signal, config).sum(axis=0)
    centers = filter_centers_hz(config, signal.sample_rate_hz)
    nearest = int(np.argmin(np.abs(centers - 1000.0)))
    assert int(np.argmax(energies)) == nearest
    # cross-check the spectral location with the naive DFT oracle
    frames = frame_signal(signal, config)
    windowed = frames[0] * np.hamming(len(frames[0]))
    padded = list(windowed) + [0.0] * (config.fft_size - len(windowed))
    oracle_power = np.array([abs(v) ** 2 for v in naive_dft(padded)[: config.fft_size // 2 + 1]])
    oracle_energies = mel_filterbank(config, signal.sample_rate_hz) @ oracle_power
    assert int(np.argmax(oracle_energies)) == nearest


def test_filterbank_energies_scale_quadratically():
    config = MfccConfig()
    base = _sine(700.0, amplitude=0.3)
    scaled = AudioSignal(sample_rate_hz=base.sample_rate_hz, samples=2.0 * base.samples)
    e1 = filterbank_energies(base, config)
    e2 = filterbank_energies(scaled, config)
    mask = e1 > 1e-18
    assert np.allclose(e2[mask] / e1[mask], 4.0, rtol=1e-6)


def test_mfcc_coefficient_count_is_13():
    assert mfcc(_sine(440.0)).shape[1] == 13


def test_fft_size_must_cover_frame():
    signal = _sine(440.0, rate=32000, seconds=0.2)
    with pytest.raises(ValueError, match="fft_size"):
        mfcc(signal, MfccConfig())  # 25 ms at 32 kHz = 800 > 512


def test_user_mfcc_means():
    one_frame = np.arange(13.0)[None, :]
    assert np.array_equal(user_mfcc_means([one_frame]), np.arange(13.0))
    assert np.array_equal(user_mfcc_means([one_frame, one_frame]), np.arange(13.0))
    two = np.vstack([np.zeros(13), np.ones(13)])
    assert np.allclose(user_mfcc_means([two]), np.full(13, 0.5))
    hand = user_mfcc_means([one_frame, 3.0 * one_frame])
    assert np.allclose(hand, 2.0 * np.arange(13.0))
    with pytest.raises(ValueError):
        user_mfcc_means([])
