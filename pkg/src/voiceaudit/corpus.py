"""Data model and ingestion: audio manifests, transcription tables, word
embeddings, and raw WAV audio.

File formats (all UTF-8, one record per line, append-friendly):

* Manifest: JSON object per line with keys ``user_id``, ``audio_id``,
  ``duration_seconds``, ``reference_text`` and optional ``audio_path``.
* Transcription table: JSON object per line with keys ``user_id``,
  ``audio_id``, ``hypothesis_text``.
* Embeddings: the standard pretrained-vector text layout,
  ``token v1 v2 ... vD`` separated by whitespace.
* Audio: RIFF/WAVE, PCM 16-bit, mono.

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import Rng


@dataclass(frozen=True)
class AudioRecord:
    """One utterance: who spoke, what was said, and for how long."""

    user_id: str
    audio_id: str
    reference_text: str
    duration_seconds: float
    audio_path: str | None = None

    def __post_init__(self):
        if not self.user_id:
            raise ValueError("user_id must be non-empty")
        if not self.audio_id:
            raise ValueError("audio_id must be non-empty")
        if not self.reference_text.strip():
            raise ValueError("reference_text must be non-empty")
        if not self.duration_seconds > 0:
            raise ValueError("duration_seconds must be positive")


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of utterances; the user set is derived."""

    records: tuple[AudioRecord, ...]
    name: str = ""

    def __post_init__(self):
        seen = set()
        for rec in self.records:
            key = (rec.user_id, rec.audio_id)
            if key in seen:
                raise ValueError(f"duplicate record key {key}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.records)

    def users(self) -> list[str]:
        """Distinct user ids in first-appearance order."""
        out: list[str] = []
        seen = set()
        for rec in self.records:
            if rec.user_id not in seen:
                seen.add(rec.user_id)
                out.append(rec.user_id)
        return out

    def user_set(self) -> frozenset[str]:
        return frozenset(rec.user_id for rec in self.records)

    def records_by_user(self) -> dict[str, list[AudioRecord]]:
        out: dict[str, list[AudioRecord]] = {}
        for rec in self.records:
            out.setdefault(rec.user_id, []).append(rec)
        return out


@dataclass(frozen=True)
class TranscriptionTable:
    """Black-box transcription outputs keyed by (user_id, audio_id).

    A hypothesis may be the empty string (the transcriber dropped the whole
    utterance).
    """

    entries: dict[tuple[str, str], str]

    def hypothesis_for(self, record: AudioRecord) -> str:
        key = (record.user_id, record.audio_id)
        if key not in self.entries:
            raise KeyError(f"no hypothesis for record {key}")
        return self.entries[key]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class EmbeddingTable:
    """Token -> vector map with a single shared dimension.

    Tokens are stored lowercase; loaders normalize. ``duplicates_replaced``
    counts input lines that overwrote an earlier token (last one wins).
    """

    dimension: int
    vectors: dict[str, tuple[float, ...]]
    duplicates_replaced: int = 0

    def __post_init__(self):
        if self.dimension <= 0:
            raise ValueError("dimension must be positive")
        for token, vec in self.vectors.items():
            if len(vec) != self.dimension:
                raise ValueError(f"vector for {token!r} has wrong dimension")


@dataclass(frozen=True)
class AudioSignal:
    """Mono audio in [-1, 1] at a fixed sample rate."""

    sample_rate_hz: int
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.samples.ndim != 1 or len(self.samples) == 0:
            raise ValueError("samples must be a non-empty 1-D sequence")
        if float(np.max(np.abs(self.samples))) > 1.0 + 1e-12:
            raise ValueError("samples must lie in [-1, 1]")


_MANIFEST_KEYS = ("user_id", "audio_id", "duration_seconds", "reference_text")


def load_manifest(path: str | Path, name: str | None = None) -> Dataset:
    """Read a JSONL manifest into a Dataset, preserving file order."""
    path = Path(path)
    records: list[AudioRecord] = []
    seen: set[tuple[str, str]] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise ValueError(f"{path}:{lineno}: expected a JSON object")
            missing = [k for k in _MANIFEST_KEYS if k not in obj]
            if missing:
                raise ValueError(f"{path}:{lineno}: missing fields {missing}")
            try:
                rec = AudioRecord(
                    user_id=str(obj["user_id"]),
                    audio_id=str(obj["audio_id"]),
                    reference_text=str(obj["reference_text"]),
                    duration_seconds=float(obj["duration_seconds"]),
                    audio_path=obj.get("audio_path"),
                )
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            key = (rec.user_id, rec.audio_id)
            if key in seen:
                raise ValueError(f"{path}:{lineno}: duplicate record key {key}")
            seen.add(key)
            records.append(rec)
    return Dataset(records=tuple(records), name=name if name is not None else path.stem)


def save_manifest(dataset: Dataset, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in dataset.records:
            obj = {
                "user_id": rec.user_id,
                "audio_id": rec.audio_id,
                "duration_seconds": rec.duration_seconds,
                "reference_text": rec.reference_text,
            }
            if rec.audio_path is not None:
                obj["audio_path"] = rec.audio_path
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def load_transcripts(path: str | Path) -> TranscriptionTable:
    """Read a JSONL transcription table."""
    path = Path(path)
    entries: dict[tuple[str, str], str] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            try:
                key = (str(obj["user_id"]), str(obj["audio_id"]))
                entries[key] = str(obj["hypothesis_text"])
            except (KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad transcription entry") from exc
    return TranscriptionTable(entries=entries)


def save_transcripts(table: TranscriptionTable, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for (user_id, audio_id), hyp in table.entries.items():
            obj = {"user_id": user_id, "audio_id": audio_id, "hypothesis_text": hyp}
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def split_dataset(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Partition a dataset at the user level.

    Every user's records land wholly on one side, so the two user sets are
    disjoint. The train side receives floor(train_fraction * M) users, chosen
    by a seeded shuffle; record order within each side follows the input.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    users = dataset.users()
    if len(users) < 2:
        raise ValueError("need at least 2 users to split")
    shuffled = list(users)
    Rng(seed).shuffle(shuffled)
    n_train = int(train_fraction * len(users))
    train_users = set(shuffled[:n_train])
    train_records = tuple(r for r in dataset.records if r.user_id in train_users)
    test_records = tuple(r for r in dataset.records if r.user_id not in train_users)
    return (
        Dataset(records=train_records, name=f"{dataset.name}-train"),
        Dataset(records=test_records, name=f"{dataset.name}-test"),
    )


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Read whitespace-separated ``token v1 ... vD`` vectors.

    Tokens are lowercased; on duplicates the last occurrence wins and the
    replacement count is reported on the table.
    """
    path = Path(path)
    vectors: dict[str, tuple[float, ...]] = {}
    dimension: int | None = None
    duplicates = 0
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            token = parts[0].lower()
            try:
                vec = tuple(float(v) for v in parts[1:])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: unparseable float") from exc
            if not vec:
                raise ValueError(f"{path}:{lineno}: token without vector values")
            if dimension is None:
                dimension = len(vec)
            elif len(vec) != dimension:
                raise ValueError(
                    f"{path}:{lineno}: dimension {len(vec)} != expected {dimension}"
                )
            if token in vectors:
                duplicates += 1
            vectors[token] = vec
    if dimension is None:
        raise ValueError(f"{path}: empty embedding file")
    return EmbeddingTable(dimension=dimension, vectors=vectors, duplicates_replaced=duplicates)


def read_wav(path: str | Path) -> AudioSignal:
    """Read a PCM16 mono WAV file, scaling samples to [-1, 1) by 1/32768."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wav:
            channels = wav.getnchannels()
            width = wav.getsampwidth()
            comptype = wav.getcomptype()
            rate = wav.getframerate()
            n_frames = wav.getnframes()
            raw = wav.readframes(n_frames)
    except wave.Error as exc:
        raise ValueError(f"{path}: not a readable WAV file ({exc})") from exc
    if comptype != "NONE":
        raise ValueError(f"{path}: unsupported compression {comptype!r}; PCM only")
    if channels != 1:
        raise ValueError(f"{path}: unsupported channel count {channels}; mono only")
    if width != 2:
        raise ValueError(f"{path}: unsupported sample width {8 * width} bit; 16-bit only")
    if len(raw) < 2 * n_frames:
        raise ValueError(f"{path}: truncated sample data")
    ints = np.frombuffer(raw, dtype="<i2")
    if len(ints) == 0:
        raise ValueError(f"{path}: no samples")
    return AudioSignal(sample_rate_hz=rate, samples=ints.astype(np.float64) / 32768.0)
