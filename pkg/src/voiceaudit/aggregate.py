"""User-level aggregation: 7-statistic summaries, feature sets, labeling.

A user's queried records collapse into one sample: each selected record-level
feature is summarized by seven statistics (sum, maximum, minimum, average,
median, standard deviation, variance), concatenated in a fixed order that is
part of the model schema. Missing/extra characters enter as counts.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterable, Sequence

from .features import RecordFeatures


class Label(IntEnum):
    MEMBER = 0
    NONMEMBER = 1


@dataclass(frozen=True)
class StatVector:
    """The seven summary statistics of one feature over a user's records."""

    sum: float
    maximum: float
    minimum: float
    average: float
    median: float
    std_dev: float
    variance: float

    def as_tuple(self) -> tuple[float, ...]:
        return (
            self.sum,
            self.maximum,
            self.minimum,
            self.average,
            self.median,
            self.std_dev,
            self.variance,
        )


STAT_NAMES = ("sum", "max", "min", "avg", "median", "std", "var")


def stats7(values: Sequence[float]) -> StatVector:
    """Summary statistics of a non-empty list.

    Variance is the population form (divide by m), which stays defined for a
    single value. Median is the middle element, or the mean of the two middle
    elements for even m.
    """
    m = len(values)
    if m == 0:
        raise ValueError("stats7 of an empty list")
    ordered = sorted(values)
    total = math.fsum(ordered)
    average = total / m
    if m % 2:
        median = ordered[m // 2]
    else:
        median = (ordered[m // 2 - 1] + ordered[m // 2]) / 2.0
    variance = math.fsum((v - average) ** 2 for v in ordered) / m
    return StatVector(
        sum=total,
        maximum=ordered[-1],
        minimum=ordered[0],
        average=average,
        median=median,
        std_dev=math.sqrt(variance),
        variance=variance,
    )


class FeatureSet(Enum):
    """Which record-level features feed the user vector."""

    SET3 = "set3"  # similarity, frame_length, speed
    SET5 = "set5"  # + missing/extra character counts
    SET5_MFCC = "set5mfcc"  # + 13 per-user MFCC means

    @property
    def record_features(self) -> tuple[str, ...]:
        if self is FeatureSet.SET3:
            return ("similarity", "frame_length", "speed")
        return ("similarity", "missing_count", "extra_count", "frame_length", "speed")

    @property
    def dims(self) -> int:
        base = 7 * len(self.record_features)
        return base + 13 if self is FeatureSet.SET5_MFCC else base

    def dim_names(self) -> tuple[str, ...]:
        names = [
            f"{feature}_{stat}" for feature in self.record_features for stat in STAT_NAMES
        ]
        if self is FeatureSet.SET5_MFCC:
            names += [f"mfcc_mean_{i}" for i in range(13)]
        return tuple(names)


@dataclass(frozen=True)
class UserFeatureVector:
    """One user-level sample: the auditor's unit of classification."""

    user_id: str
    values: tuple[float, ...]
    feature_set: FeatureSet
    label: Label | None = None

    def __post_init__(self):
        if len(self.values) != self.feature_set.dims:
            raise ValueError(
                f"{self.feature_set.value} expects {self.feature_set.dims} dims, "
                f"got {len(self.values)}"
            )


def user_vector(
    user_id: str,
    records: Sequence[RecordFeatures],
    mfcc_means: Sequence[float] | None,
    feature_set: FeatureSet,
) -> UserFeatureVector:
    """Aggregate one user's record features into a labeled-ready vector.

    ``mfcc_means`` must be given exactly when the feature set includes the
    audio-specific block. Record order does not matter.
    """
    if not records:
        raise ValueError("user_vector needs at least one record")
    if feature_set is FeatureSet.SET5_MFCC:
        if mfcc_means is None:
            raise ValueError("feature set set5mfcc requires mfcc_means")
        if len(mfcc_means) != 13:
            raise ValueError(f"expected 13 MFCC means, got {len(mfcc_means)}")
    elif mfcc_means is not None:
        raise ValueError(f"feature set {feature_set.value} does not take mfcc_means")
    values: list[float] = []
    for feature in feature_set.record_features:
        stats = stats7([float(getattr(r, feature)) for r in records])
        values.extend(stats.as_tuple())
    if mfcc_means is not None:
        values.extend(float(v) for v in mfcc_means)
    return UserFeatureVector(user_id=user_id, values=tuple(values), feature_set=feature_set)


def label_users(
    vectors: Iterable[UserFeatureVector], training_user_ids: Iterable[str]
) -> list[UserFeatureVector]:
    """Mark each vector member/nonmember by the user-level rule.

    A user is a member exactly when their id appears in the training user
    set, regardless of which audios were actually queried.
    """
    members = set(training_user_ids)
    return [
        replace(v, label=Label.MEMBER if v.user_id in members else Label.NONMEMBER)
        for v in vectors
    ]


def write_vectors_csv(vectors: Sequence[UserFeatureVector], path: str | Path) -> None:
    """CSV export: header user_id, f0..f{D-1}, label (0/1, empty if unset)."""
    if not vectors:
        raise ValueError("nothing to write")
    dims = vectors[0].feature_set.dims
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["user_id"] + [f"f{i}" for i in range(dims)] + ["label"])
        for vec in vectors:
            label = "" if vec.label is None else str(int(vec.label))
            writer.writerow([vec.user_id] + [repr(v) for v in vec.values] + [label])


def read_vectors_csv(path: str | Path, feature_set: FeatureSet) -> list[UserFeatureVector]:
    """Load vectors written by :func:`write_vectors_csv`."""
    path = Path(path)
    out: list[UserFeatureVector] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["user_id"] + [f"f{i}" for i in range(feature_set.dims)] + ["label"]
        if header != expected:
            raise ValueError(
                f"{path}: header does not match feature set {feature_set.value} "
                f"({feature_set.dims} dims)"
            )
        for row in reader:
            if not row:
                continue
            if len(row) != len(expected):
                raise ValueError(f"{path}: row with {len(row)} fields, expected {len(expected)}")
            label = None if row[-1] == "" else Label(int(row[-1]))
            out.append(
                UserFeatureVector(
                    user_id=row[0],
                    values=tuple(float(v) for v in row[1:-1]),
                    feature_set=feature_set,
                    label=label,
                )
            )
    return out
