"""Pipeline orchestration: shadow-run querying, auditor training, auditing,
evaluation metrics, repeated trials, sweeps, and membership scenarios.

The "target model" everywhere at desk scale is the simulator (or any
externally supplied transcription table); no speech model is trained. Member
is the positive class in every metric. All randomness enters through explicit
seeds; repeats derive per-repeat seeds with the package's documented mixing
function, so a fixed configuration reproduces byte-identical CSVs.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .aggregate import FeatureSet, Label, UserFeatureVector, label_users, user_vector
from .classify import (
    AuditorModel,
    TrainConfig,
    TrainingTable,
    predict,
    predict_many,
    table_from_vectors,
    train,
)
from .corpus import AudioRecord, Dataset, TranscriptionTable, read_wav
from .features import SimilarityProvider, char_edit_provider, mfcc, record_features, user_mfcc_means
from .rng import Rng, derive_seed, hash_string
from .simulate import (
    DEFAULT_UTTERANCE_WORDS,
    ErrorModel,
    ShadowRun,
    generate_corpus,
    simulate_shadow_run,
    simulate_transcription,
)

logger = logging.getLogger(__name__)

__all__ = [
    "ShadowRun",
    "Metrics",
    "MetricsSummary",
    "AuditVerdict",
    "ScenarioQuery",
    "ExperimentConfig",
    "build_user_vectors",
    "build_training_table",
    "balance_and_sample",
    "audit_user",
    "evaluate",
    "run_trial",
    "repeated_trials",
    "sweep_training_size",
    "build_member_scenarios",
    "member_scenario_rates",
]


@dataclass(frozen=True)
class Metrics:
    """Confusion counts and derived rates, member as the positive class.

    Ratios that are undefined for the given counts (for example precision
    when nothing was predicted member) are None, never silently 0.
    """

    tp: int
    tn: int
    fp: int
    fn: int
    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None

    @classmethod
    def from_counts(cls, tp: int, tn: int, fp: int, fn: int) -> "Metrics":
        total = tp + tn + fp + fn
        if total == 0:
            raise ValueError("empty confusion matrix")
        precision = tp / (tp + fp) if tp + fp else None
        recall = tp / (tp + fn) if tp + fn else None
        if precision is None or recall is None or precision + recall == 0:
            f1 = None
        else:
            f1 = 2 * precision * recall / (precision + recall)
        return cls(
            tp=tp,
            tn=tn,
            fp=fp,
            fn=fn,
            accuracy=(tp + tn) / total,
            precision=precision,
            recall=recall,
            f1=f1,
        )


@dataclass(frozen=True)
class AuditVerdict:
    """Outcome of auditing one user."""

    user_id: str
    label: Label
    member_vote_fraction: float
    n_query_audios: int


# ---------------------------------------------------------------------------
# user vectors from shadow runs


def _user_mfcc_block(records: Sequence[AudioRecord]) -> np.ndarray:
    paths = [r.audio_path for r in records]
    if any(p is None for p in paths):
        raise ValueError("MFCC feature set requires audio_path on every record")
    return user_mfcc_means([mfcc(read_wav(p)) for p in paths])


def build_user_vectors(
    run: ShadowRun,
    provider: SimilarityProvider,
    feature_set: FeatureSet,
    audios_per_user: int | None = None,
    seed: int = 0,
) -> list[UserFeatureVector]:
    """Labeled user-level vectors from one shadow run.

    When ``audios_per_user`` is set, each user's records are capped to that
    many, chosen by a per-user seeded draw (users with fewer records keep
    them all). Records lacking a hypothesis are skipped; users left with no
    records are excluded with a logged count.
    """
    vectors: list[UserFeatureVector] = []
    excluded_users = 0
    skipped_records = 0
    for dataset in (run.shadow_train, run.shadow_test):
        by_user = dataset.records_by_user()
        for user_id in dataset.users():
            records = []
            for rec in by_user[user_id]:
                if (rec.user_id, rec.audio_id) not in run.transcripts.entries:
                    skipped_records += 1
                    continue
                records.append(rec)
            if audios_per_user is not None and len(records) > audios_per_user:
                rng = Rng(derive_seed(seed, hash_string(user_id) >> 1))
                records = rng.sample(records, audios_per_user)
            if not records:
                excluded_users += 1
                continue
            feats = [
                record_features(rec, run.transcripts.hypothesis_for(rec), provider)
                for rec in records
            ]
            mfcc_means = (
                _user_mfcc_block(records) if feature_set is FeatureSet.SET5_MFCC else None
            )
            vectors.append(user_vector(user_id, feats, mfcc_means, feature_set))
    if skipped_records:
        logger.warning("skipped %d records without hypotheses", skipped_records)
    if excluded_users:
        logger.warning("excluded %d users with no usable records", excluded_users)
    return label_users(vectors, run.shadow_train.user_set())


def build_training_table(
    runs: Sequence[ShadowRun],
    provider: SimilarityProvider,
    feature_set: FeatureSet,
    audios_per_user: int | None = None,
    seed: int = 0,
) -> TrainingTable:
    """Concatenate labeled vectors from one or more shadow runs.

    Several runs make a combined auditor: their rows are simply stacked.
    """
    if not runs:
        raise ValueError("need at least one shadow run")
    vectors: list[UserFeatureVector] = []
    for i, run in enumerate(runs):
        vectors.extend(
            build_user_vectors(run, provider, feature_set, audios_per_user, derive_seed(seed, i))
        )
    return table_from_vectors(vectors)


def balance_and_sample(table: TrainingTable, n_users: int, seed: int) -> TrainingTable:
    """Seed-sample a class-balanced subset of n_users rows, without
    replacement."""
    if n_users <= 0 or n_users % 2:
        raise ValueError("n_users must be positive and even")
    half = n_users // 2
    members = [int(i) for i in np.flatnonzero(table.y == 0)]
    nonmembers = [int(i) for i in np.flatnonzero(table.y == 1)]
    if len(members) < half or len(nonmembers) < half:
        raise ValueError(
            f"need {half} of each class, have {len(members)} members "
            f"and {len(nonmembers)} nonmembers"
        )
    rng = Rng(seed)
    rows = rng.sample(members, half) + rng.sample(nonmembers, half)
    rng.shuffle(rows)
    return TrainingTable(
        X=table.X[rows],
        y=table.y[rows],
        dim_names=table.dim_names,
        feature_set=table.feature_set,
    )


def _balance_vectors(
    vectors: Sequence[UserFeatureVector], n_users: int, seed: int
) -> list[UserFeatureVector]:
    if n_users <= 0 or n_users % 2:
        raise ValueError("n_users must be positive and even")
    half = n_users // 2
    members = [v for v in vectors if v.label is Label.MEMBER]
    nonmembers = [v for v in vectors if v.label is Label.NONMEMBER]
    if len(members) < half or len(nonmembers) < half:
        raise ValueError(
            f"need {half} of each class, have {len(members)} members "
            f"and {len(nonmembers)} nonmembers"
        )
    rng = Rng(seed)
    chosen = rng.sample(members, half) + rng.sample(nonmembers, half)
    rng.shuffle(chosen)
    return chosen


# ---------------------------------------------------------------------------
# auditing and evaluation


def audit_user(
    model: AuditorModel,
    user_records: Sequence[AudioRecord],
    hypotheses: Sequence[str],
    provider: SimilarityProvider,
) -> AuditVerdict:
    """Audit one user from their query records and transcriptions."""
    if not user_records:
        raise ValueError("need at least one query record")
    if len(user_records) != len(hypotheses):
        raise ValueError(
            f"{len(user_records)} records but {len(hypotheses)} hypotheses"
        )
    user_ids = {r.user_id for r in user_records}
    if len(user_ids) != 1:
        raise ValueError(f"records span several users: {sorted(user_ids)}")
    (user_id,) = user_ids
    feats = [record_features(r, h, provider) for r, h in zip(user_records, hypotheses)]
    mfcc_means = (
        _user_mfcc_block(user_records) if model.feature_set is FeatureSet.SET5_MFCC else None
    )
    vector = user_vector(user_id, feats, mfcc_means, model.feature_set)
    label, fraction = predict(model, vector.values)
    return AuditVerdict(
        user_id=user_id,
        label=label,
        member_vote_fraction=fraction,
        n_query_audios=len(user_records),
    )


def evaluate(model: AuditorModel, labeled_vectors: Sequence[UserFeatureVector]) -> Metrics:
    """Confusion-matrix metrics of a model over labeled user vectors."""
    if not labeled_vectors:
        raise ValueError("need at least one labeled vector")
    if any(v.label is None for v in labeled_vectors):
        raise ValueError("all vectors must be labeled")
    X = np.array([v.values for v in labeled_vectors], dtype=np.float64)
    actual = np.array([int(v.label) for v in labeled_vectors])
    predicted, _ = predict_many(model, X)
    tp = int(np.count_nonzero((predicted == 0) & (actual == 0)))
    tn = int(np.count_nonzero((predicted == 1) & (actual == 1)))
    fp = int(np.count_nonzero((predicted == 0) & (actual == 1)))
    fn = int(np.count_nonzero((predicted == 1) & (actual == 0)))
    return Metrics.from_counts(tp=tp, tn=tn, fp=fp, fn=fn)


# ---------------------------------------------------------------------------
# repeated experiments


def _mean_std(values: Iterable[float | None]) -> tuple[float | None, float | None]:
    defined = [v for v in values if v is not None]
    if not defined:
        return None, None
    mean = math.fsum(defined) / len(defined)
    var = math.fsum((v - mean) ** 2 for v in defined) / len(defined)
    return mean, math.sqrt(var)


@dataclass(frozen=True)
class MetricsSummary:
    """Mean and population std of each metric over repeated trials.

    Undefined per-repeat values are excluded from their aggregate; a metric
    undefined in every repeat aggregates to None.
    """

    repeats: int
    rows: tuple[Metrics, ...]
    accuracy_mean: float
    accuracy_std: float
    precision_mean: float | None
    precision_std: float | None
    recall_mean: float | None
    recall_std: float | None
    f1_mean: float | None
    f1_std: float | None

    @classmethod
    def from_rows(cls, rows: Sequence[Metrics]) -> "MetricsSummary":
        if not rows:
            raise ValueError("no metrics rows")
        acc_mean, acc_std = _mean_std(r.accuracy for r in rows)
        prec_mean, prec_std = _mean_std(r.precision for r in rows)
        rec_mean, rec_std = _mean_std(r.recall for r in rows)
        f1_mean, f1_std = _mean_std(r.f1 for r in rows)
        return cls(
            repeats=len(rows),
            rows=tuple(rows),
            accuracy_mean=acc_mean,
            accuracy_std=acc_std,
            precision_mean=prec_mean,
            precision_std=prec_std,
            recall_mean=rec_mean,
            recall_std=rec_std,
            f1_mean=f1_mean,
            f1_std=f1_std,
        )

    @property
    def accuracy_stderr(self) -> float:
        return self.accuracy_std / math.sqrt(self.repeats)


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulator-backed audit experiment.

    The shadow side trains the auditor (``train_users`` balanced rows); a
    fresh, user-disjoint target corpus supplies ``test_users`` balanced
    evaluation vectors.
    """

    wordlist: tuple[str, ...]
    n_shadow_users: int = 600
    n_target_users: int = 240
    records_per_user: tuple[int, int] = (3, 5)
    utterance_len_words: tuple[int, int] = DEFAULT_UTTERANCE_WORDS
    split_fraction: float = 0.5
    error_model: ErrorModel = ErrorModel()
    feature_set: FeatureSet = FeatureSet.SET5
    algorithm: str = "rf"
    train_users: int = 500
    test_users: int = 200
    audios_per_user: int | None = 5
    shadow_runs: int = 1
    train_config: TrainConfig = TrainConfig()
    provider: SimilarityProvider = char_edit_provider()


def _train_auditor(config: ExperimentConfig, seed: int) -> AuditorModel:
    runs = []
    for i in range(config.shadow_runs):
        corpus = generate_corpus(
            config.n_shadow_users,
            config.records_per_user,
            config.wordlist,
            derive_seed(seed, 2 * i),
            name=f"shadow{i}",
            user_prefix=f"shd{i}-",
            utterance_len_words=config.utterance_len_words,
        )
        runs.append(
            simulate_shadow_run(
                corpus, config.split_fraction, config.error_model, derive_seed(seed, 2 * i + 1)
            )
        )
    table = build_training_table(
        runs, config.provider, config.feature_set, config.audios_per_user, derive_seed(seed, 100)
    )
    table = balance_and_sample(table, config.train_users, derive_seed(seed, 101))
    train_config = replace(config.train_config, seed=derive_seed(seed, 102))
    return train(table, config.algorithm, train_config)


def _target_vectors(config: ExperimentConfig, seed: int) -> list[UserFeatureVector]:
    corpus = generate_corpus(
        config.n_target_users,
        config.records_per_user,
        config.wordlist,
        derive_seed(seed, 103),
        name="target",
        user_prefix="tar-",
        utterance_len_words=config.utterance_len_words,
    )
    run = simulate_shadow_run(corpus, 0.5, config.error_model, derive_seed(seed, 104))
    vectors = build_user_vectors(
        run, config.provider, config.feature_set, config.audios_per_user, derive_seed(seed, 105)
    )
    return _balance_vectors(vectors, config.test_users, derive_seed(seed, 106))


def run_trial(config: ExperimentConfig, seed: int) -> Metrics:
    """Train an auditor on a fresh shadow run and evaluate it on a fresh
    target; fully determined by (config, seed)."""
    model = _train_auditor(config, seed)
    return evaluate(model, _target_vectors(config, seed))


def repeated_trials(config: ExperimentConfig, repeats: int, base_seed: int) -> MetricsSummary:
    """Run the experiment ``repeats`` times with derived seeds."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rows = [run_trial(config, derive_seed(base_seed, r)) for r in range(repeats)]
    return MetricsSummary.from_rows(rows)


def _check_capacity(config: ExperimentConfig, size: int) -> None:
    per_run_members = int(config.split_fraction * config.n_shadow_users)
    members = per_run_members * config.shadow_runs
    nonmembers = (config.n_shadow_users - per_run_members) * config.shadow_runs
    if size // 2 > min(members, nonmembers):
        raise ValueError(
            f"training size {size} exceeds available users "
            f"({members} members / {nonmembers} nonmembers)"
        )


def sweep_training_size(
    sizes: Sequence[int], config: ExperimentConfig, repeats: int, base_seed: int
) -> list[tuple[int, MetricsSummary]]:
    """One aggregated row per training-set size."""
    if list(sizes) != sorted(sizes) or len(set(sizes)) != len(sizes):
        raise ValueError("sizes must be strictly ascending")
    for size in sizes:
        _check_capacity(config, size)
    out = []
    for i, size in enumerate(sizes):
        summary = repeated_trials(
            replace(config, train_users=size), repeats, derive_seed(base_seed, i)
        )
        out.append((size, summary))
    return out


# ---------------------------------------------------------------------------
# membership scenarios (seen vs unseen query audios of member users)


@dataclass(frozen=True)
class ScenarioQuery:
    """One member user's query set: seen audios were in the target's
    training data, unseen ones were not."""

    user_id: str
    seen: tuple[AudioRecord, ...]
    unseen: tuple[AudioRecord, ...]


def build_member_scenarios(
    target_train: Dataset,
    target_test: Dataset,
    k_in: int,
    m_out: int,
    seed: int,
) -> list[ScenarioQuery]:
    """Per-member-user query sets mixing k_in seen with m_out unseen audios.

    Member users are those with at least one record in ``target_train``.
    k_in=0 gives the pure unseen-query scenario, m_out=0 the pure seen one.
    Users lacking enough records on either side are skipped with a logged
    count; no qualifying user at all is an error.
    """
    if k_in < 0 or m_out < 0 or k_in + m_out == 0:
        raise ValueError("need k_in >= 0, m_out >= 0, k_in + m_out >= 1")
    train_by_user = target_train.records_by_user()
    test_by_user = target_test.records_by_user()
    queries: list[ScenarioQuery] = []
    skipped = 0
    for user_id in sorted(train_by_user):
        train_records = train_by_user[user_id]
        test_records = test_by_user.get(user_id, [])
        if len(train_records) < k_in or len(test_records) < m_out:
            skipped += 1
            continue
        rng = Rng(derive_seed(seed, hash_string(user_id) >> 1))
        queries.append(
            ScenarioQuery(
                user_id=user_id,
                seen=tuple(rng.sample(train_records, k_in)),
                unseen=tuple(rng.sample(test_records, m_out)),
            )
        )
    if skipped:
        logger.warning("skipped %d member users lacking records for the scenario", skipped)
    if not queries:
        raise ValueError(f"no member user has {k_in} seen and {m_out} unseen records")
    return queries


def _overlap_target(
    config: ExperimentConfig, seed: int
) -> tuple[Dataset, Dataset, TranscriptionTable]:
    """Target whose member users have records both inside and outside its
    training data (records split per user, unlike the user-level shadow
    splits)."""
    corpus = generate_corpus(
        config.n_target_users,
        config.records_per_user,
        config.wordlist,
        derive_seed(seed, 0),
        name="target",
        user_prefix="tar-",
        utterance_len_words=config.utterance_len_words,
    )
    users = corpus.users()
    rng = Rng(derive_seed(seed, 1))
    shuffled = list(users)
    rng.shuffle(shuffled)
    member_users = set(shuffled[: len(users) // 2])
    train_records: list[AudioRecord] = []
    test_records: list[AudioRecord] = []
    for user_id, records in corpus.records_by_user().items():
        if user_id in member_users:
            user_rng = Rng(derive_seed(seed, hash_string("overlap:" + user_id) >> 1))
            chosen = user_rng.sample(records, (len(records) + 1) // 2)
            chosen_keys = {(r.user_id, r.audio_id) for r in chosen}
            train_records.extend(chosen)
            test_records.extend(
                r for r in records if (r.user_id, r.audio_id) not in chosen_keys
            )
        else:
            test_records.extend(records)
    target_train = Dataset(records=tuple(train_records), name="target-train")
    target_test = Dataset(records=tuple(test_records), name="target-test")
    transcription_seed = derive_seed(seed, 2)
    entries = {}
    for dataset, is_member in ((target_train, True), (target_test, False)):
        for rec in dataset.records:
            entries[(rec.user_id, rec.audio_id)] = simulate_transcription(
                rec, is_member, config.error_model, transcription_seed
            )
    return target_train, target_test, TranscriptionTable(entries)


@dataclass(frozen=True)
class ScenarioSummary:
    """Member-detection rate of one (k_in, m_out) mix over repeats."""

    k_in: int
    m_out: int
    rates: tuple[float, ...]
    mean: float
    std: float


def member_scenario_rates(
    config: ExperimentConfig,
    mixes: Sequence[tuple[int, int]],
    repeats: int,
    base_seed: int,
) -> list[ScenarioSummary]:
    """Per-user member-detection rate for each seen/unseen query mix.

    Each repeat trains one auditor and reuses it for every mix, so the mixes
    are compared on identical models and targets.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    per_mix: dict[tuple[int, int], list[float]] = {tuple(m): [] for m in mixes}
    for r in range(repeats):
        seed = derive_seed(base_seed, r)
        model = _train_auditor(config, seed)
        target_train, target_test, transcripts = _overlap_target(config, derive_seed(seed, 200))
        for i, (k_in, m_out) in enumerate(mixes):
            queries = build_member_scenarios(
                target_train, target_test, k_in, m_out, derive_seed(seed, 300 + i)
            )
            detected = 0
            for query in queries:
                records = list(query.seen) + list(query.unseen)
                hypotheses = [transcripts.hypothesis_for(rec) for rec in records]
                verdict = audit_user(model, records, hypotheses, config.provider)
                if verdict.label is Label.MEMBER:
                    detected += 1
            per_mix[(k_in, m_out)].append(detected / len(queries))
    out = []
    for (k_in, m_out), rates in per_mix.items():
        mean, std = _mean_std(rates)
        out.append(ScenarioSummary(k_in=k_in, m_out=m_out, rates=tuple(rates), mean=mean, std=std))
    return out


# ---------------------------------------------------------------------------
# CSV export


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


METRICS_HEADER = ("repeat", "tp", "tn", "fp", "fn", "accuracy", "precision", "recall", "f1")
SWEEP_HEADER = (
    "size",
    "acc_mean",
    "acc_std",
    "prec_mean",
    "prec_std",
    "rec_mean",
    "rec_std",
    "f1_mean",
    "f1_std",
)


def write_metrics_csv(rows: Sequence[Metrics], path: str | Path) -> None:
    """Per-repeat metrics; header METRICS_HEADER, absent ratios empty."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for i, m in enumerate(rows):
            writer.writerow(
                [i, m.tp, m.tn, m.fp, m.fn, _fmt(m.accuracy), _fmt(m.precision), _fmt(m.recall), _fmt(m.f1)]
            )


def write_sweep_csv(rows: Sequence[tuple[int, MetricsSummary]], path: str | Path) -> None:
    """One row per training-set size; header SWEEP_HEADER."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for size, s in rows:
            writer.writerow(
                [
                    size,
                    _fmt(s.accuracy_mean),
                    _fmt(s.accuracy_std),
                    _fmt(s.precision_mean),
                    _fmt(s.precision_std),
                    _fmt(s.recall_mean),
                    _fmt(s.recall_std),
                    _fmt(s.f1_mean),
                    _fmt(s.f1_std),
                ]
            )
