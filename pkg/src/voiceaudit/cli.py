"""Command-line entry point.

Subcommands cover the batch pipeline end to end::

    simulate   emit a seeded corpus plus shadow-run files
    features   records + hypotheses -> record-feature CSV
    aggregate  record features -> user-vector CSV
    train      labeled user vectors -> model file
    audit      model + query files -> one verdict line per user
    eval       model + labeled vectors -> metrics CSV
    sweep      config file -> training-size sweep CSV

Every run writes its artifacts plus a ``run.json`` reproducibility block
(full flag values, seeds, package version) and a ``run.log`` into the output
directory. All randomness enters through explicit ``--seed`` flags; nothing
reads the clock, so identical invocations produce byte-identical outputs.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .aggregate import (
    FeatureSet,
    UserFeatureVector,
    label_users,
    read_vectors_csv,
    user_vector,
    write_vectors_csv,
)
from .classify import TrainConfig, load_model, save_model, table_from_vectors, train
from .corpus import load_embeddings, load_manifest, load_transcripts, read_wav, save_manifest, save_transcripts
from .features import (
    RecordFeatures,
    char_edit_provider,
    embedding_provider,
    mfcc,
    record_features,
    user_mfcc_means,
)
from .rng import Rng, derive_seed, hash_string
from .simulate import ErrorModel, generate_corpus, load_wordlist, simulate_shadow_run
from .workflow import (
    ExperimentConfig,
    audit_user,
    evaluate,
    sweep_training_size,
    write_metrics_csv,
    write_sweep_csv,
)

logger = logging.getLogger("voiceaudit")

RECORD_FEATURES_HEADER = (
    "user_id",
    "audio_id",
    "similarity",
    "missing_count",
    "extra_count",
    "frame_length",
    "speed",
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we map usage -> 1
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="voiceaudit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"voiceaudit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="emit a seeded corpus and shadow-run files")
    p.add_argument("--users", type=int, required=True)
    p.add_argument("--records-min", type=int, default=3)
    p.add_argument("--records-max", type=int, default=5)
    p.add_argument("--wordlist", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--split", type=float, default=0.5)
    p.add_argument("--member-cer", type=float, default=0.05)
    p.add_argument("--nonmember-cer", type=float, default=0.09)
    p.add_argument("--noise-multiplier", type=float, default=1.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("features", help="extract record-level features")
    p.add_argument("--manifest", required=True)
    p.add_argument("--transcripts", required=True)
    p.add_argument("--embeddings", help="vector file; omitted -> char-edit similarity")
    p.add_argument("--out", required=True)

    p = sub.add_parser("aggregate", help="aggregate record features into user vectors")
    p.add_argument("--features", required=True, help="record-feature CSV")
    p.add_argument("--feature-set", choices=[fs.value for fs in FeatureSet], default="set5")
    p.add_argument("--manifest", help="needed for set5mfcc (audio paths)")
    p.add_argument("--members", help="file of member user ids, one per line; enables labels")
    p.add_argument("--audios-per-user", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train an auditor from labeled user vectors")
    p.add_argument("--vectors", required=True)
    p.add_argument("--feature-set", choices=[fs.value for fs in FeatureSet], default="set5")
    p.add_argument("--algorithm", choices=["dt", "rf", "knn3", "gnb"], default="rf")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--rf-trees", type=int, default=100)
    p.add_argument("--dt-max-depth", type=int, default=12)
    p.add_argument("--dt-min-leaf", type=int, default=2)
    p.add_argument("--knn-k", type=int, default=3)
    p.add_argument("--out", required=True)

    p = sub.add_parser("audit", help="audit users: model + query files -> verdicts")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True, help="query records, grouped per user")
    p.add_argument("--transcripts", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="evaluate a model on labeled user vectors")
    p.add_argument("--model", required=True)
    p.add_argument("--vectors", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="training-size sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    return parser


def _prepare_out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log", mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.addHandler(handler)
    if root.level > logging.INFO or root.level == logging.NOTSET:
        root.setLevel(logging.INFO)
    return out


def _write_run_json(out: Path, args) -> None:
    config = {k: v for k, v in vars(args).items() if k != "command"}
    doc = {
        "package": "voiceaudit",
        "version": __version__,
        "command": args.command,
        "config": config,
    }
    (out / "run.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _provider_from_flag(embeddings_path):
    if embeddings_path:
        return embedding_provider(load_embeddings(embeddings_path))
    return char_edit_provider()


def _cmd_simulate(args, out: Path) -> None:
    words = load_wordlist(args.wordlist)
    error_model = ErrorModel(
        member_cer=args.member_cer,
        nonmember_cer=args.nonmember_cer,
        noise_multiplier=args.noise_multiplier,
    )
    corpus = generate_corpus(
        args.users, (args.records_min, args.records_max), words, args.seed
    )
    run = simulate_shadow_run(corpus, args.split, error_model, derive_seed(args.seed, 1))
    save_manifest(corpus, out / "corpus.jsonl")
    save_manifest(run.shadow_train, out / "shadow_train.jsonl")
    save_manifest(run.shadow_test, out / "shadow_test.jsonl")
    save_transcripts(run.transcripts, out / "transcripts.jsonl")
    logger.info(
        "simulated %d records over %d users (%d train / %d test)",
        len(corpus),
        len(corpus.users()),
        len(run.shadow_train.users()),
        len(run.shadow_test.users()),
    )


def _cmd_features(args, out: Path) -> None:
    dataset = load_manifest(args.manifest)
    transcripts = load_transcripts(args.transcripts)
    provider = _provider_from_flag(args.embeddings)
    with (out / "record_features.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_FEATURES_HEADER)
        for rec in dataset.records:
            feats = record_features(rec, transcripts.hypothesis_for(rec), provider)
            writer.writerow(
                [
                    rec.user_id,
                    rec.audio_id,
                    repr(feats.similarity),
                    feats.missing_count,
                    feats.extra_count,
                    repr(feats.frame_length),
                    repr(feats.speed),
                ]
            )
    logger.info("wrote features for %d records", len(dataset))


def _read_record_features(path: str) -> list[tuple[str, str, RecordFeatures]]:
    rows = []
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != RECORD_FEATURES_HEADER:
            raise ValueError(f"{path}: unexpected record-feature header {header}")
        for row in reader:
            if not row:
                continue
            user_id, audio_id, sim, miss, extra, frame, speed = row
            rows.append(
                (
                    user_id,
                    audio_id,
                    RecordFeatures(
                        similarity=float(sim),
                        missing_count=int(miss),
                        extra_count=int(extra),
                        frame_length=float(frame),
                        speed=float(speed),
                    ),
                )
            )
    return rows


def _cmd_aggregate(args, out: Path) -> None:
    feature_set = FeatureSet(args.feature_set)
    rows = _read_record_features(args.features)
    audio_paths: dict[tuple[str, str], str] = {}
    if feature_set is FeatureSet.SET5_MFCC:
        if not args.manifest:
            raise ValueError("set5mfcc needs --manifest for audio paths")
        for rec in load_manifest(args.manifest).records:
            if rec.audio_path is None:
                raise ValueError(f"record {(rec.user_id, rec.audio_id)} has no audio_path")
            audio_paths[(rec.user_id, rec.audio_id)] = rec.audio_path
    per_user: dict[str, list[tuple[str, RecordFeatures]]] = {}
    order: list[str] = []
    for user_id, audio_id, feats in rows:
        if user_id not in per_user:
            per_user[user_id] = []
            order.append(user_id)
        per_user[user_id].append((audio_id, feats))
    vectors: list[UserFeatureVector] = []
    for user_id in order:
        entries = per_user[user_id]
        if args.audios_per_user is not None and len(entries) > args.audios_per_user:
            rng = Rng(derive_seed(args.seed, hash_string(user_id) >> 1))
            entries = rng.sample(entries, args.audios_per_user)
        mfcc_means = None
        if feature_set is FeatureSet.SET5_MFCC:
            mats = [
                mfcc(read_wav(audio_paths[(user_id, audio_id)])) for audio_id, _ in entries
            ]
            mfcc_means = user_mfcc_means(mats)
        vectors.append(user_vector(user_id, [f for _, f in entries], mfcc_means, feature_set))
    if args.members:
        members = {
            line.strip()
            for line in Path(args.members).read_text(encoding="utf-8").splitlines()
            if line.strip()
        }
        vectors = label_users(vectors, members)
    write_vectors_csv(vectors, out / "user_vectors.csv")
    logger.info("aggregated %d users", len(vectors))


def _cmd_train(args, out: Path) -> None:
    feature_set = FeatureSet(args.feature_set)
    vectors = read_vectors_csv(args.vectors, feature_set)
    if any(v.label is None for v in vectors):
        raise ValueError("training vectors must all carry labels")
    config = TrainConfig(
        seed=args.seed,
        dt_max_depth=args.dt_max_depth,
        dt_min_samples_leaf=args.dt_min_leaf,
        rf_n_trees=args.rf_trees,
        knn_k=args.knn_k,
    )
    model = train(table_from_vectors(vectors), args.algorithm, config)
    save_model(model, out / "model.json")
    logger.info("trained %s on %d users", args.algorithm, len(vectors))


def _cmd_audit(args, out: Path) -> None:
    model = load_model(args.model)
    dataset = load_manifest(args.manifest)
    transcripts = load_transcripts(args.transcripts)
    provider = _provider_from_flag(args.embeddings)
    by_user = dataset.records_by_user()
    with (out / "verdicts.jsonl").open("w", encoding="utf-8", newline="\n") as fh:
        for user_id in dataset.users():
            records = by_user[user_id]
            hypotheses = [transcripts.hypothesis_for(rec) for rec in records]
            verdict = audit_user(model, records, hypotheses, provider)
            fh.write(
                json.dumps(
                    {
                        "user_id": verdict.user_id,
                        "label": int(verdict.label),
                        "vote_fraction": verdict.member_vote_fraction,
                        "n_query_audios": verdict.n_query_audios,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    logger.info("audited %d users", len(by_user))


def _cmd_eval(args, out: Path) -> None:
    model = load_model(args.model)
    vectors = read_vectors_csv(args.vectors, model.feature_set)
    metrics = evaluate(model, vectors)
    write_metrics_csv([metrics], out / "metrics.csv")
    parts = [f"accuracy={metrics.accuracy:.4f}"]
    for name in ("precision", "recall", "f1"):
        value = getattr(metrics, name)
        parts.append(f"{name}=absent" if value is None else f"{name}={value:.4f}")
    print(" ".join(parts))


def _experiment_config_from_json(doc: dict) -> tuple[ExperimentConfig, list[int], int, int]:
    known = {
        "wordlist",
        "sizes",
        "repeats",
        "base_seed",
        "algorithm",
        "feature_set",
        "audios_per_user",
        "n_shadow_users",
        "n_target_users",
        "records_per_user",
        "utterance_len_words",
        "split_fraction",
        "test_users",
        "shadow_runs",
        "error_model",
    }
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown sweep config keys: {sorted(unknown)}")
    for key in ("wordlist", "sizes", "repeats", "base_seed"):
        if key not in doc:
            raise ValueError(f"sweep config missing {key!r}")
    em = doc.get("error_model", {})
    unknown_em = set(em) - {"member_cer", "nonmember_cer", "noise_multiplier", "mix"}
    if unknown_em:
        raise ValueError(f"unknown error_model keys: {sorted(unknown_em)}")
    error_model = ErrorModel(
        member_cer=em.get("member_cer", 0.05),
        nonmember_cer=em.get("nonmember_cer", 0.09),
        noise_multiplier=em.get("noise_multiplier", 1.0),
        mix=tuple(em.get("mix", (0.6, 0.2, 0.2))),
    )
    config = ExperimentConfig(
        wordlist=load_wordlist(doc["wordlist"]),
        n_shadow_users=doc.get("n_shadow_users", 600),
        n_target_users=doc.get("n_target_users", 240),
        records_per_user=tuple(doc.get("records_per_user", (3, 5))),
        utterance_len_words=tuple(doc.get("utterance_len_words", (4, 8))),
        split_fraction=doc.get("split_fraction", 0.5),
        error_model=error_model,
        feature_set=FeatureSet(doc.get("feature_set", "set5")),
        algorithm=doc.get("algorithm", "rf"),
        test_users=doc.get("test_users", 200),
        audios_per_user=doc.get("audios_per_user", 5),
        shadow_runs=doc.get("shadow_runs", 1),
    )
    return config, list(doc["sizes"]), int(doc["repeats"]), int(doc["base_seed"])


def _cmd_sweep(args, out: Path) -> None:
    doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    config, sizes, repeats, base_seed = _experiment_config_from_json(doc)
    rows = sweep_training_size(sizes, config, repeats, base_seed)
    write_sweep_csv(rows, out / "sweep.csv")
    def fmt(value):
        return "" if value is None else repr(float(value))

    with (out / "per_repeat.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("size", "repeat", "tp", "tn", "fp", "fn", "accuracy", "precision", "recall", "f1"))
        for size, summary in rows:
            for i, m in enumerate(summary.rows):
                writer.writerow(
                    [size, i, m.tp, m.tn, m.fp, m.fn, fmt(m.accuracy), fmt(m.precision), fmt(m.recall), fmt(m.f1)]
                )
    for size, summary in rows:
        logger.info("size %d: mean accuracy %.4f", size, summary.accuracy_mean)


_COMMANDS = {
    "simulate": _cmd_simulate,
    "features": _cmd_features,
    "aggregate": _cmd_aggregate,
    "train": _cmd_train,
    "audit": _cmd_audit,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
}


def run(argv) -> int:
    """Parse argv and execute; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    handler = None
    root = logging.getLogger()
    try:
        out = _prepare_out_dir(args)
        handler = root.handlers[-1]
        _write_run_json(out, args)
        _COMMANDS[args.command](args, out)
        return 0
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    finally:
        if handler is not None:
            handler.close()
            root.removeHandler(handler)


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
