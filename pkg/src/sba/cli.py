"""Command-line pipeline: select, aggregate, fit-pca, apply-pca, retrieve,
eval-map, eval-recall, classify.

Every stage reads and writes files, so any step can be rerun or swapped.
Config precedence is flags > config file > defaults; the config file is plain
``key = value`` text.  Results are invariant to --workers.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import io
from .aggregation import aggregate
from .classification import evaluate_accuracy, knn, mn_classify
from .detectors import combine_pooled_stats, select_detectors, sum_pool
from .exceptions import (
    EmptyDatasetError,
    FormatError,
    IncompleteError,
    ParamError,
    SbaError,
    ShapeError,
)
from .postprocess import apply_pca_whiten, fit_pca_whiten, l2_normalize
from .retrieval import (
    mean_average_precision,
    query_expansion,
    rank,
    recall_at_n,
)


@dataclass
class PipelineConfig:
    alpha: float = 2.0
    beta: float = 2.0
    n_detectors: int = 25
    dim: int = 4096
    k: int = 40
    qe_top: int = 10
    final_norm: bool = True
    workers: int = 1
    seed: int = 0

    def validate(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ParamError("alpha and beta must be > 0")
        for name in ("n_detectors", "dim", "k", "qe_top", "workers"):
            if getattr(self, name) < 1:
                raise ParamError(f"{name} must be >= 1")


def _parse_config_file(path) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve_config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    file_values = _parse_config_file(args.config) if getattr(args, "config", None) else {}
    for f in fields(PipelineConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            setattr(cfg, f.name, flag)
        elif f.name in file_values:
            raw = file_values[f.name]
            if f.type == "bool":
                setattr(cfg, f.name, raw.lower() in ("1", "true", "yes", "on"))
            else:
                setattr(cfg, f.name, type(f.default)(raw))
    cfg.validate()
    return cfg


def _load_tensors_pooled(manifest, workers):
    """Sum-pool every tensor, in manifest order regardless of worker count."""
    paths = [rec.tensor_path for rec in manifest]
    if workers <= 1:
        return [sum_pool(io.read_tensor(p)) for p in paths]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_pool_one, paths, chunksize=4))


def _pool_one(path):
    return sum_pool(io.read_tensor(path))


_AGG_STATE = {}


def _agg_init(indices, source_channels, alpha, beta):
    _AGG_STATE["args"] = (indices, source_channels, alpha, beta)


def _agg_one(path):
    from .detectors import DetectorSet

    indices, c, alpha, beta = _AGG_STATE["args"]
    detectors = DetectorSet(indices=indices, variances=np.zeros(len(indices)),
                            source_channels=c)
    return aggregate(io.read_tensor(path), detectors, alpha, beta).astype(np.float32)


def cmd_select(args):
    cfg = _resolve_config(args)
    manifest = io.read_manifest(args.manifest)
    if len(manifest) == 0:
        raise EmptyDatasetError(f"manifest {args.manifest} is empty")
    pooled = _load_tensors_pooled(manifest, cfg.workers)
    stats = combine_pooled_stats(pooled)
    detectors = select_detectors(stats, cfg.n_detectors)
    io.write_detector_set(detectors, args.out)


def cmd_aggregate(args):
    cfg = _resolve_config(args)
    manifest = io.read_manifest(args.manifest)
    if len(manifest) == 0:
        raise EmptyDatasetError(f"manifest {args.manifest} is empty")
    detectors = io.read_detector_set(args.detectors)
    paths = [rec.tensor_path for rec in manifest]
    if cfg.workers <= 1:
        rows = [
            aggregate(io.read_tensor(p), detectors, cfg.alpha, cfg.beta)
            .astype(np.float32)
            for p in paths
        ]
    else:
        with ProcessPoolExecutor(
            max_workers=cfg.workers,
            initializer=_agg_init,
            initargs=(detectors.indices, detectors.source_channels,
                      cfg.alpha, cfg.beta),
        ) as pool:
            rows = list(pool.map(_agg_one, paths, chunksize=4))
    io.write_vector_batch(np.stack(rows), args.out)


def cmd_fit_pca(args):
    cfg = _resolve_config(args)
    vectors = io.read_vector_batch(args.vectors)
    n, d = vectors.shape
    m = cfg.dim
    cap = min(d, n - 1)
    if m > cap:
        warnings.warn(f"dim={m} exceeds data rank bound {cap}; capping")
        m = cap
    model = fit_pca_whiten(l2_normalize(vectors), m)
    io.write_whitening_model(model, args.out)


def cmd_apply_pca(args):
    cfg = _resolve_config(args)
    vectors = io.read_vector_batch(args.vectors)
    model = io.read_whitening_model(args.model)
    out = apply_pca_whiten(l2_normalize(vectors), model, cfg.final_norm)
    io.write_vector_batch(out.astype(np.float32), args.out)


def _rank_all(queries, query_ids, database, db_ids, qe, qe_top):
    ranked_lists = []
    for q, qid in zip(queries, query_ids):
        ranked = rank(q, database, db_ids, query_id=qid)
        if qe:
            expanded = query_expansion(q, ranked, database, db_ids, top=qe_top)
            ranked = rank(expanded, database, db_ids, query_id=qid)
        ranked_lists.append(ranked)
    return ranked_lists


def cmd_retrieve(args):
    cfg = _resolve_config(args)
    queries = io.read_vector_batch(args.queries)
    query_manifest = io.read_manifest(args.query_manifest)
    database = io.read_vector_batch(args.database)
    db_manifest = io.read_manifest(args.db_manifest)
    if queries.shape[0] != len(query_manifest):
        raise ShapeError("query batch and query manifest sizes differ")
    if database.shape[0] != len(db_manifest):
        raise ShapeError("database batch and database manifest sizes differ")
    ranked_lists = _rank_all(
        queries, query_manifest.image_ids, database, db_manifest.image_ids,
        args.qe, cfg.qe_top,
    )
    io.write_ranked_lists(ranked_lists, args.out)


def cmd_eval_map(args):
    ranked_lists = io.read_ranked_lists(args.rankings)
    gt = io.read_ground_truth(args.ground_truth)
    print(f"{mean_average_precision(ranked_lists, gt):.6f}")


def _read_positives(path):
    """Positive id sets per query: either 2-field lines or a ground-truth
    file whose good/ok sets count as positives."""
    positives: dict[str, set] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) == 2:
                positives.setdefault(parts[0], set()).add(parts[1])
            elif len(parts) == 3 and parts[2] in ("good", "ok", "junk"):
                if parts[2] != "junk":
                    positives.setdefault(parts[0], set()).add(parts[1])
            else:
                raise FormatError(f"{path}:{lineno}: malformed positives line")
    return positives


def cmd_eval_recall(args):
    ranked_lists = io.read_ranked_lists(args.rankings)
    positives = _read_positives(args.positives)
    n_values = [int(n) for n in args.n.split(",")]
    for n, r in zip(n_values, recall_at_n(ranked_lists, positives, n_values)):
        print(f"recall@{n}\t{r:.6f}")


def cmd_classify(args):
    cfg = _resolve_config(args)
    tests = io.read_vector_batch(args.tests)
    test_manifest = io.read_manifest(args.test_manifest)
    database = io.read_vector_batch(args.database)
    db_manifest = io.read_manifest(args.db_manifest)
    if tests.shape[0] != len(test_manifest):
        raise ShapeError("test batch and test manifest sizes differ")
    if database.shape[0] != len(db_manifest):
        raise ShapeError("database batch and database manifest sizes differ")
    labels = [rec.label for rec in db_manifest]
    if any(label is None for label in labels):
        raise IncompleteError("database manifest must label every image")
    k = cfg.k
    if k > database.shape[0]:
        warnings.warn(f"k={k} exceeds database size {database.shape[0]}; clamping")
        k = database.shape[0]
    predictions = []
    predicted_by_id = {}
    for vec, rec in zip(tests, test_manifest):
        neighbors = knn(vec, database, db_manifest.image_ids, labels, k,
                        query_id=rec.image_id)
        table = mn_classify(neighbors, args.mn_weight)
        predictions.append((rec.image_id, table.predicted, table.top_score))
        predicted_by_id[rec.image_id] = table.predicted
    io.write_predictions(predictions, args.out)
    truth = {rec.image_id: rec.label for rec in test_manifest
             if rec.label is not None}
    if truth:
        acc = evaluate_accuracy(truth, predicted_by_id)
        print(f"accuracy\t{acc:.6f}")


def _add_common(parser):
    parser.add_argument("--alpha", type=float, default=None,
                        help="power-normalization exponent (default 2)")
    parser.add_argument("--beta", type=float, default=None,
                        help="power-scaling exponent (default 2)")
    parser.add_argument("--n-detectors", type=int, default=None,
                        dest="n_detectors",
                        help="number of selected channels (default 25)")
    parser.add_argument("--dim", type=int, default=None,
                        help="compressed output dimensionality (default 4096)")
    parser.add_argument("--k", type=int, default=None,
                        help="neighbor count for classification (default 40)")
    parser.add_argument("--qe-top", type=int, default=None, dest="qe_top",
                        help="results averaged for query expansion (default 10)")
    parser.add_argument("--final-norm", action=argparse.BooleanOptionalAction,
                        default=None, dest="final_norm",
                        help="re-normalize after whitening (default on)")
    parser.add_argument("--workers", type=int, default=None,
                        help="parallel workers; results are worker-invariant")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for randomized operations")
    parser.add_argument("--config", default=None,
                        help="key = value config file (flags take precedence)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sba",
        description="Semantic-based aggregation pipeline for image retrieval "
                    "and classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="select detector channels by variance")
    p.add_argument("manifest", help="dataset manifest of SBAT tensors")
    p.add_argument("--out", required=True, help="output SBADET file")
    _add_common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("aggregate", help="aggregate tensors into raw vectors")
    p.add_argument("manifest", help="dataset manifest of SBAT tensors")
    p.add_argument("detectors", help="SBADET detector file")
    p.add_argument("--out", required=True, help="output SBAV batch file")
    _add_common(p)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("fit-pca", help="fit the PCA-whitening model")
    p.add_argument("vectors", help="SBAV batch of raw vectors")
    p.add_argument("--out", required=True, help="output SBAP model file")
    _add_common(p)
    p.set_defaults(func=cmd_fit_pca)

    p = sub.add_parser("apply-pca", help="compress vectors with a fitted model")
    p.add_argument("vectors", help="SBAV batch of raw vectors")
    p.add_argument("model", help="SBAP model file")
    p.add_argument("--out", required=True, help="output SBAV batch file")
    _add_common(p)
    p.set_defaults(func=cmd_apply_pca)

    p = sub.add_parser("retrieve", help="rank the database for each query")
    p.add_argument("queries", help="SBAV batch of query vectors")
    p.add_argument("query_manifest", help="manifest naming the queries")
    p.add_argument("database", help="SBAV batch of database vectors")
    p.add_argument("db_manifest", help="manifest naming the database")
    p.add_argument("--out", required=True, help="output rankings file")
    p.add_argument("--qe", action="store_true",
                   help="apply one round of average query expansion")
    _add_common(p)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("eval-map", help="mean average precision of rankings")
    p.add_argument("rankings", help="rankings file from retrieve")
    p.add_argument("ground_truth", help="good/ok/junk ground-truth file")
    _add_common(p)
    p.set_defaults(func=cmd_eval_map)

    p = sub.add_parser("eval-recall", help="recall@N of rankings")
    p.add_argument("rankings", help="rankings file from retrieve")
    p.add_argument("positives", help="per-query positive id sets")
    p.add_argument("--n", default="1,5,10", help="comma-separated N values")
    _add_common(p)
    p.set_defaults(func=cmd_eval_recall)

    p = sub.add_parser("classify", help="MN-classify test vectors")
    p.add_argument("tests", help="SBAV batch of test vectors")
    p.add_argument("test_manifest", help="manifest naming the test images")
    p.add_argument("database", help="SBAV batch of labeled database vectors")
    p.add_argument("db_manifest", help="labeled manifest for the database")
    p.add_argument("--out", required=True, help="output predictions file")
    p.add_argument("--mn-weight", choices=("paper", "plus-one"),
                   default="paper", dest="mn_weight",
                   help="rank-weight scheme for neighbor votes")
    _add_common(p)
    p.set_defaults(func=cmd_classify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (SbaError, ValueError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
