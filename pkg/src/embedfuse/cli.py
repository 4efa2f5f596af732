"""Command-line pipeline driver.

Each subcommand is a thin shell over one library call:

    synth        generate a synthetic paired-embedding dataset
    inspect      validate a dataset file and print its shape
    split        shuffle a dataset into train/val/test files
    filter       near-duplicate removal by cosine threshold
    train-head   fit the projection head
    knn-fit      build and save a nearest-neighbor index
    predict      run head (a), neighbors (b), or an ensemble blend
    sweep-alpha  grid-search the ensemble mixing weight
    eval         average cosine similarity of predictions vs truth
    bench        time serial vs threaded prediction, check bit-equality

Contract: results go to stdout as a single JSON line. Configuration and
usage problems exit 2, data/format/IO problems exit 1, and either way a
single JSON line {"error": "config"|"data", "message": ...} goes to stderr.
Outputs are only written after the computation has fully succeeded, and
report files never contain filesystem paths, so re-running a pipeline under
a different directory yields byte-identical artifacts.

The worker thread count comes from --threads, falling back to the
EMBEDFUSE_THREADS environment variable, defaulting to 1. Numerical results
never depend on it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from embedfuse.data import (
    PairedDataset,
    SynthConfig,
    generate_synthetic,
    read_pairs,
    split_dataset,
    write_pairs,
)
from embedfuse.dedup import FilterConfig, filter_by_similarity
from embedfuse.ensemble import EnsembleConfig, blend, sweep_alpha
from embedfuse.errors import ConfigError, EmbedFuseError
from embedfuse.head import (
    TrainConfig,
    head_predict,
    load_head_params,
    save_head_params,
    train,
)
from embedfuse.knn import KnnConfig, knn_fit, knn_predict_batch, load_index, save_index
from embedfuse.metrics import avg_cos_sim, config_digest

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems on the JSON error contract."""

    def error(self, message):  # noqa: A003 - argparse API
        print(json.dumps({"error": "config", "message": message}), file=sys.stderr)
        raise SystemExit(2)


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _write_report(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _resolve_threads(flag_value: int | None) -> int:
    if flag_value is not None:
        value = flag_value
    else:
        env = os.environ.get("EMBEDFUSE_THREADS")
        if env is None:
            return 1
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(
                f"EMBEDFUSE_THREADS must be an integer, got {env!r}"
            ) from None
    if value < 1:
        raise ConfigError(f"threads must be >= 1, got {value}")
    return value


def _require_matching_ids(a: PairedDataset, b: PairedDataset, what: str) -> None:
    if a.count != b.count:
        raise_from = f"{what}: record counts differ ({a.count} vs {b.count})"
        raise EmbedFuseError(raise_from)
    if not np.array_equal(a.ids, b.ids):
        first = int(np.nonzero(a.ids != b.ids)[0][0])
        raise EmbedFuseError(
            f"{what}: ids must match in order; first mismatch at row {first} "
            f"({int(a.ids[first])} vs {int(b.ids[first])})"
        )


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_synth(args) -> None:
    dim_img = args.dim_img if args.dim_img is not None else args.dim
    dim_txt = args.dim_txt if args.dim_txt is not None else args.dim
    if dim_img is None:
        raise ConfigError("dim_img: pass --dim-img (or --dim for both sides)")
    if dim_txt is None:
        raise ConfigError("dim_txt: pass --dim-txt (or --dim for both sides)")
    config = SynthConfig(
        count=args.count,
        dim_img=dim_img,
        dim_txt=dim_txt,
        noise_sigma=args.sigma,
        seed=args.seed,
    )
    dataset, _ = generate_synthetic(config)
    written = write_pairs(dataset, args.out)
    _emit(
        {
            "count": dataset.count,
            "dim_img": dataset.dim_img,
            "dim_txt": dataset.dim_txt,
            "noise_sigma": config.noise_sigma,
            "seed": config.seed,
            "bytes": written,
        }
    )


def _cmd_inspect(args) -> None:
    dataset = read_pairs(args.in_path)
    payload = {
        "version": 1,
        "count": dataset.count,
        "dim_img": dataset.dim_img,
        "dim_txt": dataset.dim_txt,
    }
    if dataset.count:
        payload["id_min"] = int(dataset.ids.min())
        payload["id_max"] = int(dataset.ids.max())
    _emit(payload)


def _cmd_split(args) -> None:
    dataset = read_pairs(args.in_path)
    f_train = 1.0 - args.val_fraction - args.test_fraction
    train_set, val_set, test_set = split_dataset(
        dataset, (f_train, args.val_fraction, args.test_fraction), args.seed
    )
    write_pairs(train_set, args.out_train)
    write_pairs(val_set, args.out_val)
    write_pairs(test_set, args.out_test)
    _emit(
        {
            "train": train_set.count,
            "val": val_set.count,
            "test": test_set.count,
            "seed": args.seed,
        }
    )


def _cmd_filter(args) -> None:
    dataset = read_pairs(args.in_path)
    config = FilterConfig(threshold=args.threshold, field_selector=args.field)
    kept, report = filter_by_similarity(dataset, config)
    write_pairs(kept, args.out)
    payload = report.as_dict()
    if args.report is not None:
        _write_report(args.report, payload)
    _emit(payload)


def _cmd_train_head(args) -> None:
    train_set = read_pairs(args.train)
    val_set = read_pairs(args.val)
    config = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr_fc=args.lr_fc,
        lr_vision=args.lr_vision,
        seed=args.seed,
        hidden_dim=args.hidden_dim,
        train_adapter=args.train_adapter,
        train_proj=args.train_proj,
        freeze_alpha=args.freeze_alpha,
    )
    params, history = train(config, train_set, val_set)
    written = save_head_params(params, args.out)
    best = max(history, key=lambda s: s.val_avg_cossim)
    digest = config_digest(
        {
            "command": "train-head",
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "lr_fc": config.lr_fc,
            "lr_vision": config.lr_vision,
            "seed": config.seed,
            "hidden_dim": config.hidden_dim,
            "train_adapter": config.train_adapter,
            "train_proj": config.train_proj,
            "freeze_alpha": config.freeze_alpha,
        }
    )
    if args.history is not None:
        lines = [
            json.dumps(
                {
                    "epoch": s.epoch,
                    "train_loss": s.train_loss,
                    "val_avg_cossim": s.val_avg_cossim,
                },
                sort_keys=True,
            )
            for s in history
        ]
        Path(args.history).write_text("\n".join(lines) + "\n")
    _emit(
        {
            "best_epoch": best.epoch,
            "best_val_avg_cossim": best.val_avg_cossim,
            "config_digest": digest,
            "bytes": written,
        }
    )


def _cmd_knn_fit(args) -> None:
    train_set = read_pairs(args.train)
    config = KnnConfig(
        k=args.k,
        distance_dim=args.distance_dim,
        delta=args.delta,
        coef=args.coef,
        index_space=args.index_space,
    )
    index = knn_fit(train_set, config)
    save_index(index, args.out + ".embp", args.out + ".json")
    _emit(
        {
            "count": index.count,
            "k": config.k,
            "index_space": config.index_space,
            "key_dim": index.key_dim,
            "text_dim": index.text_dim,
        }
    )


def _cmd_predict(args) -> None:
    threads = _resolve_threads(args.threads)
    if args.model == "a":
        if args.params is None:
            raise ConfigError("params: --params is required for --model a")
        if args.in_path is None:
            raise ConfigError("in: --in is required for --model a")
        queries = read_pairs(args.in_path)
        params = load_head_params(args.params)
        preds = head_predict(params, queries, threads=threads)
        out_set = PairedDataset(queries.ids, queries.images, preds.astype("<f4"))
    elif args.model == "b":
        if args.index is None:
            raise ConfigError("index: --index is required for --model b")
        if args.in_path is None:
            raise ConfigError("in: --in is required for --model b")
        queries = read_pairs(args.in_path)
        index = load_index(args.index + ".embp", args.index + ".json")
        preds = knn_predict_batch(index, queries.images, threads=threads)
        out_set = PairedDataset(queries.ids, queries.images, preds.astype("<f4"))
    else:  # ensemble
        if args.a_pred is None or args.b_pred is None:
            raise ConfigError(
                "a_pred/b_pred: --a-pred and --b-pred are required for "
                "--model ensemble"
            )
        if args.alpha is None:
            raise ConfigError("alpha: --alpha is required for --model ensemble")
        a_set = read_pairs(args.a_pred)
        b_set = read_pairs(args.b_pred)
        _require_matching_ids(a_set, b_set, "ensemble inputs")
        config = EnsembleConfig(
            alpha_ens=args.alpha, normalize_inputs=not args.raw
        )
        mixed = blend(a_set.texts, b_set.texts, config)
        out_set = PairedDataset(a_set.ids, a_set.images, mixed.astype("<f4"))
    written = write_pairs(out_set, args.out)
    _emit(
        {
            "model": args.model,
            "count": out_set.count,
            "dim_txt": out_set.dim_txt,
            "bytes": written,
        }
    )


def _parse_grid(args) -> np.ndarray:
    if args.grid is not None:
        try:
            values = [float(part) for part in args.grid.split(",") if part.strip()]
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from None
        if not values:
            raise ConfigError("grid: no values given")
        return np.asarray(values)
    if args.steps < 2:
        raise ConfigError(f"steps: must be >= 2 to cover 0 and 1, got {args.steps}")
    return np.linspace(0.0, 1.0, args.steps)


def _cmd_sweep_alpha(args) -> None:
    a_set = read_pairs(args.a_pred)
    b_set = read_pairs(args.b_pred)
    truth = read_pairs(args.truth)
    _require_matching_ids(a_set, b_set, "sweep inputs")
    _require_matching_ids(a_set, truth, "sweep predictions vs truth")
    grid = _parse_grid(args)
    best_alpha, scored = sweep_alpha(
        a_set.texts,
        b_set.texts,
        truth.texts,
        grid,
        normalize_inputs=not args.raw,
    )
    best_score = dict(scored)[best_alpha]
    payload = {
        "best_alpha": best_alpha,
        "best_avg_cossim": best_score,
        "grid": [
            {"alpha": alpha, "avg_cossim": score} for alpha, score in scored
        ],
        "config_digest": config_digest(
            {
                "command": "sweep-alpha",
                "grid": [alpha for alpha, _ in scored],
                "raw": args.raw,
            }
        ),
    }
    if args.report is not None:
        _write_report(args.report, payload)
    _emit(payload)


def _cmd_eval(args) -> None:
    pred = read_pairs(args.pred)
    truth = read_pairs(args.truth)
    _require_matching_ids(pred, truth, "eval predictions vs truth")
    context = {"command": "eval", "per_pair": args.per_pair, "label": args.label}
    report = avg_cos_sim(
        pred.texts,
        truth.texts,
        ids=pred.ids,
        include_per_pair=args.per_pair,
        context=context,
    )
    payload = report.as_dict()
    payload["label"] = args.label
    if args.report is not None:
        _write_report(args.report, payload)
    _emit(payload)


def _cmd_bench(args) -> None:
    threads = _resolve_threads(args.threads)
    corpus, _ = generate_synthetic(
        SynthConfig(
            count=args.count,
            dim_img=args.dim,
            dim_txt=args.dim,
            noise_sigma=0.05,
            seed=args.seed,
        )
    )
    queries, _ = generate_synthetic(
        SynthConfig(
            count=args.queries,
            dim_img=args.dim,
            dim_txt=args.dim,
            noise_sigma=0.05,
            seed=args.seed + 1,
        )
    )
    index = knn_fit(corpus, KnnConfig(k=args.k, index_space="image"))

    start = time.perf_counter()
    serial = knn_predict_batch(index, queries.images)
    serial_s = time.perf_counter() - start
    start = time.perf_counter()
    threaded = knn_predict_batch(index, queries.images, threads=threads)
    threaded_s = time.perf_counter() - start
    if not np.array_equal(serial, threaded):
        raise EmbedFuseError("threaded prediction diverged from the serial result")
    _emit(
        {
            "corpus": args.count,
            "queries": args.queries,
            "dim": args.dim,
            "k": args.k,
            "threads": threads,
            "serial_s": round(serial_s, 6),
            "threads_s": round(threaded_s, 6),
            "queries_per_sec": round(args.queries / serial_s, 2),
            "identical": True,
        }
    )


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="embedfuse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", help="generate a synthetic paired dataset")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--dim", type=int, help="set both embedding dims at once")
    p.add_argument("--dim-img", type=int)
    p.add_argument("--dim-txt", type=int)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("inspect", help="validate a dataset file, print its shape")
    p.add_argument("--in", dest="in_path", required=True)
    p.set_defaults(handler=_cmd_inspect)

    p = sub.add_parser("split", help="shuffle into train/val/test files")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--test-fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-val", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(handler=_cmd_split)

    p = sub.add_parser("filter", help="drop near-duplicate records")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--threshold", type=float, default=0.85)
    p.add_argument("--field", choices=("text", "image"), default="text")
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(handler=_cmd_filter)

    p = sub.add_parser("train-head", help="fit the projection head")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr-fc", type=float, default=1e-3)
    p.add_argument("--lr-vision", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden-dim", type=int, default=None)
    p.add_argument("--train-adapter", action="store_true")
    p.add_argument("--train-proj", action="store_true")
    p.add_argument("--freeze-alpha", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument(
        "--history", help="write per-epoch stats to this file as JSON lines"
    )
    p.set_defaults(handler=_cmd_train_head)

    p = sub.add_parser("knn-fit", help="build and save a neighbor index")
    p.add_argument("--train", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--distance-dim", type=float, default=2.0)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--coef", type=float, default=1.0)
    p.add_argument("--index-space", choices=("text", "image"), default="text")
    p.add_argument("--out", required=True, help="path prefix: writes .embp and .json")
    p.set_defaults(handler=_cmd_knn_fit)

    p = sub.add_parser("predict", help="predict text embeddings")
    p.add_argument("--model", choices=("a", "b", "ensemble"), required=True)
    p.add_argument("--in", dest="in_path", help="query dataset (models a and b)")
    p.add_argument("--params", help="head parameter file (model a)")
    p.add_argument("--index", help="index path prefix (model b)")
    p.add_argument("--a-pred", help="first prediction file (ensemble)")
    p.add_argument("--b-pred", help="second prediction file (ensemble)")
    p.add_argument("--alpha", type=float, help="mixing weight (ensemble)")
    p.add_argument("--raw", action="store_true", help="skip input normalization")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_predict)

    p = sub.add_parser("sweep-alpha", help="grid-search the ensemble weight")
    p.add_argument("--a-pred", required=True)
    p.add_argument("--b-pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--grid", help="comma-separated alphas, must include 0 and 1")
    p.add_argument("--steps", type=int, default=21, help="uniform grid size")
    p.add_argument("--raw", action="store_true")
    p.add_argument("--report")
    p.set_defaults(handler=_cmd_sweep_alpha)

    p = sub.add_parser("eval", help="average cosine similarity report")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--per-pair", action="store_true")
    p.add_argument("--label", default=None, help="tag for this evaluation run")
    p.add_argument("--report")
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("bench", help="neighbor-search throughput benchmark")
    p.add_argument("--count", type=int, default=2000, help="corpus size")
    p.add_argument("--queries", type=int, default=200)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(handler=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        args.handler(args)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return 2
    except (EmbedFuseError, OSError) as exc:
        print(json.dumps({"error": "data", "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
