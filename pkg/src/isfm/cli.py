"""Command-line entry points: fuse, eval, bench, inspect.

Exit codes: 0 success, 1 nothing to do, 2 usage or shape error,
3 data-format error (unreadable image, bad weight archive).
"""

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import imgio, metrics, wavelet, weights
from .kernels import ConfigError, ShapeError
from .losses import LossWeights, loss_total
from .net import IsfmConfig, ModalityPair, fuse_color, isfm_forward, rgb_to_ycbcr
from .ssm import selective_scan, SsmParams

EXIT_OK = 0
EXIT_EMPTY = 1
EXIT_USAGE = 2
EXIT_FORMAT = 3


def _thread_count(value):
    if value is not None:
        return value
    env = os.environ.get("ISFM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _load_luma(path):
    """Read an image and return (y, cb, cr); gray images get neutral chroma."""
    arr = imgio.read_image(path)
    if arr.shape[0] == 3:
        return rgb_to_ycbcr(arr)
    neutral = np.full_like(arr, 0.5)
    return arr, neutral, neutral


def _build_config(args):
    return IsfmConfig(
        channels=args.channels,
        num_vssm=args.num_vssm,
        enable_mff=not args.no_mff,
        enable_fgg=not args.no_fgg,
        enable_fgm=not args.no_fgm,
    )


def cmd_fuse(args):
    ir_y, _, _ = _load_luma(args.ir)
    vi_y, vi_cb, vi_cr = _load_luma(args.vi)
    if ir_y.shape != vi_y.shape:
        print(f"error: input sizes differ: ir {tuple(ir_y.shape[1:])} vs "
              f"vi {tuple(vi_y.shape[1:])}", file=sys.stderr)
        return EXIT_USAGE
    cfg = _build_config(args)
    if args.weights:
        archive = weights.load_weights(args.weights)
    else:
        archive = weights.init_weights(cfg, args.seed if args.seed is not None else 42)
    pair = ModalityPair(ir=ir_y, vi_y=vi_y, vi_cb=vi_cb, vi_cr=vi_cr)
    fused_y = isfm_forward(pair, archive.entries, cfg)
    out = fused_y if args.gray else fuse_color(fused_y, vi_cb, vi_cr)
    imgio.write_image(args.out, out)
    breakdown = loss_total(fused_y, ir_y, vi_y, LossWeights())
    print(json.dumps(breakdown.to_dict()))
    return EXIT_OK


def _discover_pairs(pairs_dir, fused_dir):
    """Stems from <stem>_ir.*; returns (triples, warnings)."""
    pairs_dir = Path(pairs_dir)
    fused_dir = Path(fused_dir)
    triples = []
    skipped = []
    for ir_path in sorted(pairs_dir.glob("*_ir.*")):
        stem = ir_path.name[: -len("_ir" + ir_path.suffix)]
        vi_matches = sorted(pairs_dir.glob(f"{stem}_vi.*"))
        fused_matches = sorted(fused_dir.glob(f"{stem}.*"))
        if not vi_matches:
            skipped.append(f"{stem}: no visible image")
            continue
        if not fused_matches:
            skipped.append(f"{stem}: no fused image")
            continue
        triples.append((stem, ir_path, vi_matches[0], fused_matches[0]))
    return triples, skipped


def _eval_one(stem, ir_path, vi_path, fused_path):
    ir_y, _, _ = _load_luma(ir_path)
    vi_y, _, _ = _load_luma(vi_path)
    fused_y, _, _ = _load_luma(fused_path)
    return metrics.evaluate_pair(ir_y, vi_y, fused_y, name=stem)


def _write_report(reports, out_path, fmt):
    header = ["name"] + list(metrics.METRIC_NAMES)
    means = [float(np.mean([getattr(r, m) for r in reports])) for m in metrics.METRIC_NAMES]
    if fmt == "json":
        payload = {
            "images": [dict(zip(header, [r.name] + r.values())) for r in reports],
            "mean": dict(zip(metrics.METRIC_NAMES, means)),
        }
        Path(out_path).write_text(json.dumps(payload, indent=2) + "\n")
    else:
        with open(out_path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for r in reports:
                wr.writerow([r.name] + [f"{v:.6f}" for v in r.values()])
            wr.writerow(["mean"] + [f"{v:.6f}" for v in means])


def cmd_eval(args):
    out_path = Path(args.out)
    if args.rank:
        with open(args.rank, newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 3:
            print("error: rank table needs a header and at least 2 methods", file=sys.stderr)
            return EXIT_EMPTY
        metric_names = rows[0][1:]
        methods = [r[0] for r in rows[1:] if r]
        values = [[float(v) if v.strip() else math.nan for v in r[1:]] for r in rows[1:] if r]
        table = metrics.avg_rank(methods, values, metrics=metric_names)
        with open(out_path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(rows[0] + ["avg_rank"])
            by_name = dict(zip(table.methods, table.avg_rank))
            for row in rows[1:]:
                if not row:
                    continue
                rank = by_name.get(row[0])
                wr.writerow(row + ([f"{rank:.6f}"] if rank is not None else [""]))
        if not args.no_plot:
            from . import plots
            plots.rank_figure(table, out_path.with_suffix(".png"))
        for name, rank in zip(table.methods, table.avg_rank):
            print(f"{name}: avg rank {rank:.2f}")
        return EXIT_OK

    if not args.pairs_dir or not args.fused_dir:
        print("error: eval needs PAIRS_DIR and FUSED_DIR (or --rank)", file=sys.stderr)
        return EXIT_USAGE
    triples, skipped = _discover_pairs(args.pairs_dir, args.fused_dir)
    for msg in skipped:
        print(f"warning: skipped {msg}", file=sys.stderr)
    if not triples:
        print("error: no evaluable image pairs found", file=sys.stderr)
        return EXIT_EMPTY
    n_threads = _thread_count(args.threads)
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            reports = list(pool.map(lambda t: _eval_one(*t), triples))
    else:
        reports = [_eval_one(*t) for t in triples]
    reports.sort(key=lambda r: r.name)
    _write_report(reports, out_path, args.format)
    if not args.no_plot:
        from . import plots
        plots.metric_figure(reports, out_path.with_suffix(".png"))
    print(f"evaluated {len(reports)} image(s), skipped {len(skipped)}, report: {out_path}")
    return EXIT_OK


def _bench_scan_instance(L, rng):
    d_inner, n_state = 16, 16
    u = rng.uniform(-1.0, 1.0, (L, d_inner)).astype(np.float32)
    delta = rng.uniform(1e-3, 1e-1, (L, d_inner)).astype(np.float32)
    b_seq = rng.uniform(-1.0, 1.0, (L, n_state)).astype(np.float32)
    c_seq = rng.uniform(-1.0, 1.0, (L, n_state)).astype(np.float32)
    params = SsmParams(
        a_log=np.log(np.tile(np.arange(1, n_state + 1, dtype=np.float32), (d_inner, 1))),
        delta_w=None, delta_b=None, b_w=None, b_b=None, c_w=None, c_b=None,
        d_skip=np.ones(d_inner, dtype=np.float32))
    return lambda: selective_scan(u, delta, b_seq, c_seq, params)


def cmd_bench(args):
    sizes = args.sizes
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        print("error: --sizes must be strictly increasing", file=sys.stderr)
        return EXIT_USAGE
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    rows = []
    for size in sizes:
        if args.op == "scan":
            fn = _bench_scan_instance(size, rng)
        elif args.op == "dwt":
            x = rng.uniform(0.0, 1.0, (8, size, size)).astype(np.float32)
            fn = lambda: wavelet.dwt2(x)
        else:
            cfg = IsfmConfig(channels=args.channels, num_vssm=args.num_vssm)
            archive = weights.init_weights(cfg, 0)
            pair = ModalityPair(
                ir=rng.uniform(0, 1, (1, size, size)).astype(np.float32),
                vi_y=rng.uniform(0, 1, (1, size, size)).astype(np.float32))
            fn = lambda: isfm_forward(pair, archive.entries, cfg)
        fn()  # warm-up, untimed
        times = []
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        med = float(np.median(times))
        rows.append((size, med))
        print(f"{args.op} size {size}: median {med:.6f}s over {args.repeats} repeat(s)")
    slope = None
    if len(rows) >= 2:
        slope = float(np.polyfit(np.log([r[0] for r in rows]),
                                 np.log([r[1] for r in rows]), 1)[0])
        if args.op == "scan":
            print(f"scan log-log slope: {slope:.3f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["size", "median_seconds"])
            for size, med in rows:
                wr.writerow([size, f"{med:.9f}"])
        if not args.no_plot:
            from . import plots
            plots.bench_figure([r[0] for r in rows], [r[1] for r in rows],
                               Path(args.out).with_suffix(".png"), slope=slope)
    return EXIT_OK


def cmd_inspect(args):
    archive = weights.load_weights(args.weights)
    total = 0
    for name, tensor in archive.entries.items():
        print(f"{name}  {'x'.join(map(str, tensor.shape))}  {tensor.size}")
        total += tensor.size
    print(f"{len(archive.entries)} tensor(s), {total} parameter(s), CRC OK")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="isfm", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fuse", help="fuse an infrared/visible image pair")
    f.add_argument("ir")
    f.add_argument("vi")
    f.add_argument("out")
    src = f.add_mutually_exclusive_group()
    src.add_argument("--weights", help="ISFW weight archive")
    src.add_argument("--seed", type=int, help="fresh deterministic init (default 42)")
    f.add_argument("--no-mff", action="store_true", help="disable the frequency-fusion path")
    f.add_argument("--no-fgg", action="store_true", help="disable frequency-driven gating")
    f.add_argument("--no-fgm", action="store_true", help="disable gated scan fusion (sum instead)")
    f.add_argument("--gray", action="store_true", help="write the fused luma only")
    f.add_argument("--channels", type=int, default=128)
    f.add_argument("--num-vssm", type=int, default=2)
    f.add_argument("--threads", type=int, default=None,
                   help="accepted for interface symmetry; fusion is single-image")
    f.set_defaults(func=cmd_fuse)

    e = sub.add_parser("eval", help="metric report for fused images, or rank a method table")
    e.add_argument("pairs_dir", nargs="?", help="directory of <stem>_ir.* / <stem>_vi.*")
    e.add_argument("fused_dir", nargs="?", help="directory of fused <stem>.*")
    e.add_argument("--out", required=True, help="report path (CSV or JSON)")
    e.add_argument("--format", choices=("csv", "json"), default="csv")
    e.add_argument("--rank", help="methods x metrics CSV; append an avg_rank column")
    e.add_argument("--threads", type=int, default=None,
                   help="parallel image evaluation (ISFM_THREADS fallback)")
    e.add_argument("--no-plot", action="store_true", help="skip the figure next to the report")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="runtime scaling of the scan, the wavelet, or the forward")
    b.add_argument("--op", choices=("scan", "dwt", "forward"), required=True)
    b.add_argument("--sizes", type=lambda s: [int(v) for v in s.split(",")], required=True)
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--out", help="CSV output path")
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--channels", type=int, default=16, help="forward bench width")
    b.add_argument("--num-vssm", type=int, default=1, help="forward bench depth")
    b.add_argument("--no-plot", action="store_true")
    b.set_defaults(func=cmd_bench)

    i = sub.add_parser("inspect", help="list an ISFW archive and verify its CRC")
    i.add_argument("weights")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ShapeError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (weights.ArchiveError, imgio.ImageFormatError) as exc:
        print(f"error [{getattr(exc, 'code', 'format')}]: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
