"""Command-line harness for the contour codec.

Exit codes: 0 success, 1 usage error, 2 malformed data, 3 infeasible
problem. The JDCC_THREADS environment variable caps how many contours
are denoised concurrently.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import coder, context, contour, mask, noise, optimize, shapes
from .exceptions import DataFormatError, InfeasibleError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _threads() -> int:
    raw = os.environ.get("JDCC_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return max(1, n) if n else max(1, min(4, os.cpu_count() or 1))


def _map_contours(fn, items):
    items = list(items)
    workers = _threads()
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _load_contours(path: Path) -> list[contour.DccString]:
    data = path.read_bytes()
    if data[:2] in (b"P2", b"P5"):
        return mask.trace_contours(mask.read_pgm(data))
    return contour.read_contours(data.decode("utf-8"))


def _load_tree(path: Path) -> context.ContextTree:
    return context.deserialize_tree(Path(path).read_bytes())


def _build_config(args, tree) -> optimize.ObjectiveConfig:
    settings: dict[str, float] = {}
    if getattr(args, "config", None):
        settings = optimize.parse_config_text(Path(args.config).read_text())
    if getattr(args, "params", None):
        params = noise.TransitionParams.from_text(Path(args.params).read_text())
    elif {"p", "q1", "q2"} <= settings.keys():
        params = noise.TransitionParams(settings["p"], settings["q1"], settings["q2"])
    else:
        raise _UsageError("transition parameters required (--params or config file)")
    lam = args.lam if args.lam is not None else settings.get("lambda", 0.0)
    beta = args.beta if args.beta is not None else settings.get("beta", 3.0)
    span = args.ds if args.ds is not None else int(settings.get("ds", 4))
    return optimize.ObjectiveConfig.create(
        tree, params, rate_weight=lam, prior_weight=beta, prior_span=span
    )


def _cmd_gen_shapes(args) -> int:
    frames = shapes.shape_frames(args.kind, size=args.size, frames=args.frames, seed=args.seed)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(frames):
        (outdir / f"frame_{t:03d}.pgm").write_bytes(mask.write_pgm(frame))
    print(f"wrote {len(frames)} {args.kind} frames of size {args.size} to {outdir}")
    return 0


def _cmd_train(args) -> int:
    contours = []
    for p in args.masks:
        contours.extend(_load_contours(Path(p)))
    if not contours:
        raise DataFormatError("no contours found in the training masks")
    tree = context.build_tree(contours)
    Path(args.out).write_bytes(context.serialize_tree(tree))
    print(
        f"trained on {len(contours)} contours, {tree.training_symbols} symbols; "
        f"depth {tree.depth}, {len(tree.counts)} nodes -> {args.out}"
    )
    return 0


def _cmd_corrupt(args) -> int:
    m = mask.read_pgm(Path(args.mask).read_bytes())
    noisy = noise.corrupt_mask(m, args.delta, seed=args.seed)
    Path(args.out).write_bytes(mask.write_pgm(noisy))
    changed = int((noisy.pixels != m.pixels).sum())
    print(f"corrupted {args.mask} at delta={args.delta}: {changed} pixels changed -> {args.out}")
    return 0


def _cmd_encode(args) -> int:
    contours = _load_contours(Path(args.input))
    tree = _load_tree(args.tree)
    bits = coder.encode(contours, tree)
    blob = bits.to_bytes()
    Path(args.out).write_bytes(blob)
    n = bits.total_symbols
    per = coder.measure_rate(bits) if n else 0.0
    print(
        f"encoded {len(contours)} contours, {n} symbols: "
        f"{bits.payload_bits} payload bits ({per:.4f} bits/symbol), "
        f"{8 * len(blob)} total bits -> {args.out}"
    )
    return 0


def _cmd_decode(args) -> int:
    bits = coder.Bitstream.from_bytes(Path(args.input).read_bytes())
    tree = _load_tree(args.tree)
    contours = coder.decode(bits, tree)
    Path(args.out).write_text(contour.write_contours(contours))
    print(f"decoded {len(contours)} contours -> {args.out}")
    return 0


def _cmd_denoise(args) -> int:
    noisy = _load_contours(Path(args.input))
    tree = _load_tree(args.tree)
    cfg = _build_config(args, tree)
    sols = _map_contours(lambda y: optimize.joint_denoise(y, cfg), noisy)
    Path(args.out).write_text(contour.write_contours([s.contour for s in sols]))
    for idx, s in enumerate(sols):
        print(
            f"contour {idx}: cost {s.cost:.4f} "
            f"(error {s.error_cost:.4f}, prior {s.prior_cost:.4f}, rate {s.rate_bits:.2f} bits)"
        )
    print(f"denoised {len(sols)} contours -> {args.out}")
    return 0


def _cmd_estimate(args) -> int:
    ys = _load_contours(Path(args.noisy))
    if args.clean:
        xs = _load_contours(Path(args.clean))
        if len(xs) != len(ys):
            raise DataFormatError(
                f"{len(xs)} clean but {len(ys)} noisy contours; cannot pair them"
            )
        params = noise.estimate_from_pairs(zip(xs, ys))
    else:
        tree = _load_tree(args.tree) if args.tree else None
        if tree is None:
            raise _UsageError("--tree is required when no clean contours are given")
        init = (
            noise.TransitionParams.from_text(Path(args.init).read_text())
            if args.init
            else noise.TransitionParams(0.5, 0.5, 0.5)
        )
        base = optimize.ObjectiveConfig.create(
            tree,
            init,
            prior_weight=args.beta if args.beta is not None else 3.0,
            prior_span=args.ds if args.ds is not None else 4,
        )

        def denoiser(y, params):
            cfg = replace(base, costs=noise.BurstCosts.from_params(params))
            return optimize.joint_denoise(y, cfg).contour

        params = noise.estimate_alternating(
            ys, init, tol=args.tol, max_iter=args.max_iter, denoiser=denoiser
        )
    Path(args.out).write_text(params.to_text())
    print(f"estimated {params.to_text().strip()} -> {args.out}")
    return 0


def _cmd_aic(args) -> int:
    xs = _load_contours(Path(args.clean))
    ys = _load_contours(Path(args.noisy))
    if len(xs) != len(ys):
        raise DataFormatError(f"{len(xs)} clean but {len(ys)} noisy contours; cannot pair them")
    align_params = (
        noise.TransitionParams.from_text(Path(args.params).read_text())
        if args.params
        else noise.TransitionParams(0.1, 0.5, 0.5)
    )
    anns = [noise.align_strings(x, y, align_params) for x, y in zip(xs, ys)]
    params = noise.estimate_from_annotations(anns)
    total_symbols = sum(len(x.rel) for x in xs)
    iid = (
        noise.IidParams.from_text(Path(args.iid_params).read_text())
        if args.iid_params
        else noise.estimate_iid_from_annotations(anns, total_symbols)
    )
    n = len(xs)
    nll_burst = sum(noise.neg_log_likelihood_exact(a, params) for a in anns) / n
    nll_iid = sum(
        noise.iid_neg_log_likelihood(x, y, a, iid) for x, y, a in zip(xs, ys, anns)
    ) / n
    aic_burst = noise.aic(3, nll_burst)
    aic_iid = noise.aic(2, nll_iid)
    rel = noise.relative_likelihood(aic_burst, aic_iid)
    lines = [
        f"contours={n}",
        f"nll_burst_per_contour={nll_burst:.6f} aic_burst={aic_burst:.6f} k=3",
        f"nll_iid_per_contour={nll_iid:.6f} aic_iid={aic_iid:.6f} k=2",
        f"relative_likelihood_iid_vs_burst={rel:.6e}",
    ]
    report = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(report)
    print(report, end="")
    return 0


def _pair_by_size(clean, noisy):
    """Pair contours of two frames by descending length."""
    a = sorted(clean, key=len, reverse=True)
    b = sorted(noisy, key=len, reverse=True)
    return list(zip(a, b))


def _cmd_rd_sweep(args) -> int:
    train_masks = [mask.read_pgm(Path(p).read_bytes()) for p in args.train]
    target = mask.read_pgm(Path(args.target).read_bytes())
    training = []
    for m in train_masks:
        training.extend(mask.trace_contours(m))
    if not training:
        raise DataFormatError("no contours found in the training masks")
    tree = context.build_tree(training)

    clean = mask.trace_contours(target)
    noisy_mask = noise.corrupt_mask(target, args.delta, seed=args.seed)
    noisy = mask.trace_contours(noisy_mask)
    pairs = _pair_by_size(clean, noisy)
    if not pairs:
        raise DataFormatError("no contours to sweep")

    usable = [(x, y) for x, y in pairs if len(y.rel) >= len(x.rel)]
    params = (
        noise.estimate_from_pairs(usable) if usable else noise.TransitionParams(0.1, 0.5, 0.5)
    )
    bounds = contour.GridBounds.for_frame(target.width, target.height)
    beta = args.beta if args.beta is not None else 3.0
    base = optimize.ObjectiveConfig.create(
        tree, params, prior_weight=beta,
        prior_span=args.ds if args.ds is not None else 4, bounds=bounds,
    )

    def rd_rows(scheme):
        rows = []
        if scheme == "joint":
            sweep = [(lam, beta) for lam in args.lambdas]
        else:
            sweep = [(0.0, b) for b in args.betas]
        for lam, b in sweep:
            t0 = time.perf_counter()
            cfg = replace(base, rate_weight=lam, prior_weight=b)
            sols = _map_contours(
                lambda xy: optimize.joint_denoise(xy[1], cfg), [(x, y) for x, y in pairs]
            )
            bits = coder.encode([s.contour for s in sols], tree)
            dist = sum(
                contour.distortion(s.contour, x) for s, (x, _) in zip(sols, pairs)
            )
            ms = int((time.perf_counter() - t0) * 1000)
            rows.append(
                {
                    "lambda": lam,
                    "beta": b,
                    "rate_bits_per_symbol": coder.measure_rate(bits),
                    "distortion": dist,
                    "contours": len(sols),
                    "millis": ms,
                }
            )
        return rows

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for scheme in ("joint", "separate"):
        rows = rd_rows(scheme)
        path = outdir / f"{scheme}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(
                fh,
                fieldnames=[
                    "lambda", "beta", "rate_bits_per_symbol", "distortion", "contours", "millis",
                ],
            )
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {len(rows)} {scheme} points -> {path}")
    return 0


def _build_parser() -> _Parser:
    p = _Parser(prog="jdcc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen-shapes", help="write synthetic shape frames as PGM files")
    sp.add_argument("--kind", choices=shapes.KINDS, default="rect")
    sp.add_argument("--size", type=int, default=64)
    sp.add_argument("--frames", type=int, default=3)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_gen_shapes)

    sp = sub.add_parser("train", help="build a context tree from mask files")
    sp.add_argument("masks", nargs="+")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_train)

    sp = sub.add_parser("corrupt", help="inject boundary noise into a mask")
    sp.add_argument("mask")
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_corrupt)

    sp = sub.add_parser("encode", help="compress contours (text stanzas or a PGM mask)")
    sp.add_argument("input")
    sp.add_argument("--tree", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_encode)

    sp = sub.add_parser("decode", help="decompress a bitstream back to contour text")
    sp.add_argument("input")
    sp.add_argument("--tree", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_decode)

    sp = sub.add_parser("denoise", help="rate-constrained MAP denoising of contours")
    sp.add_argument("input")
    sp.add_argument("--tree", required=True)
    sp.add_argument("--params")
    sp.add_argument("--config")
    sp.add_argument("--lambda", dest="lam", type=float, default=None)
    sp.add_argument("--beta", type=float, default=None)
    sp.add_argument("--ds", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_denoise)

    sp = sub.add_parser("estimate", help="estimate channel parameters")
    sp.add_argument("--noisy", required=True)
    sp.add_argument("--clean")
    sp.add_argument("--tree")
    sp.add_argument("--init")
    sp.add_argument("--beta", type=float, default=None)
    sp.add_argument("--ds", type=int, default=None)
    sp.add_argument("--tol", type=float, default=1e-3)
    sp.add_argument("--max-iter", type=int, default=20)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_estimate)

    sp = sub.add_parser("aic", help="compare burst model against the iid baseline")
    sp.add_argument("--clean", required=True)
    sp.add_argument("--noisy", required=True)
    sp.add_argument("--params")
    sp.add_argument("--iid-params")
    sp.add_argument("--out")
    sp.set_defaults(fn=_cmd_aic)

    sp = sub.add_parser("rd-sweep", help="rate-distortion sweep, joint vs separate")
    sp.add_argument("--train", nargs="+", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--lambdas", type=lambda s: [float(v) for v in s.split(",")],
                    default=[0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0])
    sp.add_argument("--betas", type=lambda s: [float(v) for v in s.split(",")],
                    default=[3.0, 6.0, 12.0, 24.0, 48.0])
    sp.add_argument("--beta", type=float, default=None)
    sp.add_argument("--ds", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_rd_sweep)

    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
