"""Command-line entry point: ``ldwpool <command> [options]``.

Exit codes: 0 success, 1 failed check, 2 usage or I/O error. Diagnostics
go to stderr.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .attention import AttentionParams, energy_attention
from .filters import constraint_residuals, loss_terms
from .tensor import FeatureMap, format_psnr, psnr
from .training import TrainConfig, train_filters
from .transform import (
    SUBBAND_NAMES,
    MacCounter,
    PaddingMode,
    SubbandSet,
    decompose,
    decompose_dense2d,
    flop_report,
    reconstruct,
)

CHECK_TOLERANCE = 1e-6


class UsageError(Exception):
    """Bad input files or arguments; reported with exit code 2."""


def _err(msg: str) -> None:
    print(f"ldwpool: {msg}", file=sys.stderr)


def _load_filters(path):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"filter file not found: {p}")
    try:
        return io.read_filters(p)
    except io.FormatError as exc:
        raise UsageError(f"{p}: {exc}") from None


def _load_map(path) -> FeatureMap:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"input file not found: {p}")
    try:
        return io.read_map(p)
    except (io.FormatError, ValueError) as exc:
        raise UsageError(f"{p}: {exc}") from None


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected 'on' or 'off', got {value!r}")
    return value == "on"


def _weights(value: str) -> tuple[float, ...]:
    try:
        w = tuple(float(x) for x in value.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"weights must be 4 comma-separated numbers, got {value!r}")
    if len(w) != 4 or any(x < 0 for x in w):
        raise argparse.ArgumentTypeError(f"weights must be 4 non-negative numbers, got {value!r}")
    return w


def _size(value: str) -> tuple[int, int]:
    try:
        h, w = (int(x) for x in value.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like HxW, got {value!r}")
    return h, w


# ---------------------------------------------------------------- commands


def cmd_decompose(args) -> int:
    pair = _load_filters(args.filters)
    fmap = _load_map(args.input)
    if fmap.height % 2 or fmap.width % 2:
        raise UsageError(f"{args.input}: odd dimensions {fmap.height}x{fmap.width} cannot be decomposed")
    sub = decompose(fmap, pair, args.padding)
    io.write_container(args.output, sub.named(), args.dtype)
    return 0


def cmd_reconstruct(args) -> int:
    pair = _load_filters(args.filters)
    p = Path(args.input)
    if not p.is_file():
        raise UsageError(f"input file not found: {p}")
    try:
        tensors = io.read_container(p)
    except io.FormatError as exc:
        raise UsageError(f"{p}: {exc}") from None
    missing = [n for n in SUBBAND_NAMES if n not in tensors]
    if missing:
        raise UsageError(f"{p}: missing subband(s) {', '.join(missing)}")
    try:
        sub = SubbandSet.from_arrays(*(tensors[n].data for n in SUBBAND_NAMES))
    except ValueError as exc:
        raise UsageError(f"{p}: {exc}") from None
    out = reconstruct(sub, pair, args.padding)

    if args.as_pgm:
        if out.channels != 1:
            raise UsageError(f"--as-pgm needs a single-channel result, got {out.channels} channels")
        io.write_pgm(args.output, out)
        written = io.read_map(args.output)
    else:
        io.write_container(args.output, {"X": out}, args.dtype)
        written = out

    if args.reference:
        ref = _load_map(args.reference)
        if ref.shape != written.shape:
            raise UsageError(f"reference shape {ref.shape} differs from output {written.shape}")
        _err(f"psnr: {format_psnr(psnr(ref, written, args.peak))}")
    return 0


def cmd_check(args) -> int:
    pair = _load_filters(args.filters)
    res = constraint_residuals(pair)
    terms = loss_terms(pair)
    for name, value in zip(res._fields, res):
        print(f"residual_{name}\t{value:.12g}")
    for name, value in zip(("L_Low", "L_High", "L_Reverse", "L_Sym"), terms):
        print(f"{name}\t{value:.12g}")
    ok = res.max_abs() < CHECK_TOLERANCE
    print(f"status\t{'ok' if ok else 'violated'}")
    return 0 if ok else 1


def cmd_train(args) -> int:
    paths = []
    try:
        paths = io.list_images(args.images)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    if not paths:
        raise UsageError(f"no .pgm or .ldwt images in {args.images}")
    images = [_load_map(p) for p in paths]
    for p, img in zip(paths, images):
        if img.height % 2 or img.width % 2:
            raise UsageError(f"{p}: odd dimensions {img.height}x{img.width}")
    config = TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        weight_decay=args.weight_decay,
        wavelet_weights=args.wavelet_weights,
        seed=args.seed,
        pretrain=args.pretrain,
        padding=args.padding,
        lr_step_epochs=args.lr_step,
    )
    _err(f"training K={args.taps} on {len(images)} image(s) for {args.epochs} epoch(s)")
    report = train_filters(images, args.taps, config)
    io.write_filters(args.out, report.final_pair)
    if args.log:
        Path(args.log).write_text(io.format_log(report))
    f = report.final
    _err(f"final task={f.task_loss:.6g} wavelet={f.wavelet_loss:.6g} total={f.total_loss:.6g}")
    return 0


def cmd_bench(args) -> int:
    from .filters import random_constrained

    h, w = args.size
    if h % 2 or w % 2:
        raise UsageError(f"size must have even dimensions, got {h}x{w}")
    rng = np.random.default_rng(args.seed)
    fmap = FeatureMap(rng.standard_normal((args.channels, h, w)))
    pair = random_constrained(args.taps, args.seed)
    report = flop_report(args.taps, args.channels, h, w)

    sep_count, dense_count = MacCounter(), MacCounter()
    a = decompose(fmap, pair, args.padding, counter=sep_count).stacked()
    b = decompose_dense2d(fmap, pair, args.padding, counter=dense_count).stacked()
    diff = float(np.max(np.abs(a - b)))
    if diff > 1e-10:
        _err(f"separable and dense outputs disagree by {diff:.3g}")
        return 1

    def median_time(fn):
        times = []
        for _ in range(args.iters):
            t0 = time.perf_counter()
            fn(fmap, pair, args.padding)
            times.append(time.perf_counter() - t0)
        return float(np.median(times))

    t_sep = median_time(decompose)
    t_dense = median_time(decompose_dense2d)
    print(f"taps\t{args.taps}")
    print(f"shape\t{args.channels}x{h}x{w}")
    print(f"separable_macs\t{report.separable_macs}")
    print(f"dense_macs\t{report.dense_macs}")
    print(f"mac_ratio\t{report.ratio:g}")
    print(f"counted_separable_macs\t{sep_count.count}")
    print(f"counted_dense_macs\t{dense_count.count}")
    print(f"max_abs_diff\t{diff:.3g}")
    print(f"separable_median_s\t{t_sep:.6f}")
    print(f"dense_median_s\t{t_dense:.6f}")
    print(f"speedup\t{t_dense / t_sep:.3f}")
    return 0


def cmd_attention(args) -> int:
    fmap = _load_map(args.input)
    p = Path(args.params)
    if not p.is_file():
        raise UsageError(f"parameter file not found: {p}")
    try:
        params = io.read_attention(p)
    except (io.FormatError, ValueError) as exc:
        raise UsageError(f"{p}: {exc}") from None
    if params.channels != fmap.channels:
        raise UsageError(f"parameters expect {params.channels} channels, input has {fmap.channels}")
    gated, energies, gates = energy_attention(fmap, params, args.normalize, args.epsilon)
    io.write_container(args.output, {"X": gated}, args.dtype)
    listing = "".join(f"{c}\t{e:.10g}\t{g:.10g}\n" for c, (e, g) in enumerate(zip(energies, gates)))
    if args.listing:
        Path(args.listing).write_text(listing)
    else:
        sys.stdout.write(listing)
    return 0


def cmd_attention_init(args) -> int:
    try:
        if args.zeros:
            params = AttentionParams.zeros(args.channels, args.reduction)
        else:
            params = AttentionParams.random(args.channels, args.reduction, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    io.write_attention(args.output, params)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldwpool", description="Learnable discrete wavelet pooling tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    def padding(p):
        p.add_argument("--padding", choices=[m.value for m in PaddingMode], default="circular")

    def dtype(p):
        p.add_argument("--dtype", choices=["float32", "float64"], default="float64",
                       help="storage precision of written containers")

    p = sub.add_parser("decompose", help="split a map into LL, LH, HL, HH subbands")
    p.add_argument("--input", required=True, help="PGM (P2/P5) or single-tensor LDWT file")
    p.add_argument("--filters", required=True)
    p.add_argument("--output", required=True)
    padding(p)
    dtype(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("reconstruct", help="rebuild a map from its four subbands")
    p.add_argument("--input", required=True, help="LDWT file holding LL, LH, HL, HH")
    p.add_argument("--filters", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--as-pgm", action="store_true", help="write an 8-bit PGM, clamped to [0, 1]")
    p.add_argument("--reference", help="report PSNR of the written output against this map")
    p.add_argument("--peak", type=float, default=1.0)
    padding(p)
    dtype(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("check", help="report constraint residuals and loss terms")
    p.add_argument("--filters", required=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("train", help="learn filter taps on a directory of images")
    p.add_argument("--images", required=True, help="directory of .pgm / .ldwt files")
    p.add_argument("--taps", type=int, default=4)
    p.add_argument("--epochs", type=int, default=400)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--lr-step", type=int, default=None,
                   help="decay the learning rate by 10x every N epochs")
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--pretrain", type=_on_off, default=True, metavar="on|off")
    p.add_argument("--wavelet-weights", type=_weights, default=(1.0, 1.0, 1.0, 1.0), metavar="a,b,c,d",
                   help="weights of L_Low, L_High, L_Reverse, L_Sym")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="filter file to write")
    p.add_argument("--log", help="per-epoch loss log to write")
    padding(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="separable vs dense decomposition: MAC counts and timings")
    p.add_argument("--taps", type=int, default=4)
    p.add_argument("--size", type=_size, default=(256, 256), metavar="HxW")
    p.add_argument("--channels", type=int, default=3)
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    padding(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("attention", help="gate channels by their energy")
    p.add_argument("--input", required=True)
    p.add_argument("--params", required=True, help="LDWT file with w1, b1, w2, b2")
    p.add_argument("--output", required=True)
    p.add_argument("--normalize", type=_on_off, default=True, metavar="on|off")
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--listing", help="write 'channel energy gate' lines here instead of stdout")
    dtype(p)
    p.set_defaults(func=cmd_attention)

    p = sub.add_parser("attention-init", help="write random or zero attention parameters")
    p.add_argument("--channels", type=int, required=True)
    p.add_argument("--reduction", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zeros", action="store_true")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_attention_init)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        _err(str(exc))
        return 2
    except OSError as exc:
        _err(f"I/O error: {exc}")
        return 2
    except ValueError as exc:
        _err(str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
