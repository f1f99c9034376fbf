"""Command-line front end (``fracsr``)."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import sr as fsr
from .ctc import parse_ctc
from .geometry import downscale, translation_of, upscale_nni
from .metrics import MetricError, bd_rate, d1_psnr, load_rd_csv
from .pipeline import (
    ConfigError,
    build_config,
    parse_scales,
    parse_sprime,
    parse_triple,
    read_key_values,
    run_pipeline,
)
from .plot import emit_plot
from .ply import load_ply, save_ply
from .synthetic import SHAPES

log = logging.getLogger("fracsr")


def _single_scale(args):
    if (args.scale is None) == (args.ctc is None):
        raise ConfigError("give exactly one of --scale NUM/DEN or --ctc PREC:RID")
    if args.scale is not None:
        scales = parse_scales(args.scale)
    else:
        scales = [c.scale for c in parse_ctc(args.ctc)]
    if len(scales) != 1:
        raise ConfigError("this command takes a single scale factor")
    return scales[0]


def _translation(args, default=(0, 0, 0)):
    return parse_triple(args.translation) if args.translation else default


def _write(cloud, args):
    save_ply(cloud, args.output, format="ascii" if args.ascii else "binary")
    log.info("wrote %s (%d points)", args.output, len(cloud))


def cmd_downscale(args):
    v = load_ply(args.input)
    t = _translation(args, translation_of(v))
    _write(downscale(v, _single_scale(args), t), args)
    print(f"translation {t[0]},{t[1]},{t[2]}")


def cmd_upscale_nni(args):
    _write(upscale_nni(load_ply(args.input), _single_scale(args), _translation(args)), args)


def cmd_sr(args):
    v_d = load_ply(args.input)
    s = _single_scale(args)
    if args.lut_dump:
        factor = fsr.factorize_scale(s)[0]
        Path(args.lut_dump).write_text(fsr.build_lut(v_d, factor).to_csv())
    _write(fsr.super_resolve(v_d, s, _translation(args)), args)


def cmd_dus_sr(args):
    v = load_ply(args.input)
    sp = parse_sprime(args.sprime)
    if sp == "none":
        sp = 1
    elif sp == "auto":
        sp = fsr.choose_s_prime(v)
        print(f"s_prime {sp}")
    decoded = load_ply(args.decoded) if args.decoded else None
    _write(fsr.dus_super_resolve(v, _single_scale(args), sp, decoded=decoded), args)


def cmd_psnr(args):
    a, b = load_ply(args.reference), load_ply(args.distorted)
    print(f"{d1_psnr(a, b, args.peak if args.peak else a.peak):.4f}")


def cmd_bdrate(args):
    with open(args.csv) as fh:
        curves = {c.label: c for c in load_rd_csv(fh)}
    if args.anchor is None or args.test is None:
        if len(curves) != 2:
            raise MetricError(f"CSV holds {len(curves)} curves; name them with --anchor and --test")
        anchor, test = curves.values()
    else:
        missing = {args.anchor, args.test} - set(curves)
        if missing:
            raise MetricError(f"unknown curve label(s): {', '.join(sorted(missing))}")
        anchor, test = curves[args.anchor], curves[args.test]
    print(f"{bd_rate(anchor, test):.4f} %")


def cmd_plot(args):
    with open(args.csv) as fh:
        curves = load_rd_csv(fh)
    emit_plot(curves, args.output, title=args.title or "")


def cmd_synth(args):
    _write(SHAPES[args.shape](args.depth), args)


def cmd_pipeline(args):
    values = read_key_values(Path(args.config).read_text()) if args.config else {}
    overrides = {
        "scale": args.scale, "ctc": args.ctc, "sprime": args.sprime, "peak": args.peak,
        "mode": args.mode, "out": args.out, "rates": args.rates, "jobs": args.jobs,
        "decoded": args.decoded, "translation": args.translation,
    }
    if args.inputs:
        values["inputs"] = ",".join(args.inputs)
    for key, value in overrides.items():
        if value is not None:
            values[key] = str(value)
    # a command-line scale source replaces the file's one
    if args.scale is not None:
        values.pop("ctc", None)
    if args.ctc is not None:
        values.pop("scale", None)
    rows = run_pipeline(build_config(values))
    for r in rows:
        psnr = float(r["d1_psnr_db"])
        print(f"{r['cloud']:<24} {r['rate_id']:<8} {r['condition']:<12} "
              f"{'inf' if math.isinf(psnr) else f'{psnr:.3f}':>9} dB  {r['points_out']:>9} pts")


def _scale_flags(p):
    p.add_argument("--scale", help="scale factor s > 1, e.g. 4/3")
    p.add_argument("--ctc", help="CTC rate point PREC:RID, e.g. 10:R4")


def _io_flags(p):
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--ascii", action="store_true", help="write ascii PLY")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracsr", description="Fractional super-resolution of voxelized point clouds.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("downscale", help="lossy-geometry downscale (prints the translation used)")
    _io_flags(p); _scale_flags(p)
    p.add_argument("--translation", help="x,y,z (default: cloud minimum)")
    p.set_defaults(func=cmd_downscale)

    p = sub.add_parser("upscale-nni", help="nearest-neighbour upscale")
    _io_flags(p); _scale_flags(p)
    p.add_argument("--translation", help="x,y,z added after scaling")
    p.set_defaults(func=cmd_upscale_nni)

    p = sub.add_parser("sr", help="fractional super-resolution of a downscaled cloud")
    _io_flags(p); _scale_flags(p)
    p.add_argument("--translation", help="x,y,z added after scaling")
    p.add_argument("--lut-dump", help="write the first stage's LUT as CSV")
    p.set_defaults(func=cmd_sr)

    p = sub.add_parser("dus-sr", help="down-up-scaling SR for sparse clouds")
    _io_flags(p); _scale_flags(p)
    p.add_argument("--sprime", default="auto", help="auto, none or a power of two")
    p.add_argument("--decoded", help="externally decoded cloud (skips the simulated codec)")
    p.set_defaults(func=cmd_dus_sr)

    p = sub.add_parser("psnr", help="D1 PSNR between two clouds")
    p.add_argument("reference")
    p.add_argument("distorted")
    p.add_argument("--peak", type=int, help="default: 2**depth - 1 of the reference")
    p.set_defaults(func=cmd_psnr)

    p = sub.add_parser("bdrate", help="BD-rate between two curves of an RD CSV")
    p.add_argument("csv")
    p.add_argument("--anchor")
    p.add_argument("--test")
    p.set_defaults(func=cmd_bdrate)

    p = sub.add_parser("plot", help="SVG RD plot from an RD or report CSV")
    p.add_argument("csv")
    p.add_argument("output")
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("synth", help="write a synthetic solid cloud")
    p.add_argument("shape", choices=sorted(SHAPES))
    p.add_argument("output")
    p.add_argument("--depth", type=int, default=7)
    p.add_argument("--ascii", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pipeline", help="batch experiment over clouds and rate points")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--config", help="key = value file; flags override it")
    _scale_flags(p)
    p.add_argument("--sprime", help="auto, none or a power of two")
    p.add_argument("--peak", type=int)
    p.add_argument("--mode", choices=["simulate", "external"])
    p.add_argument("--out", help="output directory")
    p.add_argument("--rates", help="rate log CSV: cloud,rate_id,rate_bpp")
    p.add_argument("--jobs", type=int)
    p.add_argument("--decoded", help="decoded cloud path template, e.g. dec/{cloud}_{rate}.ply")
    p.add_argument("--translation", help="decoder translation x,y,z (default: input minimum)")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        print(f"fracsr: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
