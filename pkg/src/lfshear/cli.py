"""Command-line front end (``lfshear <subcommand> ...``)."""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

from . import dataset_io as dio
from .harness import (
    diff_map,
    leave_n_out,
    make_synthetic_epi,
    parse_line_spec,
    random_lines,
    write_report_csv,
)
from .lightfield import (
    CameraGeometry,
    camera_step_bound,
    reconstruct_full_parallax,
    reconstruct_hpo,
    refocus,
)
from .reconstruct import IterationParams, log_observer, parse_alpha
from .shearlet import frame_bounds

log = logging.getLogger("lfshear")


def _params(args):
    if (args.lambda_max is None) != (args.lambda_min is None):
        raise ValueError("--lambda-max and --lambda-min must be given together")
    return IterationParams(
        n_iter=args.iters,
        lambda_max=args.lambda_max,
        lambda_min=args.lambda_min,
        alpha=parse_alpha(args.alpha),
        init=args.init,
    )


def _observer_factory(verbose):
    if not verbose:
        return None
    emit = log_observer(log)

    def factory(where):
        return emit

    return factory


def cmd_build_system(args):
    t0 = time.perf_counter()
    if args.cache:
        system = dio.get_or_build_system(args.cache, args.rows, args.cols, args.scales)
    else:
        from .shearlet import build_system
        system = build_system(args.rows, args.cols, args.scales)
    a, b = frame_bounds(system)
    print(f"grid={args.rows}x{args.cols} scales={args.scales} elements={system.eta} "
          f"A={a:.6g} B={b:.6g} seconds={time.perf_counter() - t0:.3f}")
    if args.cache:
        print(f"cache={args.cache}")
    return 0


def _channel_dmax(manifest, n_channels, dmax, dmax_chroma):
    if dmax is None:
        return manifest.channel_d_max(n_channels)
    if dmax_chroma is None or n_channels == 1:
        return [dmax] * n_channels
    return [dmax] + [dmax_chroma] * (n_channels - 1)


def cmd_reconstruct(args):
    manifest = dio.load_manifest(args.manifest)
    params = _params(args)
    obs = _observer_factory(args.verbose)
    out = Path(args.out)
    sign = manifest.disparity_sign
    if manifest.yuv:
        planes = dio.load_yuv_planes(manifest)
        d_luma = args.dmax or manifest.d_max[0]
        d_chroma = args.dmax_chroma or (manifest.d_max[1] if len(manifest.d_max) > 1 else d_luma)
        total = 0
        for key, lf in planes.items():
            d = d_luma if key == "Y" else d_chroma
            # chroma keeps the luma view step so the planes stay aligned
            step = d_luma
            dense = _run_driver(lf, [d], step, params, args, sign, obs)
            total += dio.save_views(dense, out, "view_{s:02d}_{t:03d}_" + key + ".png")
        print(f"wrote {total} plane images to {out}")
        return 0
    lf = dio.load_views(manifest)
    d = _channel_dmax(manifest, lf.n_channels, args.dmax, args.dmax_chroma)
    dense = _run_driver(lf, d, max(d), params, args, sign, obs)
    n = dio.save_views(dense, out, "view_{s:02d}_{t:03d}.png")
    print(f"wrote {n} views ({dense.grid[0]}x{dense.grid[1]}) to {out}")
    return 0


def _run_driver(lf, d, step, params, args, sign, obs):
    if args.fullparallax:
        return reconstruct_full_parallax(lf, d, d, params, step=step, sign=sign,
                                         workers=args.workers, observer=obs)
    if lf.grid[0] != 1:
        raise ValueError("manifest describes a 2D grid; pass --fullparallax")
    return reconstruct_hpo(lf, d, params, step=step, sign=sign, workers=args.workers, observer=obs)


def cmd_evaluate(args):
    manifest = dio.load_manifest(args.manifest)
    lf = dio.load_views(manifest)
    n = args.leave_n
    per_view = [math.ceil(d / n) for d in manifest.channel_d_max(lf.n_channels)]
    params = _params(args)
    report = leave_n_out(lf, n, params, per_view, psnr_mode=args.psnr_mode,
                         sign=manifest.disparity_sign, workers=args.workers,
                         observer=_observer_factory(args.verbose),
                         keep_outputs=bool(args.diff_maps))
    for idx, p in report.per_view:
        print(f"view {idx}: {p:.3f} dB")
    print(f"mean: {report.mean_psnr:.3f} dB ({report.wall_time:.1f} s)")
    if args.report:
        path = write_report_csv(report, args.report)
        from .plotting import plot_psnr_per_view
        if report.per_view:
            plot_psnr_per_view(report, path.with_suffix(".png"))
    if args.diff_maps:
        out = Path(args.diff_maps)
        n_t = lf.grid[1]
        for idx, _ in report.per_view:
            s, t = divmod(idx, n_t)
            dm = diff_map(report.outputs[s, t], lf.views[s, t], args.gain, lf.bit_depth)
            dio.write_image(out / f"diff_{idx:03d}.png", dm)
    return 0


def cmd_refocus(args):
    manifest = dio.load_manifest(args.manifest)
    lf = dio.load_views(manifest)
    img = refocus(lf, args.slope)
    out = Path(args.out)
    if out.suffix.lower() == ".pfm":
        dio.write_pfm(out, img)
    else:
        dio.write_image(out, dio.to_integer_views(img, lf.bit_depth))
    print(f"wrote {out}")
    return 0


def cmd_plan_sampling(args):
    geom = CameraGeometry(focal=args.focal, z_min=args.zmin, delta_v=args.pixel_pitch)
    print(f"max camera step: {camera_step_bound(geom):.6g}")
    return 0


def cmd_synth_epi(args):
    spec = parse_line_spec(args.lines)
    if isinstance(spec, tuple):
        _, count, seed = spec
        spec = random_lines(count, args.width, args.dmax, seed)
    epi, desc = make_synthetic_epi(args.width, args.height, spec, args.dmax,
                                   texture_seed=args.texture_seed)
    dio.write_pfm(args.out, epi)
    print(f"wrote {args.out} ({args.height}x{args.width}, {len(desc['lines'])} lines)")
    return 0


def _add_iteration_args(p):
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--lambda-max", type=float)
    p.add_argument("--lambda-min", type=float)
    p.add_argument("--alpha", default="adaptive", help="adaptive or fixed:A")
    p.add_argument("--init", choices=("zero", "lowpass"), default="lowpass")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--verbose", "-v", action="store_true", help="per-iteration log lines")


def build_parser():
    parser = argparse.ArgumentParser(prog="lfshear", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-system", help="build (and cache) a shearlet system")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--scales", type=int, required=True)
    p.add_argument("--cache")
    p.set_defaults(func=cmd_build_system)

    p = sub.add_parser("reconstruct", help="densify a coarse light field")
    p.add_argument("--manifest", required=True)
    p.add_argument("--dmax", type=int)
    p.add_argument("--dmax-chroma", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--fullparallax", action="store_true")
    _add_iteration_args(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="leave-N-out evaluation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--leave-n", type=int, required=True)
    p.add_argument("--report")
    p.add_argument("--diff-maps")
    p.add_argument("--gain", type=float, default=10.0)
    p.add_argument("--psnr-mode", choices=("rgb", "luma"), default="rgb")
    _add_iteration_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("refocus", help="shift-and-add refocus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--slope", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_refocus)

    p = sub.add_parser("plan-sampling", help="camera step for 1 px disparity")
    p.add_argument("--zmin", type=float, required=True)
    p.add_argument("--focal", type=float, required=True)
    p.add_argument("--pixel-pitch", type=float, required=True)
    p.set_defaults(func=cmd_plan_sampling)

    p = sub.add_parser("synth-epi", help="synthetic line EPI as PFM")
    p.add_argument("--lines", required=True, help="pos:disp:intensity[:width],... or random:N[:seed]")
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--dmax", type=int, default=16)
    p.add_argument("--texture-seed", type=int)
    p.set_defaults(func=cmd_synth_epi)
    return parser


def _setup_logging(verbose):
    # own handler on the package logger: works even when the root logger is
    # already configured by an embedding application
    for h in [h for h in log.handlers if getattr(h, "_lfshear", False)]:
        log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    handler._lfshear = True
    log.addHandler(handler)
    log.setLevel(logging.INFO if verbose else logging.WARNING)
    log.propagate = False


def main(argv=None):
    args = build_parser().parse_args(argv)
    _setup_logging(getattr(args, "verbose", False))
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, dio.CacheMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
