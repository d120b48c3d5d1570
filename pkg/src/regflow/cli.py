"""Command-line interface.

Five subcommands: ``stats`` (trajectory statistics), ``regmap``
(regularity map for one patch), ``flow`` (dense flow estimation),
``trajsearch`` (four-step trajectory search for one patch) and ``eval``
(AE/EE against ground truth). Every command echoes its parameters into
a JSON run manifest beside the outputs, prints status to stderr only,
and exits 0 on success, 2 on data or domain errors, 64 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, report
from . import normalization as norm
from . import stats as statsmod
from . import trajectories as trajmod
from .evaluation import evaluate_field
from .horn_schunck import HsParams, horn_schunck
from .regularity import (
    displacement_range,
    estimate_flow_field,
    estimate_patch_motion,
    four_step_flow_field,
    four_step_trajectory_search,
    regularity_map,
)
from .video_io import load_frame_sequence, read_flo, write_flo, write_raw_volume

EXIT_OK = 0
EXIT_DATA = 2
EXIT_USAGE = 64

_NORM_KINDS = {"tdn": norm.KIND_TDN, "sdn": norm.KIND_SDN, "stdn": norm.KIND_STDN}


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage failures exit with code 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_pair(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(",")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y integers, got {text!r}")


def _frame_span(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(":")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected FIRST:LAST, got {text!r}")


def _float_span(text: str) -> tuple[float, float]:
    try:
        a, b = text.split(":")
        return float(a), float(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}")


def _add_frame_flags(p: _Parser) -> None:
    p.add_argument("--pattern", required=True,
                   help="printf-style frame path pattern, e.g. frames/f_%%03d.pgm")
    p.add_argument("--frames", required=True, type=_frame_span, metavar="FIRST:LAST",
                   help="inclusive file index range")
    p.add_argument("--t0", type=int, default=0,
                   help="reference frame index within the loaded sequence")


def _add_hist_flags(p: _Parser) -> None:
    p.add_argument("--bins", type=int, default=statsmod.DEFAULT_BINS)
    p.add_argument("--range", type=_float_span, default=statsmod.DEFAULT_RANGE,
                   metavar="LO:HI", dest="value_range")
    p.add_argument("--c", type=float, default=0.5, dest="saturation",
                   help="saturation constant of the divisive normalizer")


def _add_out_flags(p: _Parser) -> None:
    p.add_argument("--out", required=True, help="output directory")
    fig = p.add_mutually_exclusive_group()
    fig.add_argument("--figures", dest="figures", action="store_true", default=True)
    fig.add_argument("--no-figures", dest="figures", action="store_false")


def build_parser() -> _Parser:
    parser = _Parser(prog="regflow", description=__doc__)
    parser.add_argument("--version", action="version", version=f"regflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", help="trajectory difference-volume statistics")
    _add_frame_flags(p)
    p.add_argument("--origin", type=_int_pair, default=(0, 0), metavar="X,Y",
                   help="patch top-left corner")
    p.add_argument("--patch-size", type=int, default=100)
    p.add_argument("--depth", type=int, default=None,
                   help="trajectory steps (default: all frames after t0)")
    p.add_argument("--trajectory", choices=["motion", "non-displaced", "random"],
                   default="non-displaced")
    p.add_argument("--flow", default=None,
                   help=".flo ground truth for motion trajectories; a %%d "
                        "pattern loads one field per step (1-based)")
    p.add_argument("--seed", type=int, default=None, help="random trajectory seed")
    p.add_argument("--drift-bound", type=int, default=20,
                   help="random trajectory per-step bound")
    p.add_argument("--norm", choices=sorted(_NORM_KINDS), default="stdn")
    p.add_argument("--temporal-half-width", type=int, default=10)
    p.add_argument("--spatial-half-width", type=int, default=5)
    _add_hist_flags(p)
    p.add_argument("--dump-volumes", action="store_true",
                   help="also write raw float32 difference and coefficient volumes")
    _add_out_flags(p)

    p = sub.add_parser("regmap", help="regularity map for one patch")
    _add_frame_flags(p)
    p.add_argument("--origin", type=_int_pair, required=True, metavar="X,Y")
    p.add_argument("--patch-size", type=int, required=True)
    p.add_argument("--t", type=int, default=1, dest="temporal_displacement")
    p.add_argument("--spatial-half-width", type=int, default=5)
    _add_hist_flags(p)
    _add_out_flags(p)

    p = sub.add_parser("flow", help="dense flow estimation")
    _add_frame_flags(p)
    p.add_argument("--method", required=True,
                   choices=["regularity-sdn", "fourstep-tdn", "fourstep-stdn",
                            "horn-schunck"])
    p.add_argument("--patch-size", type=int, default=None,
                   help="tile size (default 81 for regularity, 100 for fourstep)")
    p.add_argument("--sweep", action="store_true",
                   help="regularity only: iterate patch sizes 51..101 step 10")
    p.add_argument("--t", type=int, default=1, dest="temporal_displacement")
    p.add_argument("--spatial-half-width", type=int, default=5)
    p.add_argument("--temporal-half-width", type=int, default=5)
    p.add_argument("--depth", type=int, default=10, help="fourstep trajectory depth")
    p.add_argument("--search-range", type=int, default=24)
    p.add_argument("--iterations", type=int, default=12, help="relaxation iterations")
    p.add_argument("--smoothness", type=float, default=1.0)
    p.add_argument("--prefilter", action="store_true")
    _add_hist_flags(p)
    _add_out_flags(p)

    p = sub.add_parser("trajsearch", help="four-step trajectory search for one patch")
    _add_frame_flags(p)
    p.add_argument("--origin", type=_int_pair, required=True, metavar="X,Y")
    p.add_argument("--norm", choices=["tdn", "stdn"], default="tdn")
    p.add_argument("--patch-size", type=int, default=100)
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--search-range", type=int, default=24)
    p.add_argument("--temporal-half-width", type=int, default=5)
    p.add_argument("--spatial-half-width", type=int, default=5)
    _add_hist_flags(p)
    _add_out_flags(p)

    p = sub.add_parser("eval", help="AE/EE evaluation against ground truth")
    p.add_argument("--est", required=True, help="estimated .flo field")
    p.add_argument("--gt", required=True, help="ground-truth .flo field")
    p.add_argument("--patch-size", type=int, default=None,
                   help="echoed into the N column of the report CSV")
    p.add_argument("--disp-range", type=int, default=None,
                   help="echoed into the range column of the report CSV")
    p.add_argument("--tile", type=int, default=None,
                   help="also report per-tile means for this tile size")
    p.add_argument("--radians", action="store_true",
                   help="report angular error in radians instead of degrees")
    _add_out_flags(p)

    return parser


def _manifest(args: argparse.Namespace, outputs: list[str]) -> dict:
    params = {}
    for key, val in sorted(vars(args).items()):
        if key == "command":
            continue
        if isinstance(val, tuple):
            val = list(val)
        params[key] = val
    return {
        "command": args.command,
        "package": "regflow",
        "version": __version__,
        "parameters": params,
        "outputs": sorted(outputs),
    }


def _write_manifest(out_dir: Path, args: argparse.Namespace, outputs: list[str]) -> None:
    payload = json.dumps(_manifest(args, outputs), indent=2, sort_keys=True) + "\n"
    (out_dir / "manifest.json").write_text(payload)


def _status(msg: str) -> None:
    print(msg, file=sys.stderr)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_seq(args):
    first, last = args.frames
    return load_frame_sequence(args.pattern, first, last)


def _window_for(kind: str, args) -> norm.GaussianWindow:
    shw = args.spatial_half_width
    if kind == norm.KIND_TDN:
        return norm.gaussian_window((args.temporal_half_width,))
    if kind == norm.KIND_SDN:
        return norm.gaussian_window((shw, shw))
    return norm.gaussian_window((args.temporal_half_width, shw, shw))


def cmd_stats(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    seq = _load_seq(args)
    depth = args.depth if args.depth is not None else seq.count - 1 - args.t0
    origin = (args.origin[0], args.origin[1], args.t0)
    kind = args.trajectory
    if kind == "motion":
        if args.flow is None:
            raise ValueError("motion trajectory needs --flow")
        if "%" in args.flow:
            flow = [read_flo(args.flow % s) for s in range(1, depth + 1)]
        else:
            flow = read_flo(args.flow)
        traj = trajmod.make_trajectory(kind, origin, depth, flow=flow,
                                       patch_size=args.patch_size)
    elif kind == "random":
        if args.seed is None:
            raise ValueError("random trajectory needs --seed")
        traj = trajmod.make_trajectory(kind, origin, depth, seed=args.seed,
                                       drift_bound=args.drift_bound)
    else:
        traj = trajmod.make_trajectory(kind, origin, depth)

    volume = trajmod.collect_volume(seq, traj, args.patch_size)
    norm_kind = _NORM_KINDS[args.norm]
    window = _window_for(norm_kind, args)
    coeffs = norm.unit_variance(
        norm.divisive_normalize(volume, norm_kind, window, args.saturation)
    )
    hist = statsmod.histogram(coeffs.coeffs, args.bins, args.value_range)
    ref = statsmod.gaussian_reference(args.bins, args.value_range)
    divergence = statsmod.kld(hist, ref)
    fit = statsmod.ggd_fit(coeffs.coeffs)

    outputs = ["histogram.csv", "stats.json"]
    hist.to_csv(out / "histogram.csv")
    (out / "stats.json").write_text(json.dumps({
        "kld": divergence,
        "ggd": {"alpha": fit.alpha, "variance": fit.variance, "beta": fit.beta},
        "norm": norm_kind,
        "depth_collected": volume.depth,
        "sample_count": int(coeffs.coeffs.size),
        "trajectory": traj.metadata(),
    }, indent=2, sort_keys=True) + "\n")
    if args.dump_volumes:
        meta = {"content": "displaced frame differences", "trajectory": traj.metadata()}
        write_raw_volume(out / "diff_volume", volume.diffs, meta)
        meta = {"content": f"{norm_kind} coefficients, unit variance",
                "saturation": args.saturation, "trajectory": traj.metadata()}
        write_raw_volume(out / "coeff_volume", coeffs.coeffs, meta)
        outputs += ["diff_volume.raw", "diff_volume.json",
                    "coeff_volume.raw", "coeff_volume.json"]
    if args.figures:
        report.save_histogram_figure(hist, ref, out / "histogram.png", ggd=fit)
        outputs.append("histogram.png")
    _write_manifest(out, args, outputs)
    _status(f"stats: kld={divergence:.6f} alpha={fit.alpha:.4f} -> {out}")
    return EXIT_OK


def cmd_regmap(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    seq = _load_seq(args)
    rmap = regularity_map(
        seq, (args.origin[0], args.origin[1], args.t0), args.patch_size,
        args.temporal_displacement, saturation=args.saturation,
        spatial_half_widths=(args.spatial_half_width, args.spatial_half_width),
        bins=args.bins, value_range=args.value_range,
    )
    est = estimate_patch_motion(rmap)
    ax, ay = rmap.argmin()
    outputs = ["regmap.csv", "regmap.pgm", "regmap.pgm.json", "estimate.json"]
    rmap.to_csv(out / "regmap.csv")
    rmap.to_pgm16(out / "regmap.pgm")
    (out / "estimate.json").write_text(json.dumps({
        "u_est": est.u_est,
        "v_est": est.v_est,
        "argmin": [ax, ay],
        "percentile_set_size": est.percentile_set_size,
        "search_radius": rmap.search_radius,
        "patch_origin": list(rmap.patch_origin),
    }, indent=2, sort_keys=True) + "\n")
    if args.figures:
        report.save_regularity_map_figure(rmap, out / "regmap.png", estimate=est)
        outputs.append("regmap.png")
    _write_manifest(out, args, outputs)
    _status(f"regmap: estimate=({est.u_est:.3f}, {est.v_est:.3f}) "
            f"argmin=({ax}, {ay}) -> {out}")
    return EXIT_OK


def cmd_flow(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    seq = _load_seq(args)
    outputs = []
    if args.method == "regularity-sdn":
        sizes = list(range(51, 102, 10)) if args.sweep else [args.patch_size or 81]
        for n in sizes:
            field = estimate_flow_field(
                seq, args.t0, n, args.temporal_displacement,
                saturation=args.saturation,
                spatial_half_widths=(args.spatial_half_width, args.spatial_half_width),
                bins=args.bins, value_range=args.value_range,
            )
            name = f"flow_N{n}.flo" if args.sweep else "flow.flo"
            write_flo(field, out / name)
            outputs.append(name)
            if args.figures:
                fig_name = name.replace(".flo", ".png")
                report.save_flow_figure(field, out / fig_name)
                outputs.append(fig_name)
            _status(f"flow[{args.method}] N={n} range={displacement_range(n)} -> {name}")
    elif args.method in ("fourstep-tdn", "fourstep-stdn"):
        kind = norm.KIND_TDN if args.method.endswith("tdn") else norm.KIND_STDN
        hw = ((args.temporal_half_width,) if kind == norm.KIND_TDN else
              (args.temporal_half_width, args.spatial_half_width, args.spatial_half_width))
        field = four_step_flow_field(
            seq, args.t0, kind, depth=args.depth,
            patch_size=args.patch_size or 100, search_range=args.search_range,
            half_widths=hw, saturation=args.saturation,
            bins=args.bins, value_range=args.value_range,
        )
        write_flo(field, out / "flow.flo")
        outputs.append("flow.flo")
        if args.figures:
            report.save_flow_figure(field, out / "flow.png")
            outputs.append("flow.png")
        _status(f"flow[{args.method}] depth={args.depth} -> flow.flo")
    else:  # horn-schunck
        if args.t0 + 1 >= seq.count:
            raise ValueError("horn-schunck needs a frame after t0")
        residuals: list[float] = []
        field = horn_schunck(
            seq.frame(args.t0), seq.frame(args.t0 + 1),
            HsParams(args.smoothness, args.iterations, args.prefilter),
            residual_out=residuals,
        )
        write_flo(field, out / "flow.flo")
        lines = ["iteration,residual"]
        lines += [f"{i + 1},{r!r}" for i, r in enumerate(residuals)]
        (out / "residuals.csv").write_text("\n".join(lines) + "\n")
        outputs += ["flow.flo", "residuals.csv"]
        if args.figures:
            report.save_flow_figure(field, out / "flow.png")
            report.save_residual_figure(residuals, out / "residuals.png")
            outputs += ["flow.png", "residuals.png"]
        _status(f"flow[horn-schunck] iterations={args.iterations} -> flow.flo")
    _write_manifest(out, args, outputs)
    return EXIT_OK


def cmd_trajsearch(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    seq = _load_seq(args)
    kind = _NORM_KINDS[args.norm]
    hw = ((args.temporal_half_width,) if kind == norm.KIND_TDN else
          (args.temporal_half_width, args.spatial_half_width, args.spatial_half_width))
    step_log: list = []
    traj = four_step_trajectory_search(
        seq, (args.origin[0], args.origin[1], args.t0), kind,
        depth=args.depth, patch_size=args.patch_size,
        search_range=args.search_range, half_widths=hw,
        saturation=args.saturation, bins=args.bins, value_range=args.value_range,
        step_log=step_log,
    )
    endpoint = [int(c) for c in traj.offsets[-1]]
    outputs = ["trajectory.json", "steps.csv"]
    (out / "trajectory.json").write_text(json.dumps({
        "trajectory": traj.metadata(),
        "endpoint": endpoint,
        "per_frame": [endpoint[0] / args.depth, endpoint[1] / args.depth],
        "kld": step_log[-1][2],
    }, indent=2, sort_keys=True) + "\n")
    lines = ["step,endpoint_x,endpoint_y,kld"]
    lines += [f"{s},{e[0]},{e[1]},{k!r}" for s, e, k in step_log]
    (out / "steps.csv").write_text("\n".join(lines) + "\n")
    if args.figures:
        report.save_residual_figure([k for _, _, k in step_log], out / "steps.png",
                                    ylabel="incumbent divergence",
                                    title="Trajectory search steps")
        outputs.append("steps.png")
    _write_manifest(out, args, outputs)
    _status(f"trajsearch: endpoint=({endpoint[0]}, {endpoint[1]}) "
            f"kld={step_log[-1][2]:.6f} -> {out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    est = read_flo(args.est)
    gt = read_flo(args.gt)
    rep = evaluate_field(est, gt, degrees=not args.radians, tile=args.tile)
    outputs = ["report.json", "report.csv"]
    rep.to_json(out / "report.json", wall_clock=False)
    rep.to_csv(out / "report.csv", args.patch_size, args.disp_range)
    if args.figures:
        report.save_error_map_figure(est, gt, out / "error_map.png")
        outputs.append("error_map.png")
    _write_manifest(out, args, outputs)
    _status(f"eval: AE={rep.mean_ae:.4f} EE={rep.mean_ee:.4f} "
            f"over {rep.pixel_count} px -> {out}")
    return EXIT_OK


_COMMANDS = {
    "stats": cmd_stats,
    "regmap": cmd_regmap,
    "flow": cmd_flow,
    "trajsearch": cmd_trajsearch,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"regflow {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
