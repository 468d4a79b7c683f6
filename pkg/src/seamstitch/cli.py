"""Command line interface.

``stitch --target t.png --ref r.png --corr c.json`` runs the full pipeline;
the ``group``, ``warp``, ``seam``, and ``eval`` subcommands expose the
individual stages. Exit codes: 0 success, 2 validation failure, 3 stage
failure (the message names the failing stage).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .correspondences import load_correspondences
from .errors import ParseError, StageFailure, StitchError, ValidationError
from .grouping import build_graph, dump_graph, generate_hypotheses
from .meshwarp import EnergyParams, dump_mesh
from .pipeline import (
    StitchConfig,
    align_hypothesis,
    batch_report,
    detect_direction,
    evaluate_report,
    render_table,
    stitch,
)
from .rasters import load_image, save_image
from .seam import dump_seam

SUBCOMMANDS = ("run", "group", "warp", "seam", "eval")


def _add_corr_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corr", required=True, help="correspondence JSON file")
    p.add_argument("--tau", type=float, default=10.0, help="CRDE threshold in pixels")
    p.add_argument("--min-remaining", type=int, default=30)
    p.add_argument("--direction", choices=("h", "v", "auto"), default="auto")
    p.add_argument("--mdlt-sigma", type=float, default=None, help="moving-DLT scale in pixels")
    p.add_argument("--dump-graph", metavar="PATH", default=None)


def _add_warp_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--target", required=True, help="target image (gets warped)")
    p.add_argument("--ref", required=True, help="reference image")
    p.add_argument("--max-iters", type=int, default=5)
    p.add_argument("--cells", type=int, default=1600)
    p.add_argument("--convergence-px", type=float, default=1.0)
    p.add_argument("--lambda-point", type=float, default=1.0)
    p.add_argument("--lambda-line", type=float, default=5.0)
    p.add_argument("--lambda-saliency", type=float, default=0.5)
    p.add_argument("--saliency", metavar="PATH", default=None, help="grayscale saliency raster")
    p.add_argument("--dump-mesh", metavar="PATH", default=None)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stitch", description="Seam-driven parallax-tolerant image stitching"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline: group, align, pick best seam, composite")
    _add_corr_args(p_run)
    _add_warp_args(p_run)
    p_run.add_argument("--out", metavar="PNG", default=None, help="composite output")
    p_run.add_argument("--report", metavar="JSON", default=None)
    p_run.add_argument("--dump-seam", metavar="PATH", default=None)
    p_run.add_argument("--feather", type=int, default=0, help="feather radius in pixels")

    p_group = sub.add_parser("group", help="graph construction and hypothesis generation only")
    _add_corr_args(p_group)
    p_group.add_argument("--report", metavar="JSON", default=None)

    p_warp = sub.add_parser("warp", help="single-hypothesis seam-guided alignment")
    _add_corr_args(p_warp)
    _add_warp_args(p_warp)
    p_warp.add_argument("--hypothesis", type=int, default=0)
    p_warp.add_argument("--out", metavar="PNG", default=None, help="warped target output")

    p_seam = sub.add_parser("seam", help="seam and quality score for one hypothesis")
    _add_corr_args(p_seam)
    _add_warp_args(p_seam)
    p_seam.add_argument("--hypothesis", type=int, default=0)
    p_seam.add_argument("--dump-seam", metavar="PATH", default=None)
    p_seam.add_argument("--report", metavar="JSON", default=None)

    p_eval = sub.add_parser("eval", help="batch evaluation over a manifest of pairs")
    p_eval.add_argument("--manifest", required=True, help="JSON list of {name, target, ref, corr}")
    p_eval.add_argument("--report", metavar="JSON", required=True)
    p_eval.add_argument("--out-dir", metavar="DIR", default=None)
    p_eval.add_argument("--tau", type=float, default=10.0)
    p_eval.add_argument("--min-remaining", type=int, default=30)
    p_eval.add_argument("--max-iters", type=int, default=5)
    p_eval.add_argument("--cells", type=int, default=1600)

    return parser


def _config_from_args(args: argparse.Namespace) -> StitchConfig:
    direction = {"h": "horizontal", "v": "vertical", "auto": "auto"}[
        getattr(args, "direction", "auto")
    ]
    return StitchConfig(
        tau=args.tau,
        min_remaining=args.min_remaining,
        max_iterations=getattr(args, "max_iters", 5),
        convergence_px=getattr(args, "convergence_px", 1.0),
        target_cells=getattr(args, "cells", 1600),
        energy=EnergyParams(
            lambda_point=getattr(args, "lambda_point", 1.0),
            lambda_line=getattr(args, "lambda_line", 5.0),
            lambda_saliency=getattr(args, "lambda_saliency", 0.5),
        ),
        mdlt_sigma=getattr(args, "mdlt_sigma", None),
        direction=direction,
        feather_radius=getattr(args, "feather", 0),
    )


def _load_saliency(path: str | None) -> np.ndarray | None:
    if path is None:
        return None
    return load_image(path).astype(np.float64) / 255.0


def _single_hypothesis(args: argparse.Namespace):
    fset = load_correspondences(args.corr)
    config = _config_from_args(args)
    direction = config.direction if config.direction != "auto" else detect_direction(fset)
    try:
        graph = build_graph(
            fset, direction=direction, tau=config.tau, sigma=config.mdlt_sigma
        )
        hypotheses = generate_hypotheses(graph, config.tau, config.min_remaining)
    except StitchError as exc:
        raise StageFailure("grouping", exc) from exc
    if args.dump_graph:
        dump_graph(graph, hypotheses, args.dump_graph)
    if not (0 <= args.hypothesis < len(hypotheses)):
        raise ValidationError(
            f"--hypothesis {args.hypothesis} out of range (have {len(hypotheses)})"
        )
    target = load_image(args.target)
    reference = load_image(args.ref)
    outcome = align_hypothesis(
        target,
        reference,
        fset,
        hypotheses[args.hypothesis],
        config,
        _load_saliency(args.saliency),
        index=args.hypothesis,
    )
    return fset, config, outcome


def _cmd_run(args: argparse.Namespace) -> int:
    fset = load_correspondences(args.corr)
    target = load_image(args.target)
    reference = load_image(args.ref)
    config = _config_from_args(args)
    output = stitch(target, reference, fset, config, _load_saliency(args.saliency))
    if args.out:
        save_image(args.out, output.composite)
    if args.dump_graph:
        dump_graph(output.graph, output.hypotheses, args.dump_graph)
    if args.dump_mesh:
        best = output.chosen
        dump_mesh(
            args.dump_mesh,
            best.mesh,
            [
                {**diag, "v_hat": vh.tolist()}
                for diag, vh in zip(best.diagnostics, best.iteration_meshes)
            ],
        )
    if args.dump_seam:
        best = output.chosen
        dump_seam(best.seam, args.dump_seam, best.warp.mask, best.ref_mask)
    if args.report:
        print(evaluate_report(output, args.report))
    else:
        print(render_table(output.report))
    return 0


def _cmd_group(args: argparse.Namespace) -> int:
    fset = load_correspondences(args.corr)
    direction = (
        {"h": "horizontal", "v": "vertical"}[args.direction]
        if args.direction != "auto"
        else detect_direction(fset)
    )
    try:
        graph = build_graph(fset, direction=direction, tau=args.tau, sigma=args.mdlt_sigma)
        hypotheses = generate_hypotheses(graph, args.tau, args.min_remaining)
    except StitchError as exc:
        raise StageFailure("grouping", exc) from exc
    if args.dump_graph:
        dump_graph(graph, hypotheses, args.dump_graph)
    print(f"direction: {direction}   features: {fset.feature_count}   hypotheses: {len(hypotheses)}")
    for h in hypotheses:
        print(f"  round {h.generation_round}: {h.size} members")
    if args.report:
        doc = {
            "direction": direction,
            "hypothesis_count": len(hypotheses),
            "hypotheses": [
                {"round": h.generation_round, "members": sorted(h.member_features)}
                for h in hypotheses
            ],
        }
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    return 0


def _cmd_warp(args: argparse.Namespace) -> int:
    _, _, outcome = _single_hypothesis(args)
    if args.out:
        save_image(args.out, outcome.warp.image)
    if args.dump_mesh:
        dump_mesh(
            args.dump_mesh,
            outcome.mesh,
            [
                {**diag, "v_hat": vh.tolist()}
                for diag, vh in zip(outcome.diagnostics, outcome.iteration_meshes)
            ],
        )
    print(
        f"hypothesis {outcome.index}: {outcome.iterations_used} iteration(s), "
        f"converged={outcome.converged}, "
        f"final mean vertex change {outcome.diagnostics[-1]['mean_vertex_change']:.4f} px"
    )
    return 0


def _cmd_seam(args: argparse.Namespace) -> int:
    _, _, outcome = _single_hypothesis(args)
    if args.dump_seam:
        dump_seam(outcome.seam, args.dump_seam, outcome.warp.mask, outcome.ref_mask)
    print(
        f"hypothesis {outcome.index}: seam cost {outcome.seam.total_cost:.4f}, "
        f"zncc score {outcome.seam.zncc_score:.4f}"
    )
    if args.report:
        doc = {
            "hypothesis": outcome.index,
            "seam_cost": outcome.seam.total_cost,
            "zncc_score": outcome.seam.zncc_score,
            "seam_pixel_count": int(len(outcome.seam.seam_pixels)),
        }
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    try:
        with open(args.manifest, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read manifest {args.manifest}: {exc}") from exc
    config = StitchConfig(
        tau=args.tau,
        min_remaining=args.min_remaining,
        max_iterations=args.max_iters,
        target_cells=args.cells,
    )
    results = []
    for rec in manifest:
        fset = load_correspondences(rec["corr"])
        target = load_image(rec["target"])
        reference = load_image(rec["ref"])
        output = stitch(target, reference, fset, config)
        if args.out_dir:
            out_dir = Path(args.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            save_image(out_dir / f"{rec['name']}.png", output.composite)
        results.append((rec["name"], output))
    print(batch_report(results, args.report))
    return 0


_HANDLERS = {
    "run": _cmd_run,
    "group": _cmd_group,
    "warp": _cmd_warp,
    "seam": _cmd_seam,
    "eval": _cmd_eval,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # Bare `stitch --target ...` means the full pipeline.
    if argv and argv[0] not in SUBCOMMANDS and argv[0] not in ("-h", "--help"):
        argv = ["run"] + argv
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (ParseError, ValidationError) as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return 2
    except StageFailure as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return 3
    except StitchError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
