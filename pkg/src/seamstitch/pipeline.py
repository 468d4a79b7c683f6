"""End-to-end seam-driven stitching.

The loop: group dual-feature correspondences into alignment hypotheses on
the weighted graph, locally align each hypothesis with the seam-guided mesh
deformation (re-estimating the seam every iteration and feeding it back into
the feature weights), score every hypothesis's final seam, keep the best one
and composite. Everything is deterministic for fixed inputs and config.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .correspondences import DualFeatureSet
from .errors import StageFailure, StitchError, ValidationError
from .grouping import (
    DEFAULT_MIN_REMAINING,
    DEFAULT_TAU,
    CorrespondenceGraph,
    Hypothesis,
    build_graph,
    generate_hypotheses,
)
from .homography import DEFAULT_GAMMA, Homography, apply_homography, global_homography
from .meshwarp import (
    DEFAULT_TARGET_CELLS,
    EnergyParams,
    FeatureWeights,
    MeshGrid,
    WarpResult,
    adaptive_weights,
    assemble_and_solve,
    embed_reference,
    init_mesh,
    warp_image,
)
from .seam import (
    DEFAULT_MU_C,
    DEFAULT_PATCH,
    DEFAULT_S_C,
    OverlapRegion,
    SeamResult,
    composite,
    find_seam,
    perception_cost,
    zncc_quality,
)


@dataclass(frozen=True)
class StitchConfig:
    """All tunables of the pipeline, echoed into every report."""

    tau: float = DEFAULT_TAU
    min_remaining: int = DEFAULT_MIN_REMAINING
    max_iterations: int = 5
    convergence_px: float = 1.0
    target_cells: int = DEFAULT_TARGET_CELLS
    energy: EnergyParams = field(default_factory=EnergyParams)
    mdlt_sigma: float | None = None  # pixels; None derives from the ref diagonal
    mdlt_gamma: float = DEFAULT_GAMMA
    seam_mu_c: float = DEFAULT_MU_C
    seam_s_c: float = DEFAULT_S_C
    zncc_patch: int = DEFAULT_PATCH
    direction: str = "auto"  # "horizontal" | "vertical" | "auto"
    feather_radius: int = 0

    def __post_init__(self):
        if self.tau <= 0 or self.convergence_px <= 0 or self.target_cells < 1:
            raise ValueError("thresholds must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.direction not in ("auto", "horizontal", "vertical"):
            raise ValueError(f"unknown direction {self.direction!r}")

    def as_dict(self) -> dict:
        return {
            "tau": self.tau,
            "min_remaining": self.min_remaining,
            "max_iterations": self.max_iterations,
            "convergence_px": self.convergence_px,
            "target_cells": self.target_cells,
            "lambda_point": self.energy.lambda_point,
            "lambda_line": self.energy.lambda_line,
            "lambda_saliency": self.energy.lambda_saliency,
            "distortion_scale": self.energy.distortion_scale,
            "tikhonov": self.energy.tikhonov,
            "mdlt_sigma": self.mdlt_sigma,
            "mdlt_gamma": self.mdlt_gamma,
            "seam_mu_c": self.seam_mu_c,
            "seam_s_c": self.seam_s_c,
            "zncc_patch": self.zncc_patch,
            "direction": self.direction,
            "feather_radius": self.feather_radius,
        }


@dataclass
class HypothesisOutcome:
    """One hypothesis after seam-guided alignment."""

    index: int
    hypothesis: Hypothesis
    mesh: MeshGrid
    warp: WarpResult
    ref_raster: np.ndarray
    ref_mask: np.ndarray
    seam: SeamResult
    iterations_used: int
    converged: bool
    diagnostics: list[dict]
    iteration_meshes: list[np.ndarray]


@dataclass
class StitchOutput:
    """Composite, chosen hypothesis, all outcomes, and the run report."""

    composite: np.ndarray
    chosen_index: int
    outcomes: list[HypothesisOutcome]
    graph: CorrespondenceGraph
    hypotheses: list[Hypothesis]
    report: dict

    @property
    def chosen(self) -> HypothesisOutcome:
        return self.outcomes[self.chosen_index]


def detect_direction(fset: DualFeatureSet) -> str:
    """Pick source/sink placement from the matched centroid displacement."""
    tgt = np.concatenate(
        [fset.pts_target, fset.lines_target.mean(axis=1)]
        if fset.n_lines
        else [fset.pts_target]
    )
    disp = fset.ref_anchors.mean(axis=0) - tgt.mean(axis=0)
    return "horizontal" if abs(disp[0]) >= abs(disp[1]) else "vertical"


def _check_dims(raster: np.ndarray, dims: tuple[int, int], name: str) -> None:
    h, w = raster.shape[:2]
    if (w, h) != tuple(dims):
        raise ValidationError(
            f"{name} raster is {w}x{h} but correspondences declare {dims[0]}x{dims[1]}"
        )


def _cell_saliency(
    mesh: MeshGrid, pre_warp: Homography, saliency: np.ndarray | None
) -> np.ndarray | None:
    """Per-cell saliency for the smoothness term, sampled at the pre-warped
    cell centers; cells landing outside the map stay neutral (1.0)."""
    if saliency is None:
        return None
    cw, ch = mesh.cell_w, mesh.cell_h
    cx = (np.arange(mesh.cols) + 0.5) * cw
    cy = (np.arange(mesh.rows) + 0.5) * ch
    gx, gy = np.meshgrid(cx, cy)
    centers = np.stack([gx.ravel(), gy.ravel()], axis=1)
    warped = apply_homography(pre_warp, centers)
    out = np.ones(len(warped))
    h, w = saliency.shape[:2]
    ix = np.rint(warped[:, 0]).astype(int)
    iy = np.rint(warped[:, 1]).astype(int)
    inside = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    out[inside] = saliency[iy[inside], ix[inside]]
    return out.reshape(mesh.rows, mesh.cols)


def _canvas_saliency(
    saliency: np.ndarray | None, origin: tuple[int, int], shape: tuple[int, int]
) -> np.ndarray | None:
    if saliency is None:
        return None
    canvas, mask = embed_reference(saliency, origin, shape)
    canvas[~mask] = 1.0
    return canvas


def align_hypothesis(
    target: np.ndarray,
    reference: np.ndarray,
    fset: DualFeatureSet,
    hypothesis: Hypothesis,
    config: StitchConfig = StitchConfig(),
    saliency: np.ndarray | None = None,
    index: int = 0,
) -> HypothesisOutcome:
    """Seam-guided local alignment of one hypothesis.

    Iterates mesh solve / warp / seam until the mean vertex displacement
    between consecutive solutions drops below ``convergence_px`` or
    ``max_iterations`` is reached. The seam found at iteration t guides the
    feature weights of iteration t+1; iteration 1 runs unweighted.
    """
    members = sorted(hypothesis.member_features)
    pre_warp = global_homography(fset, members)
    mesh = init_mesh(fset.target_dims, config.target_cells, pre_warp)
    cell_sal = _cell_saliency(mesh, pre_warp, saliency)

    seam_result: SeamResult | None = None
    warp = None
    ref_raster = ref_mask = None
    prev_vhat = mesh.v_hat.copy()
    diagnostics: list[dict] = []
    iteration_meshes: list[np.ndarray] = []
    converged = False
    iterations = 0

    for it in range(1, config.max_iterations + 1):
        iterations = it
        stage = "alignment"
        try:
            weights = (
                FeatureWeights.ones(fset)
                if seam_result is None
                else adaptive_weights(fset, mesh, seam_result, members)
            )
            mesh, energy_terms = assemble_and_solve(
                mesh, members, fset, weights, config.energy, cell_sal
            )
            stage = "warp"
            warp = warp_image(target, mesh, fset.ref_dims)
            ref_raster, ref_mask = embed_reference(reference, warp.origin, warp.shape)
            stage = "seam"
            region = OverlapRegion.from_masks(warp.mask, ref_mask, warp.origin)
            cost = perception_cost(
                warp.image,
                ref_raster,
                region,
                _canvas_saliency(saliency, warp.origin, warp.shape),
                config.seam_mu_c,
                config.seam_s_c,
            )
            seam_result = find_seam(cost, region)
        except StitchError as exc:
            raise StageFailure(stage, exc, hypothesis=index) from exc

        mean_change = float(np.linalg.norm(mesh.v_hat - prev_vhat, axis=1).mean())
        prev_vhat = mesh.v_hat.copy()
        iteration_meshes.append(mesh.v_hat.copy())
        diagnostics.append(
            {
                "iteration": it,
                "mean_vertex_change": mean_change,
                "energy": energy_terms,
                "seam_cost": seam_result.total_cost,
            }
        )
        if mean_change < config.convergence_px:
            converged = True
            break

    score = zncc_quality(seam_result, warp.image, ref_raster, config.zncc_patch)
    seam_result.zncc_score = score
    return HypothesisOutcome(
        index=index,
        hypothesis=hypothesis,
        mesh=mesh,
        warp=warp,
        ref_raster=ref_raster,
        ref_mask=ref_mask,
        seam=seam_result,
        iterations_used=iterations,
        converged=converged,
        diagnostics=diagnostics,
        iteration_meshes=iteration_meshes,
    )


def stitch(
    target: np.ndarray,
    reference: np.ndarray,
    fset: DualFeatureSet,
    config: StitchConfig = StitchConfig(),
    saliency: np.ndarray | None = None,
) -> StitchOutput:
    """Full seam-driven stitch of a target/reference pair."""
    _check_dims(target, fset.target_dims, "target")
    _check_dims(reference, fset.ref_dims, "reference")

    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    direction = config.direction if config.direction != "auto" else detect_direction(fset)
    try:
        graph = build_graph(
            fset,
            direction=direction,
            tau=config.tau,
            sigma=config.mdlt_sigma,
            gamma=config.mdlt_gamma,
        )
        hypotheses = generate_hypotheses(graph, config.tau, config.min_remaining)
    except StitchError as exc:
        raise StageFailure("grouping", exc) from exc
    timings["grouping_s"] = time.perf_counter() - t0

    outcomes: list[HypothesisOutcome] = []
    t1 = time.perf_counter()
    for idx, hyp in enumerate(hypotheses):
        outcomes.append(
            align_hypothesis(target, reference, fset, hyp, config, saliency, index=idx)
        )
    timings["alignment_s"] = time.perf_counter() - t1

    order = sorted(
        range(len(outcomes)),
        key=lambda i: (outcomes[i].seam.zncc_score, outcomes[i].seam.total_cost, i),
    )
    chosen = order[0]

    t2 = time.perf_counter()
    best = outcomes[chosen]
    final = composite(
        best.warp.image,
        best.ref_raster,
        best.seam,
        best.warp.mask,
        best.ref_mask,
        config.feather_radius,
    )
    timings["composite_s"] = time.perf_counter() - t2

    report = {
        "hypothesis_count": len(hypotheses),
        "chosen_index": chosen,
        "direction": direction,
        "hypotheses": [
            {
                "index": o.index,
                "size": o.hypothesis.size,
                "generation_round": o.hypothesis.generation_round,
                "iterations_used": o.iterations_used,
                "converged": o.converged,
                "final_mean_vertex_change": o.diagnostics[-1]["mean_vertex_change"],
                "seam_cost": o.seam.total_cost,
                "zncc_score": o.seam.zncc_score,
            }
            for o in outcomes
        ],
        "config": config.as_dict(),
        "timings": timings,
    }
    return StitchOutput(
        composite=final,
        chosen_index=chosen,
        outcomes=outcomes,
        graph=graph,
        hypotheses=hypotheses,
        report=report,
    )


def render_table(report: dict) -> str:
    """Human-readable per-hypothesis table for one stitch report."""
    lines = [
        f"direction: {report['direction']}   hypotheses: {report['hypothesis_count']}",
        f"{'hyp':>4} {'size':>5} {'iters':>5} {'seam_cost':>11} {'zncc':>8}  chosen",
    ]
    for row in report["hypotheses"]:
        mark = "*" if row["index"] == report["chosen_index"] else ""
        lines.append(
            f"{row['index']:>4} {row['size']:>5} {row['iterations_used']:>5} "
            f"{row['seam_cost']:>11.4f} {row['zncc_score']:>8.4f}  {mark}"
        )
    return "\n".join(lines)


def evaluate_report(output: StitchOutput, path: str | Path) -> str:
    """Write the run report as JSON plus a text table next to it.

    Field order is fixed, so reruns on identical inputs differ only in the
    ``timings`` values. Returns the rendered table.
    """
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(output.report, fh, indent=1)
            fh.write("\n")
        table = render_table(output.report)
        with open(path.with_suffix(".txt"), "w", encoding="utf-8") as fh:
            fh.write(table + "\n")
    except OSError as exc:
        raise StitchError(f"cannot write report to {path}: {exc}") from exc
    return table


def render_batch_table(pairs: list[dict]) -> str:
    """Aggregate table over many stitched pairs: one hypo/seam row each."""
    lines = [f"{'pair':<24} {'hypo':>5} {'seam':>8}"]
    for rec in pairs:
        lines.append(f"{rec['name']:<24} {rec['hypo']:>5} {rec['seam']:>8.4f}")
    return "\n".join(lines)


def batch_report(results: Iterable[tuple[str, StitchOutput]], path: str | Path) -> str:
    """Write the aggregate JSON + text table for a batch evaluation."""
    pairs = []
    for name, output in results:
        chosen = output.report["hypotheses"][output.chosen_index]
        pairs.append(
            {
                "name": name,
                "hypo": output.report["hypothesis_count"],
                "seam": chosen["zncc_score"],
                "seam_cost": chosen["seam_cost"],
                "chosen_index": output.chosen_index,
            }
        )
    doc = {"pairs": pairs}
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    table = render_batch_table(pairs)
    with open(path.with_suffix(".txt"), "w", encoding="utf-8") as fh:
        fh.write(table + "\n")
    return table
