"""Seam-driven parallax-tolerant image stitching.

Pipeline: group dual-feature correspondences into local-alignment
hypotheses on a weighted Delaunay graph, align each hypothesis with a
seam-guided sparse mesh deformation, pick the hypothesis with the best
perception-based seam, and composite.
"""

from .correspondences import (
    DualFeatureSet,
    LinePair,
    PointPair,
    build_feature_set,
    load_correspondences,
    sample_line,
    sample_segment,
    save_correspondences,
)
from .errors import (
    AtInfinity,
    DegenerateGeometry,
    Disconnected,
    EmptyOverlap,
    FoldedCellWarning,
    NoAnchor,
    OutOfMesh,
    ParseError,
    RankDeficient,
    SingularSystem,
    StageFailure,
    StitchError,
    ValidationError,
)
from .grouping import (
    CorrespondenceGraph,
    GraphEdge,
    GraphVertex,
    Hypothesis,
    build_graph,
    crde_weight,
    generate_hypotheses,
    grow_hypothesis,
    segment_distance,
    shortest_path,
    sigmoid_transform,
)
from .homography import (
    DesignSystem,
    Homography,
    apply_homography,
    apply_to_segment,
    build_design_system,
    gaussian_weights,
    global_homography,
    local_homography,
    solve_mdlt,
)
from .meshwarp import (
    EnergyParams,
    EnergySystem,
    FeatureWeights,
    MeshGrid,
    WarpResult,
    adaptive_weights,
    assemble_and_solve,
    assemble_energy,
    bilinear_coeffs,
    embed_reference,
    init_mesh,
    mesh_phi,
    warp_image,
)
from .pipeline import (
    HypothesisOutcome,
    StitchConfig,
    StitchOutput,
    align_hypothesis,
    batch_report,
    detect_direction,
    evaluate_report,
    stitch,
)
from .seam import (
    CostMap,
    OverlapRegion,
    SeamResult,
    composite,
    find_seam,
    perception_cost,
    zncc_quality,
)

__version__ = "0.1.0"
