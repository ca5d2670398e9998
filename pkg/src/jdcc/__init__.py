"""Chain-coded contour codec with joint denoising and compression.

The package covers the full pipeline: boundary tracing of binary masks
into differential chain codes, a PPM context-tree model with arithmetic
coding for lossless transmission, a three-state burst error channel with
exact and linearized likelihoods, and an optimal dynamic program that
picks the contour estimate minimizing error + prior + weighted rate.
"""

from .coder import Bitstream, decode, encode, measure_rate
from .context import (
    ContextTree,
    SymbolDistribution,
    TotalSuffixTree,
    build_tree,
    build_tst,
    deserialize_tree,
    estimate_rate,
    max_depth_for,
    ppm_probability,
    serialize_tree,
    truncate_history,
)
from .contour import (
    DccString,
    Direction,
    Edge,
    GridBounds,
    chord_deviation,
    distortion,
    next_edge,
    prior_cost,
    read_contours,
    realize,
    straightness,
    write_contours,
)
from .exceptions import (
    AlignmentInfeasibleError,
    BitstreamFormatError,
    ContourFormatError,
    DataFormatError,
    InfeasibleError,
    PgmFormatError,
    RateBudgetError,
    TreeFormatError,
)
from .mask import GridMask, rasterize_contours, read_pgm, trace_contours, write_pgm
from .noise import (
    BurstAnnotation,
    BurstCosts,
    IidParams,
    TransitionParams,
    aic,
    align_strings,
    corrupt_mask,
    corrupt_string,
    estimate_alternating,
    estimate_from_annotations,
    estimate_from_pairs,
    estimate_iid_from_annotations,
    iid_neg_log_likelihood,
    neg_log_likelihood_approx,
    neg_log_likelihood_exact,
    relative_likelihood,
)
from .optimize import (
    ObjectiveConfig,
    Solution,
    brute_force,
    joint_denoise,
    lambda_search,
    separate_baseline,
)
from .shapes import circle_mask, l_shape_mask, rectangle_mask, shape_frames

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
