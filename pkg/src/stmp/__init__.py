"""Sparse approximation over shallow balanced dictionary trees.

The package covers the full path from raw tensors to restored output:
patch extraction and aggregation, dictionary construction, balanced
hierarchical clustering, greedy sparse coding with instrumented
inner-product accounting, linear observation operators, and the
restoration pipelines plus a command-line front end built on top.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateOperatorError,
    FormatError,
    InsufficientDataError,
    StaleTreeError,
    UnsupportedFormatError,
)
from .tensor import (
    DTYPE,
    PatchLayout,
    aggregate_patches,
    extract_patches,
    load_pgm,
    load_tensor,
    save_pgm,
    save_tensor,
)
from .dictionary import (
    Dictionary,
    ScoreCounter,
    build_from_patches,
    fnv1a64,
    load_dictionary,
    normalize_columns,
    save_dictionary,
    score_all,
)
from .clustering import (
    BalancedPartition,
    ClusterTree,
    TreeNode,
    TreeReport,
    balanced_cluster,
    build_tree,
    kmeans,
    load_tree,
    save_tree,
    validate_tree,
)
from .pursuit import (
    ExactSelector,
    SearchParams,
    SparseCode,
    TreeSelector,
    exact_select,
    matching_pursuit,
    omp_refit,
    predicted_ip_count,
    reconstruct,
    retained_count,
    stmp_select,
)
from .operators import (
    ObservationOperator,
    ProjectedDictionary,
    apply,
    apply_batch,
    block_average_operator,
    coded_exposure_operator,
    identity_operator,
    lift_code,
    load_row_selection,
    project_dictionary,
    random_exposure_mask,
    row_select_operator,
    save_row_selection,
    simulate_coded_exposure,
    view_selection_rows,
)
from .pipelines import (
    CSV_HEADER,
    TaskConfig,
    TaskReport,
    add_noise_to_snr,
    compressive_recover,
    denoise,
    masked_recover,
    psnr,
    snr,
    super_resolve,
)

__all__ = [
    "__version__",
    "DTYPE",
    "CSV_HEADER",
    "FormatError",
    "UnsupportedFormatError",
    "InsufficientDataError",
    "StaleTreeError",
    "DegenerateOperatorError",
    "PatchLayout",
    "extract_patches",
    "aggregate_patches",
    "save_tensor",
    "load_tensor",
    "save_pgm",
    "load_pgm",
    "Dictionary",
    "ScoreCounter",
    "fnv1a64",
    "normalize_columns",
    "build_from_patches",
    "score_all",
    "save_dictionary",
    "load_dictionary",
    "BalancedPartition",
    "kmeans",
    "balanced_cluster",
    "ClusterTree",
    "TreeNode",
    "TreeReport",
    "build_tree",
    "validate_tree",
    "save_tree",
    "load_tree",
    "SearchParams",
    "SparseCode",
    "ExactSelector",
    "TreeSelector",
    "exact_select",
    "stmp_select",
    "matching_pursuit",
    "reconstruct",
    "omp_refit",
    "retained_count",
    "predicted_ip_count",
    "ObservationOperator",
    "ProjectedDictionary",
    "identity_operator",
    "row_select_operator",
    "coded_exposure_operator",
    "block_average_operator",
    "apply",
    "apply_batch",
    "project_dictionary",
    "lift_code",
    "random_exposure_mask",
    "simulate_coded_exposure",
    "view_selection_rows",
    "save_row_selection",
    "load_row_selection",
    "TaskConfig",
    "TaskReport",
    "add_noise_to_snr",
    "psnr",
    "snr",
    "denoise",
    "super_resolve",
    "compressive_recover",
    "masked_recover",
]
