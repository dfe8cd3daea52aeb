"""Min-entropy estimators: closed forms, exact values and the grouping bound."""

from .entropy import (
    IID,
    IND,
    MODELS,
    BlockPartition,
    ExactEntropy,
    blockwise_nk_trace,
    delvaux_iid_bound,
    delvaux_iid_cover,
    exact_cond_min_entropy_general,
    exact_cond_min_entropy_linear,
    exact_cond_min_entropy_total,
    exact_iid_block,
    make_partition,
    min_entropy_iid,
    min_entropy_ind,
    nk_bound,
    nk_bound_blockwise,
    per_bit_traces,
)
from .grouping import (
    MODES,
    BiasGroup,
    BiasGroupSet,
    GroupingBound,
    ResponseGroupTable,
    build_bias_groups,
    enumerate_top_groups,
    group_log_probs,
    grouping_bound_block,
    grouping_bound_total,
    grouping_table_block,
    quantization_error_bracket,
)
from .report import EntropyReport, build_report, build_table, full_response_report

__all__ = [
    "BiasGroup",
    "BiasGroupSet",
    "BlockPartition",
    "EntropyReport",
    "ExactEntropy",
    "GroupingBound",
    "IID",
    "IND",
    "MODELS",
    "MODES",
    "ResponseGroupTable",
    "blockwise_nk_trace",
    "build_bias_groups",
    "build_report",
    "build_table",
    "delvaux_iid_bound",
    "delvaux_iid_cover",
    "enumerate_top_groups",
    "exact_cond_min_entropy_general",
    "exact_cond_min_entropy_linear",
    "exact_cond_min_entropy_total",
    "exact_iid_block",
    "full_response_report",
    "group_log_probs",
    "grouping_bound_block",
    "grouping_bound_total",
    "grouping_table_block",
    "make_partition",
    "min_entropy_iid",
    "min_entropy_ind",
    "nk_bound",
    "nk_bound_blockwise",
    "per_bit_traces",
    "quantization_error_bracket",
]
