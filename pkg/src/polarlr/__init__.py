"""Exact likelihood-ratio density evolution for channel polarization."""
__version__ = "0.1.0"

from .channel_model import (
    LRAtom,
    LRDistribution,
    TransitionMatrix,
    build_channel,
    canonicalize,
    from_transition_matrix,
    make_awgn_quantized,
    make_bec,
    make_bsc,
    parse_channel_spec,
)
from .metrics import (
    ChannelMetrics,
    bhattacharyya,
    channel_metrics,
    classify_limit,
    prob_partition,
    q_param,
    sym_capacity,
)
from .transforms import (
    EXACT,
    MINSUM,
    KernelId,
    QuantizationBudget,
    minus_exact,
    minus_minsum,
    minus_perturbed,
    oracle_combine,
    plus_exact,
    quantize,
)
from .engine import (
    PathIndex,
    PropositionReport,
    SyntheticChannelRecord,
    evolve_tree,
    martingale_report,
    sample_path,
    verify_propositions,
)
from .approximation import (
    JointLRDistribution,
    SignAgreementReport,
    joint_step,
    lift,
    sign_agreement,
    trapped_mass_trajectory,
)
from .construction import CodeSpec, compare_constructions, select_frozen
from .sc import BlerStats, encode, run_bler, sample_output, sc_decode

__all__ = [
    "LRAtom", "LRDistribution", "TransitionMatrix", "build_channel", "canonicalize",
    "from_transition_matrix", "make_awgn_quantized", "make_bec", "make_bsc", "parse_channel_spec",
    "ChannelMetrics", "bhattacharyya", "channel_metrics", "classify_limit", "prob_partition",
    "q_param", "sym_capacity", "EXACT", "MINSUM", "KernelId", "QuantizationBudget",
    "minus_exact", "minus_minsum", "minus_perturbed", "oracle_combine", "plus_exact", "quantize",
    "PathIndex", "PropositionReport", "SyntheticChannelRecord", "evolve_tree", "martingale_report",
    "sample_path", "verify_propositions", "JointLRDistribution", "SignAgreementReport", "joint_step",
    "lift", "sign_agreement", "trapped_mass_trajectory", "CodeSpec", "compare_constructions",
    "select_frozen", "BlerStats", "encode", "run_bler", "sample_output", "sc_decode",
]
