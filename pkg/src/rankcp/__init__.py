"""Distribution-free prediction intervals for item ranks.

Wraps any black-box full-ranking algorithm: given the relative ranks of n
calibration items and ranker outputs for all n+m items, builds integer
interval prediction sets for each item's rank among the n+m with marginal
coverage and false-coverage-proportion guarantees, using simulated envelopes
around the unknown pooled ranks of the calibration items.
"""

from .conformal import (
    FCP_CONTROLLED,
    MARGINAL,
    FcpCalibration,
    ProxyScores,
    RankSet,
    Threshold,
    calibrate,
    fcp_calibrated_k,
    fcp_calibration,
    predict_set_ra,
    predict_set_va,
    predict_sets,
    proxy_score_ra,
    proxy_score_va,
    proxy_scores,
    score_ra,
    score_va,
    scores_at,
    select_k,
)
from .envelope import (
    DEFAULT_K,
    ENVELOPE_KINDS,
    Envelope,
    MonteCarloMeta,
    SortedRankSample,
    envelope_coverage,
    fit_linear_envelope,
    fit_quantile_envelope,
    mc_guarantee_slack,
    naive_envelope,
    simulate_sorted_ranks,
    theoretical_envelope,
)
from .errors import (
    DimensionMismatch,
    EmptyPredictionSet,
    InfeasibleLevel,
    InsufficientSample,
    InvalidData,
    InvalidDelta,
    InvalidInput,
    MissingTruth,
    RankCPError,
    RankOutOfRange,
    TiesDetected,
)
from .evaluate import (
    ExperimentConfig,
    ExperimentReport,
    RepResult,
    build_envelope,
    fcp,
    gen_beta_data,
    gen_sigmoid_data,
    make_problem,
    noisy_oracle_ranker,
    oracle_sets,
    relative_length,
    run_experiment,
    synthesize_problem,
)
from .ranks import (
    RA,
    VA,
    ItemId,
    RankingProblem,
    RankTriple,
    break_ties,
    has_ties,
    rank_of,
    ranks_within,
    split_ranks,
    value_at_rank,
)
from .targets import calibration_sets, test_only_set, topk_candidates

__version__ = "0.1.0"
