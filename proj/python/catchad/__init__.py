"""Channel-masked frequency-patch anomaly detection for multivariate series."""

from ._catchad import (
    __version__,
    affiliation_prf,
    apply_threshold,
    auc_pr,
    auc_roc,
    combine_scores,
    frequency_point_score,
    irfft,
    load_checkpoint,
    read_scores,
    rfft,
    run,
    score,
    synthesize,
    time_score,
)

__all__ = [
    "affiliation_prf",
    "apply_threshold",
    "auc_pr",
    "auc_roc",
    "combine_scores",
    "frequency_point_score",
    "irfft",
    "load_checkpoint",
    "read_scores",
    "rfft",
    "run",
    "score",
    "synthesize",
    "time_score",
]
