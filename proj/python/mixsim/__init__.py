"""Simulator for weakly consistent parallel optimization."""

from ._mixsim import (
    Config,
    Error,
    MixingNotObserved,
    Protocol,
    characterize,
    check_lemma5,
    estimate_tmix,
    run,
    sam_lipschitz,
    spearman,
    theoretical_tmix,
)

__all__ = [
    "Config",
    "Error",
    "MixingNotObserved",
    "Protocol",
    "characterize",
    "check_lemma5",
    "estimate_tmix",
    "run",
    "sam_lipschitz",
    "spearman",
    "theoretical_tmix",
]
