"""Heterogeneous-agent limit order book market simulator."""

from ._core import (
    Checkpoint,
    Config,
    acorr_coefficient,
    build_tail_cloud,
    excess_kurtosis,
    hill_tail_exponent,
    load_checkpoint,
    make_bars,
    ot_distance,
    simulate,
    solve_transport,
    spearman_correlation,
    train,
    volume_volatility_corr,
)

__all__ = [
    "Checkpoint",
    "Config",
    "acorr_coefficient",
    "build_tail_cloud",
    "excess_kurtosis",
    "hill_tail_exponent",
    "load_checkpoint",
    "make_bars",
    "ot_distance",
    "simulate",
    "solve_transport",
    "spearman_correlation",
    "train",
    "volume_volatility_corr",
]
