"""Hardware budget planning: how much transmit-side distortion a link can
absorb before the achievable rate drops by more than a given fraction.

The planner answers the inverse question of the rate solvers. Rate loss is
monotone in the error vector magnitude, so the largest admissible EVM is found
by bisection on the dB axis; the returned value is the certified-feasible
lower endpoint of the final bracket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import Constellation, make_config, make_constellation
from .numerics import DEFAULT_ORDER
from .replica_matched import matched_mi
from .replica_mismatched import gmi

__all__ = ["LossQuery", "rate_loss", "max_evm_for_loss", "rule_of_thumb_evm", "DECODERS"]

DECODERS = ("matched", "gmi")


@dataclass(frozen=True)
class LossQuery:
    """What is being transmitted and how it is decoded, everything except the
    SNR and EVM operating point."""

    M: int
    N: int
    constellation: str = "gaussian"
    decoder: str = "matched"
    R_w: Optional[np.ndarray] = None
    points: Optional[np.ndarray] = None
    order: int = DEFAULT_ORDER

    def __post_init__(self):
        if self.decoder not in DECODERS:
            raise ValueError(f"decoder must be one of {DECODERS}, got {self.decoder!r}")


def _rate_nats(query: LossQuery, snr_db: float, evm_db: float) -> float:
    cfg = make_config(query.M, query.N, snr_db, evm_db, query.R_w)
    con: Constellation = make_constellation(query.constellation, cfg.gamma_bar, query.points)
    if query.decoder == "matched":
        return matched_mi(cfg, con, order=query.order).rate_nats
    return gmi(cfg, con, order=query.order).rate_nats


def rate_loss(
    query: LossQuery,
    snr_db: float,
    evm_db: float,
    ideal_rate_nats: Optional[float] = None,
) -> float:
    """Fractional rate loss at (snr_db, evm_db) relative to distortion-free
    hardware at the same SNR. Pass ideal_rate_nats to reuse a reference that
    is already solved."""
    ref = _rate_nats(query, snr_db, -math.inf) if ideal_rate_nats is None else ideal_rate_nats
    if ref <= 0:
        raise ValueError(f"reference rate is {ref:g} nats, loss fraction undefined")
    return 1.0 - _rate_nats(query, snr_db, evm_db) / ref


def max_evm_for_loss(
    query: LossQuery,
    snr_db: float,
    loss_budget: float,
    lo_db: float = -60.0,
    hi_db: float = 0.0,
    tol_db: float = 0.002,
) -> float:
    """Largest EVM (dB) whose rate loss stays within loss_budget.

    Returns hi_db when even the loosest hardware meets the budget and -inf
    when the budget is infeasible everywhere in [lo_db, hi_db]; -inf is an
    answer, not an error. Otherwise bisect and return the feasible end of the
    final bracket, so the reported EVM is guaranteed within budget up to the
    rate solver's own accuracy.
    """
    if not 0.0 < loss_budget < 1.0:
        raise ValueError(f"loss_budget must be a fraction in (0, 1), got {loss_budget:g}")
    if not lo_db < hi_db:
        raise ValueError(f"need lo_db < hi_db, got [{lo_db:g}, {hi_db:g}]")
    if tol_db <= 0:
        raise ValueError(f"tol_db must be positive, got {tol_db:g}")
    ideal = _rate_nats(query, snr_db, -math.inf)
    if ideal <= 0:
        raise ValueError(f"ideal rate is {ideal:g} nats at snr {snr_db:g} dB, planning undefined")

    def loss(evm_db: float) -> float:
        return rate_loss(query, snr_db, evm_db, ideal_rate_nats=ideal)

    loss_lo, loss_hi = loss(lo_db), loss(hi_db)
    if loss_lo > loss_hi + 1e-12:
        raise RuntimeError(
            f"rate loss is not monotone on [{lo_db:g}, {hi_db:g}] dB "
            f"({loss_lo:g} > {loss_hi:g}); cannot bisect"
        )
    if loss_hi <= loss_budget:
        return hi_db
    if loss_lo > loss_budget:
        return -math.inf
    lo, hi = lo_db, hi_db
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if loss(mid) <= loss_budget:
            lo = mid
        else:
            hi = mid
    return lo


def rule_of_thumb_evm(snr_db: float) -> float:
    """Linear worst-case approximation of the 5 percent loss boundary for
    Gaussian signaling with matched decoding, in dB."""
    return -0.7 * snr_db - 13.0
