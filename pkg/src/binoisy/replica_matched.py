"""Large-system mutual information of the doubly-noisy link under matched
decoding, i.e. a receiver that knows the full channel law including the
transmit distortion.

Two scalar fixed-point pairs drive the result. The primary pair (eta, eps)
describes estimation of the distorted signal chi = x + v from the channel
output; the prime pair (eta_prime, eps_prime) describes estimation of the
distortion alone and prices the information carried by v itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .decoupled import DecoupledTrue, matched_scalar_mi, matched_second_moment
from .model import Constellation, RateResult, SystemConfig
from .numerics import DEFAULT_ORDER, damped_fixed_point

__all__ = [
    "MatchedAux",
    "solve_matched_primary",
    "solve_matched_prime",
    "matched_mi",
    "matched_mi_highsnr",
]

_EPS_SEED_FLOOR = 1e-6


@dataclass
class MatchedAux:
    """Solved matched fixed points plus solver diagnostics."""

    eta: float
    eps: float
    eta_prime: float
    eps_prime: float
    converged: bool
    iterations: int

    def residuals(self, cfg: SystemConfig, constellation: Constellation, order: int = DEFAULT_ORDER) -> dict:
        """Absolute violation of each fixed-point equation at the solution."""
        M = cfg.M
        res = {
            "eta": abs(self.eta - cfg.trinv_rw_plus(self.eps) / M),
            "eta_prime": abs(self.eta_prime - cfg.trinv_rw_plus(self.eps_prime) / M),
            "eps_prime": abs(self.eps_prime - cfg.r_v / (1.0 + self.eta_prime * cfg.r_v)),
        }
        true_ctx = DecoupledTrue(eta=self.eta, r_v=cfg.r_v, constellation=constellation)
        target = cfg.gamma_bar + cfg.r_v - matched_second_moment(true_ctx, order)
        res["eps"] = abs(self.eps - target)
        return res


def _bisect_increasing(g: Callable[[float], float], lo: float, hi: float, steps: int = 200) -> float:
    """Root of g on [lo, hi] given g(lo) <= 0 <= g(hi), by plain bisection.
    Used for the scalar maps whose damped iteration stalls when the Jacobian
    approaches one (Gaussian inputs at very high SNR)."""
    glo = g(lo)
    if glo > 0:
        return lo
    if g(hi) < 0:
        raise ValueError("bisection bracket does not contain a sign change")
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if g(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_matched_prime(cfg: SystemConfig) -> tuple[float, float]:
    """Solve eta' = tr((R_w + eps' I)^-1)/M, eps' = r_v/(1 + eta' r_v).

    The pair measures how well the receiver could estimate the transmit
    distortion if the data symbols were known; it does not involve the
    constellation. r_v = 0 collapses it to eps' = 0 exactly.
    """
    M, r_v = cfg.M, cfg.r_v
    if r_v == 0.0:
        return cfg.trinv_rw_plus(0.0) / M, 0.0

    def g(e):
        eta_p = cfg.trinv_rw_plus(e) / M
        return e - r_v / (1.0 + eta_p * r_v)

    eps_p = _bisect_increasing(g, 0.0, r_v)
    return cfg.trinv_rw_plus(eps_p) / M, eps_p


def solve_matched_primary(
    cfg: SystemConfig,
    constellation: Constellation,
    order: int = DEFAULT_ORDER,
    damping: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> list[tuple[float, float, int, bool]]:
    """Solve eta = tr((R_w + eps I)^-1)/M jointly with
    eps = gamma_bar + r_v - E|<chi>|^2.

    Returns candidate branches as (eta, eps, iterations, converged). Gaussian
    inputs admit a single solution and are rooted directly; discrete alphabets
    run the damped iteration from both multi-start seeds and may return two
    branches in bistable regions.
    """
    M, P = cfg.M, cfg.gamma_bar + cfg.r_v
    if constellation.is_gaussian:
        def g(e):
            eta = cfg.trinv_rw_plus(e) / M
            return e - P / (1.0 + eta * P)

        eps = _bisect_increasing(g, 0.0, P)
        return [(cfg.trinv_rw_plus(eps) / M, eps, 0, True)]

    def F(x):
        eta = cfg.trinv_rw_plus(float(x[0])) / M
        ctx = DecoupledTrue(eta=eta, r_v=cfg.r_v, constellation=constellation)
        return np.array([P - matched_second_moment(ctx, order)])

    branches = []
    for seed in (_EPS_SEED_FLOOR, P):
        out = damped_fixed_point(F, [seed], damping=damping, tol=tol, max_iter=max_iter)
        eps = float(out.solution[0])
        if any(abs(eps - b[1]) <= 1e-8 * (1.0 + eps) for b in branches):
            continue
        branches.append((cfg.trinv_rw_plus(eps) / M, eps, out.iterations, out.converged))
    return branches


def _mi_from_branch(cfg: SystemConfig, constellation: Constellation, eta: float, eps: float,
                    eta_p: float, eps_p: float, order: int) -> float:
    aN = cfg.M
    true_ctx = DecoupledTrue(eta=eta, r_v=cfg.r_v, constellation=constellation)
    return (
        (cfg.logdet_rw_plus(eps) - cfg.logdet_rw_plus(eps_p)) / aN
        - (eta * eps - eta_p * eps_p)
        + matched_scalar_mi(true_ctx, order)
        - math.log1p(eta_p * cfg.r_v)
    )


def matched_mi(
    cfg: SystemConfig,
    constellation: Constellation,
    order: int = DEFAULT_ORDER,
    damping: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> RateResult:
    """Per-stream mutual information in nats under matched decoding.

    When the primary pair is multivalued the branch with the smaller rate is
    reported; the rate differs from the matched free energy by a
    solution-independent constant, so that choice is the free-energy
    minimizer.
    """
    eta_p, eps_p = solve_matched_prime(cfg)
    branches = solve_matched_primary(cfg, constellation, order, damping, tol, max_iter)
    usable = [b for b in branches if b[3]] or branches
    best = None
    for eta, eps, its, conv in usable:
        mi = _mi_from_branch(cfg, constellation, eta, eps, eta_p, eps_p, order)
        if best is None or mi < best[0]:
            best = (mi, eta, eps, its, conv)
    mi, eta, eps, its, conv = best
    total_iters = sum(b[2] for b in branches)
    return RateResult(
        rate_nats=mi,
        params={"eta": eta, "eps": eps, "eta_prime": eta_p, "eps_prime": eps_p},
        s_tilde=None,
        free_energy=None,
        converged=conv,
        iterations=total_iters,
    )


def matched_mi_highsnr(alpha: float, kappa: float) -> float:
    """gamma_bar -> inf limit of the matched per-stream rate for Gaussian
    signaling, in nats: ln((1+kappa^2)/kappa^2), divided by alpha when the
    link has more streams than receive antennas."""
    if kappa <= 0:
        raise ValueError("high-SNR matched rate diverges without transmit distortion (kappa must be > 0)")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha:g}")
    base = math.log((1.0 + kappa * kappa) / (kappa * kappa))
    return base if alpha <= 1.0 else base / alpha
