"""Generalized mutual information of the doubly-noisy link when the receiver
decodes with a postulated white-noise law instead of the true channel.

The large-system analysis decouples the link into the scalar channels of
decoupled.py, governed by four unknowns: the postulated and true inverse
noise variances (xi, eta) and the corresponding mean-square errors
(eps_tilde, eps). For a white postulated covariance everything depends on the
postulate only through the scale s_tilde = s / r_tilde, so rates are reported
as a supremum over that single scalar. The fully general covariance path is
kept alongside and must agree; it is exercised by the invariance tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .decoupled import (
    DecoupledPostulated,
    DecoupledTrue,
    cross_entropy,
    postulated_mmse,
    true_mse,
)
from .model import Constellation, RateResult, SystemConfig
from .numerics import DEFAULT_ORDER, damped_fixed_point, maximize_scalar
from .replica_matched import matched_mi

__all__ = [
    "MismatchedAux",
    "xi_gaussian_closed_form",
    "solve_xi_discrete",
    "solve_eta_eps",
    "free_energy",
    "gmi_at_s",
    "gmi",
    "gmi_highsnr_gaussian",
    "general_aux_traces",
    "free_energy_general",
    "gmi_at_s_general",
    "gmi_general",
    "seed_grid",
]

_SEED_GRID_POINTS = 31
_SEED_GRID_DECADES = (-3.0, 3.0)

# Slack allowed above the matched rate before a scan point is declared
# unphysical. Wide enough for quadrature noise at the degenerate point where
# the two rates coincide exactly, far below any real crossing.
_CEILING_TOL = 1e-7


def _rate_ceiling(
    cfg: SystemConfig,
    constellation: Constellation,
    order: int,
    damping: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> float:
    """Matched-decoder rate used to screen the postulated-scale sweep.

    No decoding metric can beat the decoder built on the true posterior, yet
    with discrete inputs the fixed-point system develops a window of
    intermediate scales whose solution crosses that bound; the large-system
    decoupling is not valid there. Points above the ceiling are dropped from
    the supremum. Gaussian inputs never need this (the sweep stays below the
    matched rate for every scale), so they skip the extra solve.
    """
    if constellation.is_gaussian:
        return math.inf
    ceiling = matched_mi(cfg, constellation, order, damping=damping, tol=tol,
                         max_iter=max_iter)
    if not ceiling.converged:
        return math.inf
    return ceiling.rate_nats + _CEILING_TOL


@dataclass
class MismatchedAux:
    """One solved operating point of the mismatched system."""

    s_tilde: float
    xi: float
    eta: float
    eps: float
    eps_tilde: float
    free_energy: float
    converged: bool
    iterations: int

    def residuals(self, cfg: SystemConfig, constellation: Constellation, order: int = DEFAULT_ORDER) -> dict:
        """Absolute violation of the four fixed-point equations."""
        alpha = cfg.alpha
        post = DecoupledPostulated(xi=self.xi, constellation=constellation)
        true = DecoupledTrue(eta=self.eta, r_v=cfg.r_v, constellation=constellation)
        return {
            "xi": abs(self.xi - self.s_tilde / (alpha * (1.0 + self.s_tilde * self.eps_tilde))),
            "eps_tilde": abs(self.eps_tilde - postulated_mmse(post, order)),
            "eta": abs(self.eta - 1.0 / (alpha * (cfg.cw + self.eps))),
            "eps": abs(self.eps - true_mse(true, post, order)),
        }


def seed_grid(scale: float = 1.0) -> np.ndarray:
    """Log-spaced seeds for the s_tilde search, scaled to the problem's noise
    level so the bracket still contains the optimizer at extreme SNR."""
    lo, hi = _SEED_GRID_DECADES
    return np.logspace(lo, hi, _SEED_GRID_POINTS) * scale


def xi_gaussian_closed_form(alpha: float, gamma_bar: float, s_tilde: float) -> float:
    """Positive root of alpha*xi*(1 + s_tilde*gamma_bar/(1+xi*gamma_bar)) = s_tilde
    for Gaussian signaling."""
    if alpha <= 0 or gamma_bar <= 0 or s_tilde <= 0:
        raise ValueError("alpha, gamma_bar, s_tilde must all be positive")
    # positive root of a*xi^2 - t*xi - s_tilde with a = alpha*gamma_bar and
    # t = gamma_bar*s_tilde*(1-alpha) - alpha; pick the quadratic branch that
    # avoids subtracting nearly equal numbers
    a = alpha * gamma_bar
    t = gamma_bar * s_tilde * (1.0 - alpha) - alpha
    root = math.sqrt(4.0 * a * s_tilde + t * t)
    if t >= 0.0:
        return (t + root) / (2.0 * a)
    return 2.0 * s_tilde / (root - t)


def solve_xi_discrete(
    s_tilde: float,
    alpha: float,
    constellation: Constellation,
    order: int = DEFAULT_ORDER,
    damping: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> list[tuple[float, float, int, bool]]:
    """Jointly solve xi = s_tilde/(alpha (1 + s_tilde eps_tilde)) with
    eps_tilde the postulated MMSE at xi.

    Self-contained: neither equation involves the true channel. Returns
    candidate branches (xi, eps_tilde, iterations, converged) from the two
    extreme starts (zero error and prior-only error). Gaussian inputs are
    accepted and use the closed-form MMSE inside the loop, which lets the
    iterative route be checked against xi_gaussian_closed_form.
    """
    gbar = constellation.gamma_bar

    def mmse_at(xi):
        return postulated_mmse(DecoupledPostulated(xi=xi, constellation=constellation), order)

    def F(x):
        xi, et = float(x[0]), float(x[1])
        return np.array([s_tilde / (alpha * (1.0 + s_tilde * et)), mmse_at(max(xi, 1e-300))])

    branches = []
    for et0 in (0.0, gbar):
        x0 = [s_tilde / (alpha * (1.0 + s_tilde * et0)), et0]
        out = damped_fixed_point(F, x0, damping=damping, tol=tol, max_iter=max_iter)
        xi, et = float(out.solution[0]), float(out.solution[1])
        if any(abs(xi - b[0]) <= 1e-8 * (1.0 + xi) and abs(et - b[1]) <= 1e-8 * (1.0 + et) for b in branches):
            continue
        branches.append((xi, et, out.iterations, out.converged))
    return branches


def solve_eta_eps(
    xi: float,
    cfg: SystemConfig,
    constellation: Constellation,
    order: int = DEFAULT_ORDER,
    damping: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> list[tuple[float, float, int, bool]]:
    """Solve eta = 1/(alpha (tr(R_w)/N + eps)) with eps the true mean-square
    error of the xi-denoiser, for the already-solved postulated scale xi.

    Returns candidate branches (eta, eps, iterations, converged). For Gaussian
    signaling eps is affine in 1/eta and the 2x2 system collapses to one
    linear equation, solved exactly.
    """
    alpha, cw, r_v = cfg.alpha, cfg.cw, cfg.r_v
    gbar = constellation.gamma_bar
    if constellation.is_gaussian:
        g = xi * gbar
        A = (gbar + r_v) / (1.0 + g) ** 2
        B = (g / (1.0 + g)) ** 2
        # eps = A + B/eta and 1/eta = alpha(cw + eps); alpha*B < 1 always
        eps = (A + B * alpha * cw) / (1.0 - alpha * B)
        return [(1.0 / (alpha * (cw + eps)), eps, 0, True)]

    post = DecoupledPostulated(xi=xi, constellation=constellation)

    def F(x):
        eps = float(x[0])
        eta = 1.0 / (alpha * (cw + eps))
        true = DecoupledTrue(eta=eta, r_v=r_v, constellation=constellation)
        return np.array([true_mse(true, post, order)])

    branches = []
    for seed in (1e-6, gbar + r_v):
        out = damped_fixed_point(F, [seed], damping=damping, tol=tol, max_iter=max_iter)
        eps = float(out.solution[0])
        if any(abs(eps - b[1]) <= 1e-8 * (1.0 + eps) for b in branches):
            continue
        branches.append((1.0 / (alpha * (cw + eps)), eps, out.iterations, out.converged))
    return branches


def free_energy(aux: MismatchedAux, cfg: SystemConfig, constellation: Constellation,
                order: int = DEFAULT_ORDER) -> float:
    """Replica-symmetric free energy of the white-postulate system at the
    operating point aux, in nats per stream. Among multiple fixed points the
    physical one minimizes this."""
    alpha, r_v = cfg.alpha, cfg.r_v
    s_t, xi, eta, eps, eps_t = aux.s_tilde, aux.xi, aux.eta, aux.eps, aux.eps_tilde
    common = (xi / eta + math.log(s_t) - math.log(alpha * xi)) / alpha - xi * eps
    if constellation.is_gaussian:
        g = xi * constellation.gamma_bar
        return common + math.log1p(g) + xi * r_v / (1.0 + g)
    post = DecoupledPostulated(xi=xi, constellation=constellation)
    true = DecoupledTrue(eta=eta, r_v=r_v, constellation=constellation)
    ce = cross_entropy(true, post, order)
    return common + xi * (xi - eta) * eps_t / eta - (xi / eta + math.log(math.pi / xi) + ce)


def _penalty_white(s_tilde: float, cfg: SystemConfig) -> float:
    return s_tilde * (cfg.cw + cfg.r_v) / cfg.alpha


def gmi_at_s(
    s_tilde: float,
    cfg: SystemConfig,
    constellation: Constellation,
    order: int = DEFAULT_ORDER,
    damping: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> tuple[float, MismatchedAux]:
    """Per-stream GMI in nats at a fixed postulated noise scale s_tilde.

    Runs the two-stage solve (xi, eps_tilde) then (eta, eps), enumerates every
    converged branch combination, and reports the free-energy-minimizing one.
    """
    if s_tilde <= 0:
        raise ValueError(f"s_tilde must be positive, got {s_tilde:g}")
    alpha = cfg.alpha
    gbar = constellation.gamma_bar
    if constellation.is_gaussian:
        xi = xi_gaussian_closed_form(alpha, gbar, s_tilde)
        stage1 = [(xi, gbar / (1.0 + xi * gbar), 0, True)]
    else:
        stage1 = solve_xi_discrete(s_tilde, alpha, constellation, order, damping, tol, max_iter)

    best: Optional[MismatchedAux] = None
    total_iters = 0
    any_converged = False
    for xi, eps_t, it1, conv1 in stage1:
        total_iters += it1
        if xi <= 0:
            continue
        for eta, eps, it2, conv2 in solve_eta_eps(xi, cfg, constellation, order, damping, tol, max_iter):
            total_iters += it2
            cand = MismatchedAux(
                s_tilde=s_tilde, xi=xi, eta=eta, eps=eps, eps_tilde=eps_t,
                free_energy=math.nan, converged=conv1 and conv2, iterations=0,
            )
            cand.free_energy = free_energy(cand, cfg, constellation, order)
            if not math.isfinite(cand.free_energy):
                continue
            if cand.converged:
                any_converged = True
            if best is None or (cand.converged, -cand.free_energy) > (best.converged, -best.free_energy):
                best = cand
    if best is None:
        raise ValueError(f"no usable fixed point at s_tilde={s_tilde:g}")
    best.iterations = total_iters
    best.converged = any_converged
    value = best.free_energy - _penalty_white(s_tilde, cfg)
    return value, best


def gmi(
    cfg: SystemConfig,
    constellation: Constellation,
    order: int = DEFAULT_ORDER,
    refine_tol: float = 1e-6,
    damping: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> RateResult:
    """Per-stream GMI in nats, supremum over the postulated noise scale."""
    cache: dict[float, tuple[float, MismatchedAux]] = {}
    counter = {"iters": 0}
    ceiling = _rate_ceiling(cfg, constellation, order, damping, tol, max_iter)

    def objective(s):
        try:
            val, aux = gmi_at_s(s, cfg, constellation, order, damping, tol, max_iter)
        except ValueError:
            return -math.inf
        cache[s] = (val, aux)
        counter["iters"] += aux.iterations
        if not aux.converged or val > ceiling:
            return -math.inf
        return val

    seeds = seed_grid(1.0 / (cfg.cw + cfg.r_v))
    s_star, val = maximize_scalar(objective, seeds, refine_tol=refine_tol)
    if s_star in cache:
        val, aux = cache[s_star]
    else:
        val, aux = gmi_at_s(s_star, cfg, constellation, order, damping, tol, max_iter)
    return RateResult(
        rate_nats=val,
        params={"eta": aux.eta, "xi": aux.xi, "eps": aux.eps, "eps_tilde": aux.eps_tilde},
        s_tilde=s_star,
        free_energy=aux.free_energy,
        converged=aux.converged,
        iterations=counter["iters"],
    )


def gmi_highsnr_gaussian(alpha: float, kappa: float, refine_tol: float = 1e-6) -> RateResult:
    """Infinite-SNR limit of the Gaussian-signaling GMI, in nats per stream.

    The limit keeps its own scalar optimization over the rescaled noise
    postulate s_gamma; the distortion floor kappa^2 is what keeps it finite.
    """
    if kappa <= 0:
        raise ValueError("high-SNR GMI diverges without transmit distortion (kappa must be > 0)")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha:g}")
    k2 = kappa * kappa

    def xi_g(sg):
        t = sg * (1.0 - alpha) - alpha
        return (t + math.sqrt(4.0 * alpha * sg + t * t)) / (2.0 * alpha)

    def h(sg):
        x = xi_g(sg)
        return math.log(sg / (alpha * x)) / alpha + math.log1p(x) + k2 * x / (1.0 + x) - sg * k2 / alpha

    sg_star, val = maximize_scalar(h, seed_grid(1.0 / k2), refine_tol=refine_tol)
    return RateResult(
        rate_nats=val,
        params={"xi": xi_g(sg_star)},
        s_tilde=sg_star,
        free_energy=None,
        converged=True,
        iterations=0,
    )


# ---------------------------------------------------------------------------
# general postulated-covariance path
# ---------------------------------------------------------------------------

def general_aux_traces(
    R_w: np.ndarray,
    R_tilde: np.ndarray,
    s: float,
    eps: float,
    eps_tilde: float,
    alpha: float,
) -> tuple[float, float]:
    """(eta, xi) from the matrix trace formulas with
    Omega = R_w + eps I and Omega_tilde = R_tilde/s + eps_tilde I."""
    if s <= 0:
        raise ValueError(f"s must be positive, got {s:g}")
    N = R_w.shape[0]
    omega_t = R_tilde / s + eps_tilde * np.eye(N)
    omega = R_w + eps * np.eye(N)
    oti = np.linalg.inv(omega_t)
    tr_oti = float(np.trace(oti).real)
    xi = tr_oti / (alpha * N)
    num = (tr_oti / N) ** 2
    den = float(np.trace(oti @ omega @ oti).real) / N
    eta = num / (alpha * den)
    return eta, xi


def free_energy_general(
    s: float,
    xi: float,
    eta: float,
    eps: float,
    eps_tilde: float,
    cfg: SystemConfig,
    constellation: Constellation,
    R_tilde: np.ndarray,
    order: int = DEFAULT_ORDER,
) -> float:
    """Free energy evaluated through the full matrix form; specializing
    R_tilde to a scaled identity must reproduce free_energy to roundoff."""
    N, alpha = cfg.N, cfg.alpha
    omega_t = R_tilde / s + eps_tilde * np.eye(N)
    omega = cfg.R_w + eps * np.eye(N)
    sign, logdet_ot = np.linalg.slogdet(omega_t)
    if sign.real <= 0:
        raise ValueError("postulated covariance produced a non-positive-definite Omega_tilde")
    _, logdet_rts = np.linalg.slogdet(R_tilde / s)
    matrix_part = (logdet_ot + float(np.trace(np.linalg.solve(omega_t, omega)).real) - logdet_rts) / (alpha * N)
    post = DecoupledPostulated(xi=xi, constellation=constellation)
    true = DecoupledTrue(eta=eta, r_v=cfg.r_v, constellation=constellation)
    ce = cross_entropy(true, post, order)
    return (
        matrix_part
        - (math.log(math.pi / xi) + xi / eta + ce)
        - xi * eps
        + xi * (xi - eta) * eps_tilde / eta
    )


def gmi_at_s_general(
    s: float,
    cfg: SystemConfig,
    constellation: Constellation,
    R_tilde: np.ndarray,
    order: int = DEFAULT_ORDER,
    damping: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> tuple[float, MismatchedAux]:
    """GMI at fixed s for an arbitrary Hermitian postulated covariance."""
    alpha = cfg.alpha
    N = cfg.N

    def mmse_at(xi):
        return postulated_mmse(DecoupledPostulated(xi=xi, constellation=constellation), order)

    def stage1_map(x):
        xi, et = float(x[0]), float(x[1])
        _, xi_new = general_aux_traces(cfg.R_w, R_tilde, s, 0.0, et, alpha)
        return np.array([xi_new, mmse_at(max(xi, 1e-300))])

    gbar = constellation.gamma_bar
    stage1 = []
    for et0 in (0.0, gbar):
        _, xi0 = general_aux_traces(cfg.R_w, R_tilde, s, 0.0, et0, alpha)
        out = damped_fixed_point(stage1_map, [xi0, et0], damping=damping, tol=tol, max_iter=max_iter)
        xi, et = float(out.solution[0]), float(out.solution[1])
        if not any(abs(xi - b[0]) <= 1e-8 * (1.0 + xi) for b in stage1):
            stage1.append((xi, et, out.iterations, out.converged))

    best = None
    total_iters = 0
    for xi, eps_t, it1, conv1 in stage1:
        total_iters += it1
        post = DecoupledPostulated(xi=xi, constellation=constellation)

        def stage2_map(x):
            eps = float(x[0])
            eta, _ = general_aux_traces(cfg.R_w, R_tilde, s, eps, eps_t, alpha)
            true = DecoupledTrue(eta=eta, r_v=cfg.r_v, constellation=constellation)
            return np.array([true_mse(true, post, order)])

        for seed in (1e-6, gbar + cfg.r_v):
            out = damped_fixed_point(stage2_map, [seed], damping=damping, tol=tol, max_iter=max_iter)
            eps = float(out.solution[0])
            total_iters += out.iterations
            eta, _ = general_aux_traces(cfg.R_w, R_tilde, s, eps, eps_t, alpha)
            f = free_energy_general(s, xi, eta, eps, eps_t, cfg, constellation, R_tilde, order)
            if not math.isfinite(f):
                continue
            conv = conv1 and out.converged
            if best is None or (conv, -f) > (best[5], -best[4]):
                best = (xi, eps_t, eta, eps, f, conv)
    if best is None:
        raise ValueError(f"no usable fixed point at s={s:g}")
    xi, eps_t, eta, eps, f, conv = best
    rti = np.linalg.inv(R_tilde)
    penalty = s * (float(np.trace(rti @ cfg.R_w).real) + cfg.r_v * float(np.trace(rti).real)) / cfg.M
    aux = MismatchedAux(s_tilde=s, xi=xi, eta=eta, eps=eps, eps_tilde=eps_t,
                        free_energy=f, converged=conv, iterations=total_iters)
    return f - penalty, aux


def gmi_general(
    cfg: SystemConfig,
    constellation: Constellation,
    R_tilde: np.ndarray,
    order: int = DEFAULT_ORDER,
    refine_tol: float = 1e-6,
) -> RateResult:
    """Supremum of gmi_at_s_general over s. For R_tilde = r I this must agree
    with gmi to the optimizer tolerance regardless of r."""
    R_tilde = np.asarray(R_tilde, dtype=complex)
    eig = np.linalg.eigvalsh(R_tilde)
    if eig[0] <= 0:
        raise ValueError("R_tilde must be Hermitian positive definite")
    scale = float(np.mean(eig).real) / (cfg.cw + cfg.r_v)
    cache: dict[float, tuple[float, MismatchedAux]] = {}
    ceiling = _rate_ceiling(cfg, constellation, order)

    def objective(s):
        try:
            val, aux = gmi_at_s_general(s, cfg, constellation, R_tilde, order)
        except ValueError:
            return -math.inf
        cache[s] = (val, aux)
        if not aux.converged or val > ceiling:
            return -math.inf
        return val

    s_star, val = maximize_scalar(objective, seed_grid(scale), refine_tol=refine_tol)
    val, aux = cache.get(s_star) or gmi_at_s_general(s_star, cfg, constellation, R_tilde, order)
    return RateResult(
        rate_nats=val,
        params={"eta": aux.eta, "xi": aux.xi, "eps": aux.eps, "eps_tilde": aux.eps_tilde},
        s_tilde=s_star,
        free_energy=aux.free_energy,
        converged=aux.converged,
        iterations=aux.iterations,
    )
