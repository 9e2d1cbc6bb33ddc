"""Finite-size Monte Carlo references for the asymptotic rate formulas.

Everything here averages over explicit channel draws, so the answers carry
sampling error but no large-system assumption. The replica results are
validated against these estimates.

Determinism: channels are drawn in fixed-size blocks, each block from its own
child of one root SeedSequence, and scalar reductions go through math.fsum in
block order. Reruns with the same settings are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .model import Constellation, SystemConfig
from .numerics import maximize_scalar
from .replica_mismatched import seed_grid

__all__ = [
    "McSettings",
    "McResult",
    "sample_channel",
    "mc_gmi_gaussian",
    "mc_mi_matched_gaussian",
    "mc_mi_matched_discrete",
    "LATTICE_LIMIT",
]

_BLOCK = 100

# Exhaustive enumeration of |A|^M candidate vectors; above this it is not a
# sampling problem anymore, it is a memory problem.
LATTICE_LIMIT = 4096


@dataclass(frozen=True)
class McSettings:
    n_channels: int = 10000
    n_noise: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n_channels < 2:
            raise ValueError("n_channels must be at least 2 to report a standard error")
        if self.n_noise < 1:
            raise ValueError(f"n_noise must be positive, got {self.n_noise}")


@dataclass(frozen=True)
class McResult:
    rate_nats: float
    stderr_nats: float
    n_channels: int

    @property
    def rate_bits(self) -> float:
        return self.rate_nats / math.log(2.0)

    @property
    def stderr_bits(self) -> float:
        return self.stderr_nats / math.log(2.0)


def sample_channel(M: int, N: int, rng: np.random.Generator) -> np.ndarray:
    """One N-by-M channel with IID circularly-symmetric complex Gaussian
    entries of variance 1/M."""
    scale = math.sqrt(0.5 / M)
    return scale * (rng.standard_normal((N, M)) + 1j * rng.standard_normal((N, M)))


def _blocks(n: int, seed: int) -> Iterator[tuple[np.random.Generator, int]]:
    n_blocks = (n + _BLOCK - 1) // _BLOCK
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    for i, child in enumerate(children):
        yield np.random.default_rng(child), min(_BLOCK, n - i * _BLOCK)


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    mean = math.fsum(values) / n
    var = math.fsum((values - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def mc_gmi_gaussian(
    cfg: SystemConfig,
    settings: McSettings = McSettings(),
    refine_tol: float = 1e-6,
) -> McResult:
    """Ensemble GMI in nats per stream for Gaussian inputs and a white
    postulated covariance, by direct channel averaging.

    For Gaussian inputs the noise expectations integrate out in closed form,
    leaving log-det and trace functionals of each channel draw. Per draw we
    keep the eigenvalues d of H H^H and the diagonal quadratic forms
    c = diag(U^H R_w U), after which every candidate s costs O(N). The
    supremum over s is taken on the ensemble average.
    """
    M, N = cfg.M, cfg.N
    gbar, r_v = cfg.gamma_bar, cfg.r_v
    d_all = np.empty((settings.n_channels, N))
    c_all = np.empty((settings.n_channels, N))
    row = 0
    for rng, count in _blocks(settings.n_channels, settings.seed):
        for _ in range(count):
            H = sample_channel(M, N, rng)
            d, U = np.linalg.eigh(H @ H.conj().T)
            d_all[row] = np.maximum(d, 0.0)
            c_all[row] = np.einsum("ij,ij->j", U.conj(), cfg.R_w @ U).real
            row += 1

    const = N * (cfg.cw + r_v)

    def per_channel(s: float) -> np.ndarray:
        g = 1.0 + s * gbar * d_all
        logdet = np.sum(np.log(g), axis=1)
        trace = np.sum((c_all + (r_v + gbar) * d_all) / g, axis=1)
        return (logdet + s * (trace - const)) / M

    def objective(s: float) -> float:
        return math.fsum(per_channel(s)) / settings.n_channels

    s_star, _ = maximize_scalar(objective, seed_grid(1.0 / (cfg.cw + r_v)), refine_tol=refine_tol)
    mean, stderr = _mean_stderr(per_channel(s_star))
    return McResult(rate_nats=mean, stderr_nats=stderr, n_channels=settings.n_channels)


def mc_mi_matched_gaussian(cfg: SystemConfig, settings: McSettings = McSettings()) -> McResult:
    """Ergodic matched-decoding rate in nats per stream for Gaussian inputs:
    the difference of two log-dets per channel draw, paired on the same draw
    so their fluctuations mostly cancel."""
    vals = np.empty(settings.n_channels)
    row = 0
    for rng, count in _blocks(settings.n_channels, settings.seed):
        for _ in range(count):
            H = sample_channel(cfg.M, cfg.N, rng)
            G = H @ H.conj().T
            _, top = np.linalg.slogdet(cfg.R_w + (cfg.gamma_bar + cfg.r_v) * G)
            _, bottom = np.linalg.slogdet(cfg.R_w + cfg.r_v * G)
            vals[row] = (top - bottom) / cfg.M
            row += 1
    mean, stderr = _mean_stderr(vals)
    return McResult(rate_nats=mean, stderr_nats=stderr, n_channels=settings.n_channels)


def mc_mi_matched_discrete(
    cfg: SystemConfig,
    constellation: Constellation,
    settings: McSettings = McSettings(),
) -> McResult:
    """Ergodic matched-decoding rate in nats per stream for IID discrete
    inputs, by exhaustive enumeration of the |A|^M symbol vectors.

    Conditioned on H and the sent vector, the decoder statistic depends on
    the noise only through u = Hv + w, whose covariance is the matched
    metric's own matrix Omega = R_w + r_v H H^H. Whitening by the Cholesky
    factor of Omega turns the enumeration into distances between lattice
    points T_a = L^{-1} H x_a with an additive standard-normal offset, and
    rank-one structure reduces each noise draw to an outer difference of a
    single matrix-vector product.
    """
    if constellation.is_gaussian:
        raise ValueError("exhaustive enumeration needs a finite constellation")
    M, N = cfg.M, cfg.N
    K = constellation.size
    if K**M > LATTICE_LIMIT:
        raise ValueError(
            f"candidate lattice has {K}^{M} = {K**M} points, above the limit {LATTICE_LIMIT}"
        )
    points = constellation.points * math.sqrt(cfg.gamma_bar / constellation.gamma_bar)
    grids = np.meshgrid(*([points] * M), indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=1)  # (K^M, M)

    vals = np.empty(settings.n_channels)
    row = 0
    for rng, count in _blocks(settings.n_channels, settings.seed):
        for _ in range(count):
            H = sample_channel(M, N, rng)
            omega = cfg.R_w + cfg.r_v * (H @ H.conj().T)
            L = np.linalg.cholesky(omega)
            T = np.linalg.solve(L, (H @ X.T)).T  # (K^M, N), whitened lattice
            power = np.sum(np.abs(T) ** 2, axis=1)
            gram = (T @ T.conj().T).real
            d2 = power[:, None] + power[None, :] - 2.0 * gram  # |T_a - T_b|^2

            acc = 0.0
            for _ in range(settings.n_noise):
                u = math.sqrt(0.5) * (rng.standard_normal(N) + 1j * rng.standard_normal(N))
                t = (T @ u.conj()).real  # Re <T_a, u>
                # |T_a - T_b + u|^2 = d2[a,b] + 2 t_a - 2 t_b + |u|^2
                scores = -d2 - 2.0 * t[:, None] + 2.0 * t[None, :]
                m = scores.max(axis=1, keepdims=True)
                lse = np.log(np.sum(np.exp(scores - m), axis=1)) + m[:, 0]
                acc += float(np.mean(lse)) - float(np.sum(np.abs(u) ** 2))
            mean_log = acc / settings.n_noise
            vals[row] = (M * math.log(K) - N - mean_log) / M
            row += 1
    mean, stderr = _mean_stderr(vals)
    return McResult(rate_nats=mean, stderr_nats=stderr, n_channels=settings.n_channels)
