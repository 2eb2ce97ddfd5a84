"""
Classical estimation chain: pilot LS, subcarrier interpolation, stacking of
training symbols, reflection-pattern unmixing, (distortion-aware) LMMSE,
the ON/OFF baseline and the NMSE metric.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .channel import ChannelModel
from .errors import (PatternMismatch, ShapeMismatch, SingularPattern,
                     TooFewPilots, ZeroReference)
from .frame import PilotPlan, ReflectionPattern, TrainingFrame
from .linalg import RngStream, solve_hermitian

__all__ = [
    "EffectiveChannelGrid",
    "ChannelEstimate",
    "ls_pilot_estimate",
    "interpolation_matrix",
    "interpolate_subcarriers",
    "stack_training_symbols",
    "unstack_training_symbols",
    "unmix",
    "lmmse_filter",
    "estimate_covariances",
    "estimate_covariance_oracle",
    "onoff_estimate",
    "ls_grid",
    "nmse",
]

PROVENANCE = ("LS_raw", "LS_interp", "LMMSE", "DIP_denoised", "truth")


@dataclass
class EffectiveChannelGrid:
    """Complex ``(N, K, T)`` effective-channel grid of one user."""

    values: np.ndarray
    provenance: str = "LS_interp"

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ShapeMismatch(f"grid must be (N, K, T), got {self.values.shape}")
        if self.provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def shape(self):
        return self.values.shape


@dataclass
class ChannelEstimate:
    """Estimated direct ``(N, K)`` and cascaded ``(N, K, M)`` channels of one user."""

    direct: np.ndarray
    cascade: np.ndarray

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate([self.direct[..., None], self.cascade], axis=-1)

    @classmethod
    def from_stacked(cls, g: np.ndarray) -> "ChannelEstimate":
        return cls(g[..., 0], g[..., 1:])


def ls_pilot_estimate(frame: TrainingFrame, u: int, t: int) -> np.ndarray:
    """Per-pilot LS estimate ``y[p] / x_u[p]`` for ``p`` in the user's comb, ``(N_p, K)``."""
    plan = frame.plan
    return frame.y[t, plan.indices[u], :] / plan.values[u][:, None]


def interpolation_matrix(pilot_idx, N: int, method: str = "linear") -> np.ndarray:
    """
    ``(N, N_p)`` real matrix mapping pilot values to all subcarriers.

    Linear interpolation between neighbouring pilots, constant extension
    beyond the outermost pilots. ``method="cubic"`` uses a not-a-knot cubic
    spline inside the pilot span instead.
    """
    pilot_idx = np.asarray(pilot_idx)
    n_p = pilot_idx.size
    if n_p < 2:
        raise TooFewPilots("interpolation needs at least two pilots")
    n = np.arange(N)
    if method == "linear":
        W = np.zeros((N, n_p))
        pos = np.clip(n, pilot_idx[0], pilot_idx[-1])
        j = np.clip(np.searchsorted(pilot_idx, pos, side="right") - 1, 0, n_p - 2)
        frac = (pos - pilot_idx[j]) / (pilot_idx[j + 1] - pilot_idx[j])
        W[n, j] = 1.0 - frac
        W[n, j + 1] += frac
        return W
    if method == "cubic":
        if n_p < 4:
            raise TooFewPilots("cubic interpolation needs at least four pilots")
        pos = np.clip(n, pilot_idx[0], pilot_idx[-1])
        return CubicSpline(pilot_idx, np.eye(n_p))(pos)
    raise ValueError(f"unknown interpolation method {method!r}")


def interpolate_subcarriers(sparse: np.ndarray, plan: PilotPlan, u: int,
                            method: str = "linear") -> np.ndarray:
    """Interpolate ``(..., N_p, K)`` pilot estimates to ``(..., N, K)``."""
    W = interpolation_matrix(plan.indices[u], plan.n_subcarriers, method)
    return np.einsum("np,...pk->...nk", W, sparse)


def stack_training_symbols(grids, provenance: str = "LS_interp") -> EffectiveChannelGrid:
    """Stack ``T`` per-symbol ``(N, K)`` grids along a trailing symbol axis."""
    grids = list(grids)
    if not grids:
        raise ShapeMismatch("no grids to stack")
    shape = grids[0].shape
    if any(g.shape != shape for g in grids) or len(shape) != 2:
        raise ShapeMismatch("all per-symbol grids must share one (N, K) shape")
    return EffectiveChannelGrid(np.stack(grids, axis=-1), provenance)


def unstack_training_symbols(grid: EffectiveChannelGrid) -> list:
    return [grid.values[..., t] for t in range(grid.shape[-1])]


def unmix(grid: EffectiveChannelGrid, pattern: ReflectionPattern) -> ChannelEstimate:
    """
    Recover ``[D, G]`` from the stacked grid, ``g = h theta^{-1}`` per ``(n, k)``.

    DFT patterns use ``theta^H / (M + 1)`` directly.
    """
    theta = pattern.matrix
    h = grid.values
    if h.shape[-1] != theta.shape[1]:
        raise ShapeMismatch(f"grid has {h.shape[-1]} symbols, pattern {theta.shape[1]}")
    if pattern.kind == "dft":
        g = h @ theta.conj().T / theta.shape[0]
    else:
        if theta.shape[0] != theta.shape[1] or np.linalg.cond(theta) > 1e12:
            raise SingularPattern("reflection pattern is not invertible")
        g = np.linalg.solve(theta.T, h.reshape(-1, h.shape[-1]).T).T.reshape(h.shape)
    return ChannelEstimate.from_stacked(g)


def lmmse_filter(r_ls: np.ndarray, cov: np.ndarray, snr: float, *,
                 kappa_ue: float = 0.0, kappa_bs: float = 0.0,
                 cov_all=None) -> np.ndarray:
    """
    Spatial LMMSE filter ``C Lambda^{-1} r`` over stacks of ``K``-vectors.

    Parameters
    ----------
    r_ls : (..., K) complex
        LS estimates.
    cov : (..., K, K) complex
        Covariance of the wanted user's effective channel.
    snr : float
        Reciprocal noise variance in the units of ``cov``; the noise term
        of ``Lambda`` is ``I / snr``.
    kappa_ue, kappa_bs : float
        Distortion levels. When either is non-zero ``cov_all`` -- the
        covariances of all users, ``(U, ..., K, K)`` -- must be given and
        ``Lambda = C + kappa_ue sum_j C_j + kappa_bs sum_j I o C_j + I / snr``.
    """
    if snr <= 0:
        raise ValueError("snr must be positive")
    K = cov.shape[-1]
    lam = cov + np.eye(K) / snr
    if kappa_ue or kappa_bs:
        if cov_all is None:
            raise ValueError("distortion-aware LMMSE needs the covariances of all users")
        total = np.sum(cov_all, axis=0)
        lam = lam + kappa_ue * total
        lam = lam + kappa_bs * (np.eye(K) * total)
    x = solve_hermitian(lam, r_ls)
    return np.einsum("...ij,...j->...i", cov, x)


def estimate_covariances(model: ChannelModel, n_subcarriers: int,
                         pattern: ReflectionPattern, trials: int,
                         rng: RngStream) -> np.ndarray:
    """
    Monte-Carlo second moments ``E[h h^H]`` of every user's effective channel.

    Fresh channels are drawn ``trials`` times with the training pattern held
    fixed. Returns ``(U, T, N, K, K)``.
    """
    if trials < 100:
        raise ValueError("covariance oracle needs at least 100 trials")
    phi = pattern.phases
    acc = 0.0
    for _ in range(trials):
        real = model.draw(n_subcarriers, rng)
        h = np.einsum("unkm,tm->utnk", real.cascade, phi) + real.direct[:, None]
        acc = acc + np.einsum("utni,utnj->utnij", h, h.conj())
    cov = acc / trials
    return 0.5 * (cov + np.conj(np.swapaxes(cov, -1, -2)))


def estimate_covariance_oracle(model: ChannelModel, n_subcarriers: int,
                               pattern: ReflectionPattern, n: int, t: int,
                               trials: int, rng: RngStream, u: int = 0) -> np.ndarray:
    """Covariance ``C_u(n, t)`` of a single user, subcarrier and symbol."""
    return estimate_covariances(model, n_subcarriers, pattern, trials, rng)[u, t, n]


def ls_grid(frame: TrainingFrame, u: int, *, method: str = "linear",
            cov=None, snr=None, kappa_ue=0.0, kappa_bs=0.0) -> EffectiveChannelGrid:
    """
    Interpolated per-symbol estimates of user ``u``, stacked to ``(N, K, T)``.

    With ``cov`` (all users' ``(U, T, N, K, K)`` covariances) and ``snr``
    given, the LMMSE filter is applied at the pilot tones before
    interpolation.
    """
    plan = frame.plan
    T = frame.pattern.n_symbols
    sparse = np.stack([ls_pilot_estimate(frame, u, t) for t in range(T)])
    provenance = "LS_interp"
    if cov is not None:
        idx = plan.indices[u]
        cov_p = cov[:, :, idx]
        sparse = lmmse_filter(sparse, cov_p[u], snr, kappa_ue=kappa_ue,
                              kappa_bs=kappa_bs, cov_all=cov_p)
        provenance = "LMMSE"
    dense = interpolate_subcarriers(sparse, plan, u, method)
    return EffectiveChannelGrid(np.moveaxis(dense, 0, -1), provenance)


def onoff_estimate(frame: TrainingFrame, u: int, method: str = "linear") -> ChannelEstimate:
    """
    ON/OFF baseline: direct channel from the all-off symbol, each cascade
    column from the symbol where only that sub-surface is on, minus the
    direct estimate.
    """
    if frame.pattern.kind != "onoff":
        raise PatternMismatch(f"expected an ON/OFF pattern, got {frame.pattern.kind!r}")
    grid = ls_grid(frame, u, method=method).values
    d_hat = grid[..., 0]
    g_hat = grid[..., 1:] - d_hat[..., None]
    return ChannelEstimate(d_hat, g_hat)


def nmse(actual, estimated) -> float:
    """``||actual - estimated||^2 / ||actual||^2``; accepts arrays or estimates."""
    a = actual.stacked if isinstance(actual, ChannelEstimate) else np.asarray(actual)
    e = estimated.stacked if isinstance(estimated, ChannelEstimate) else np.asarray(estimated)
    if a.shape != e.shape:
        raise ShapeMismatch(f"shapes differ: {a.shape} vs {e.shape}")
    ref = np.vdot(a, a).real
    if ref <= 0:
        raise ZeroReference("reference channel has zero energy")
    diff = a - e
    return float(np.vdot(diff, diff).real / ref)
