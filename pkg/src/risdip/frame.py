"""
Training-frame construction: comb pilots, reflection patterns, hardware
impairments and the received signal at the BS.
"""

from dataclasses import dataclass, field
from math import gcd

import numpy as np

from .channel import ChannelRealization
from .errors import BadRoot, TooManyUsers
from .linalg import RngStream, dft_matrix

__all__ = [
    "PilotPlan",
    "ReflectionPattern",
    "ImpairmentConfig",
    "TrainingFrame",
    "zadoff_chu",
    "pilot_plan",
    "dft_pattern",
    "onoff_pattern",
    "kappa_from_bits",
    "ris_phase_noise",
    "synth_received",
]


def zadoff_chu(length: int, root: int) -> np.ndarray:
    """Zadoff-Chu sequence of the given length and root index."""
    if gcd(root, length) != 1:
        raise BadRoot(f"root {root} is not coprime with length {length}")
    k = np.arange(length)
    if length % 2 == 0:
        return np.exp(-1j * np.pi * root * k * k / length)
    return np.exp(-1j * np.pi * root * k * (k + 1) / length)


@dataclass(frozen=True)
class PilotPlan:
    """
    Comb pilot allocation.

    ``indices[u]`` are the pilot subcarriers of user ``u`` (0-based users,
    offset ``u`` and spacing ``Delta = N // N_p``); ``values[u]`` the
    unit-modulus pilot symbols sent on them.
    """

    n_subcarriers: int
    n_pilots: int
    n_users: int
    spacing: int
    indices: np.ndarray
    values: np.ndarray

    def tx_symbols(self) -> np.ndarray:
        """Per-user transmitted symbol on every subcarrier, shape ``(U, N)``."""
        x = np.zeros((self.n_users, self.n_subcarriers), dtype=complex)
        for u in range(self.n_users):
            x[u, self.indices[u]] = self.values[u]
        return x


def pilot_plan(N: int, n_pilots: int, n_users: int, zc_root: int = 1) -> PilotPlan:
    spacing = N // n_pilots
    if n_pilots < 1 or spacing < 1:
        raise ValueError("need 1 <= n_pilots <= N")
    if n_users > spacing:
        raise TooManyUsers(f"{n_users} users do not fit a comb with spacing {spacing}")
    seq = zadoff_chu(n_pilots, zc_root)
    idx = np.array([np.arange(n_pilots) * spacing + u for u in range(n_users)])
    vals = np.tile(seq, (n_users, 1))
    return PilotPlan(N, n_pilots, n_users, spacing, idx, vals)


@dataclass(frozen=True)
class ReflectionPattern:
    """
    Reflection states over the training phase.

    ``matrix`` is ``(M + 1) x T``; column ``t`` is ``[1, phi^(t)]``. The
    leading row carries the direct path.
    """

    matrix: np.ndarray
    kind: str

    @property
    def n_symbols(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_subsurfaces(self) -> int:
        return self.matrix.shape[0] - 1

    @property
    def phases(self) -> np.ndarray:
        """RIS reflection vector per symbol, shape ``(T, M)``."""
        return self.matrix[1:].T


def dft_pattern(n_subsurfaces: int) -> ReflectionPattern:
    return ReflectionPattern(dft_matrix(n_subsurfaces + 1), "dft")


def onoff_pattern(n_subsurfaces: int) -> ReflectionPattern:
    """Symbol 0 with every sub-surface off, symbol ``m`` with only ``m`` on."""
    M = n_subsurfaces
    mat = np.zeros((M + 1, M + 1), dtype=complex)
    mat[0, :] = 1.0
    mat[1:, 1:] = np.eye(M)
    return ReflectionPattern(mat, "onoff")


def kappa_from_bits(b: int) -> float:
    """Distortion proportionality of a ``b``-bit converter, ``2^-2b / (1 - 2^-2b)``."""
    if b < 1:
        raise ValueError("b must be >= 1")
    q = 2.0 ** (-2 * b)
    return q / (1.0 - q)


@dataclass(frozen=True)
class ImpairmentConfig:
    """
    Transceiver distortion and RIS phase noise.

    ``phase_noise`` is the half-width ``delta`` of the uniform phase error
    ``[-delta, delta)``; ``phase_noise_mode`` selects a fresh draw per
    training symbol (``"symbol"``) or one draw for the whole frame
    (``"frame"``). ``ue_scope`` chooses whether UE distortion occupies the
    whole band (``"band"``) or only that user's pilot comb (``"comb"``).
    """

    kappa_ue: float = 0.0
    kappa_bs: float = 0.0
    phase_noise: float = 0.0
    phase_noise_mode: str = "symbol"
    ue_scope: str = "band"
    tx_power: float = 1.0

    def __post_init__(self):
        if self.kappa_ue < 0 or self.kappa_bs < 0:
            raise ValueError("kappa must be non-negative")
        if not 0 <= self.phase_noise <= np.pi:
            raise ValueError("phase noise bound must lie in [0, pi]")
        if self.phase_noise_mode not in ("symbol", "frame"):
            raise ValueError(f"unknown phase_noise_mode {self.phase_noise_mode!r}")
        if self.ue_scope not in ("band", "comb"):
            raise ValueError(f"unknown ue_scope {self.ue_scope!r}")

    @classmethod
    def from_bits(cls, b: int, **kw) -> "ImpairmentConfig":
        k = kappa_from_bits(b)
        return cls(kappa_ue=k, kappa_bs=k, **kw)

    @property
    def enabled(self) -> bool:
        return self.kappa_ue > 0 or self.kappa_bs > 0 or self.phase_noise > 0


def ris_phase_noise(phi: np.ndarray, delta: float, rng: RngStream) -> np.ndarray:
    """``phi * exp(-j dphi)`` with ``dphi`` i.i.d. uniform on ``[-delta, delta)``."""
    phi = np.asarray(phi)
    dphi = delta * (2.0 * rng.uniform(0.0, 1.0, phi.shape) - 1.0)
    return phi * np.exp(-1j * dphi)


@dataclass
class TrainingFrame:
    """
    Received training symbols and the ground truth they were built from.

    ``y`` has shape ``(T, N, K)``. ``h_actual`` holds the effective channel
    each user actually experienced, ``(U, T, N, K)``, including any RIS
    phase noise.
    """

    y: np.ndarray
    plan: PilotPlan
    pattern: ReflectionPattern
    noise_var: float
    impairments: ImpairmentConfig
    h_actual: np.ndarray = field(repr=False)


def synth_received(realization: ChannelRealization, plan: PilotPlan,
                   pattern: ReflectionPattern, noise_var: float,
                   impairments: ImpairmentConfig, rng: RngStream) -> TrainingFrame:
    """
    Received signal over the ``T`` training symbols.

    ``y[t, n] = sum_u (x_u[n] + eta_u[t, n]) H_u^(t)[n] + eta_BS[t, n] + v[t, n]``.

    All random components are drawn from ``rng`` in a fixed order whether
    or not they are enabled, so two calls with equally seeded streams see
    the same underlying draws; impairment levels only rescale them.
    """
    if noise_var < 0:
        raise ValueError("noise variance must be >= 0")
    U, N, K, M = realization.cascade.shape
    if pattern.n_subsurfaces != M:
        raise ValueError(f"pattern has {pattern.n_subsurfaces} sub-surfaces, channel {M}")
    if plan.n_users != U or plan.n_subcarriers != N:
        raise ValueError("pilot plan does not match the realization")
    T = pattern.n_symbols
    imp = impairments

    unif = rng.uniform(0.0, 1.0, (T, M))
    awgn = rng.complex_normal((T, N, K))
    ue_draw = rng.complex_normal((U, T, N))
    bs_draw = rng.complex_normal((T, N, K))

    phi = pattern.phases
    if imp.phase_noise > 0:
        dphi = imp.phase_noise * (2.0 * unif - 1.0)
        if imp.phase_noise_mode == "frame":
            dphi = np.broadcast_to(dphi[:1], dphi.shape)
        phi = phi * np.exp(-1j * dphi)

    h = np.einsum("unkm,tm->utnk", realization.cascade, phi) + realization.direct[:, None]

    x = plan.tx_symbols()
    tx = np.broadcast_to(x[:, None, :], (U, T, N)).astype(complex)
    if imp.kappa_ue > 0:
        eta = np.sqrt(imp.kappa_ue * imp.tx_power) * ue_draw
        if imp.ue_scope == "comb":
            eta = eta * (np.abs(x) > 0)[:, None, :]
        tx = tx + eta
    y = np.einsum("utn,utnk->tnk", tx, h)
    if imp.kappa_bs > 0:
        if imp.ue_scope == "comb":
            power = np.einsum("un,utnk->tnk", np.abs(x) ** 2, np.abs(h) ** 2)
        else:
            power = (np.abs(h) ** 2).sum(axis=0)
        y = y + np.sqrt(imp.kappa_bs * imp.tx_power * power) * bs_draw
    if noise_var > 0:
        y = y + np.sqrt(noise_var) * awgn
    return TrainingFrame(y, plan, pattern, float(noise_var), imp, h)
