"""
Correlated Rayleigh channel synthesis for the RIS-assisted uplink.

Three links per user are drawn in the delay domain -- UE-BS (direct),
UE-RIS and RIS-BS -- each as ``L + 1`` spatially correlated taps with a
uniform power-delay profile. The frequency responses are combined into the
element-level cascade ``B[n] diag(q[n])`` and then summed over the elements
of each sub-surface, giving the ``K x M`` cascaded channel per subcarrier.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidDistance, NonUnitModulus
from .linalg import RngStream, hermitian_sqrt

__all__ = [
    "ScenarioGeometry",
    "PathlossModel",
    "LinkTaps",
    "ChannelRealization",
    "ChannelModel",
    "pathloss_linear",
    "bs_correlation",
    "ris_correlation",
    "subsurface_groups",
    "draw_link_taps",
    "freq_response",
    "assemble_realization",
    "effective_channel",
]

LINK_KINDS = ("direct", "ue_ris", "ris_bs")


@dataclass(frozen=True)
class ScenarioGeometry:
    """
    Deployment geometry and array sizes.

    Distances are in metres; ``d0`` is the BS-RIS horizontal distance and
    ``d_h``/``d_v`` hold one entry per user.
    """

    d0: float = 50.0
    d_h: tuple = (52.0, 53.0, 51.0, 52.0)
    d_v: tuple = (2.0, 3.0, 2.0, 3.0)
    carrier_ghz: float = 6.0
    n_antennas: int = 32
    n_elements: int = 225
    n_subsurfaces: int = 15
    element_spacing: float = 0.5

    def __post_init__(self):
        if len(self.d_h) != len(self.d_v):
            raise ValueError("d_h and d_v must have one entry per user")
        if self.n_elements % self.n_subsurfaces:
            raise ValueError("n_subsurfaces must divide n_elements")
        if self.d0 <= 0 or any(d <= 0 for d in (*self.d_h, *self.d_v)):
            raise InvalidDistance("all distances must be positive")

    @property
    def n_users(self) -> int:
        return len(self.d_h)

    def ue_bs_distance(self, u: int) -> float:
        return float(np.hypot(self.d_h[u], self.d_v[u]))

    def ue_ris_distance(self, u: int) -> float:
        return float(np.hypot(self.d_h[u] - self.d0, self.d_v[u]))

    @property
    def ris_bs_distance(self) -> float:
        return float(self.d0)


@dataclass(frozen=True)
class PathlossModel:
    """UMi-style log-distance pathloss, ``PL = a + b log10(d) + c log10(f)``."""

    intercept: float = 32.4
    ris_slope: float = 21.0
    direct_slope: float = 31.9
    freq_slope: float = 20.0


def pathloss_linear(distance: float, link_kind: str, carrier_ghz: float,
                    model: PathlossModel = PathlossModel()) -> float:
    """
    Linear power gain of a link.

    RIS-side links (``ue_ris``, ``ris_bs``) use the LOS slope, the direct
    link the NLOS slope.
    """
    if distance < 1:
        raise InvalidDistance(f"distance {distance} m is below 1 m")
    if link_kind not in LINK_KINDS:
        raise ValueError(f"unknown link kind {link_kind!r}")
    slope = model.direct_slope if link_kind == "direct" else model.ris_slope
    pl_db = (model.intercept + slope * np.log10(distance)
             + model.freq_slope * np.log10(carrier_ghz))
    return float(10.0 ** (-pl_db / 10.0))


def bs_correlation(K: int, r: float) -> np.ndarray:
    """Exponential (Toeplitz) correlation, entry ``(i, j) = r**|i - j|``."""
    if not 0 <= r < 1:
        raise ValueError("correlation factor must lie in [0, 1)")
    idx = np.arange(K)
    return (r ** np.abs(idx[:, None] - idx[None, :])).astype(complex)


def _grid_side(n_elements: int) -> int:
    side = int(round(np.sqrt(n_elements)))
    if side * side != n_elements:
        raise ValueError(f"{n_elements} elements do not form a square grid")
    return side


def element_positions(n_elements: int, spacing: float = 0.5) -> np.ndarray:
    """Row-major ``(n_elements, 2)`` element coordinates in wavelengths."""
    side = _grid_side(n_elements)
    rows, cols = np.divmod(np.arange(n_elements), side)
    return np.stack([rows, cols], axis=1) * spacing


def _sinc_correlation(positions: np.ndarray) -> np.ndarray:
    dist = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=-1)
    # np.sinc(x) = sin(pi x) / (pi x); distances are already in wavelengths
    arg = 2.0 * dist
    c = np.sinc(arg)
    # sin(pi k) is not exactly 0 in floating point; pin the zeros
    c[(arg > 0) & (arg == np.round(arg))] = 0.0
    return c.astype(complex)


def ris_correlation(geometry: ScenarioGeometry) -> np.ndarray:
    """Isotropic-scattering sinc correlation over all RIS elements."""
    pos = element_positions(geometry.n_elements, geometry.element_spacing)
    return _sinc_correlation(pos)


def subsurface_groups(n_elements: int, n_subsurfaces: int) -> list:
    """
    Partition a square element grid into equal rectangular tiles.

    The most compact tile shape (rows <= cols) that divides the grid side
    in both directions is used, e.g. 3 x 5 tiles for 225 elements and 15
    sub-surfaces. Returns one index array per sub-surface, row-major over
    the tile grid.
    """
    side = _grid_side(n_elements)
    if n_elements % n_subsurfaces:
        raise ValueError("n_subsurfaces must divide n_elements")
    size = n_elements // n_subsurfaces
    shapes = [(a, size // a) for a in range(1, size + 1)
              if size % a == 0 and side % a == 0 and side % (size // a) == 0]
    shapes = [s for s in shapes if s[0] <= s[1]]
    if not shapes:
        raise ValueError(f"cannot tile a {side}x{side} grid into {n_subsurfaces} rectangles")
    a, b = min(shapes, key=lambda s: s[1] - s[0])
    grid = np.arange(n_elements).reshape(side, side)
    groups = []
    for r0 in range(0, side, a):
        for c0 in range(0, side, b):
            groups.append(grid[r0:r0 + a, c0:c0 + b].ravel())
    return groups


@dataclass
class LinkTaps:
    """Delay-domain taps of one link, stacked along axis 0."""

    kind: str
    taps: np.ndarray

    @property
    def n_taps(self) -> int:
        return self.taps.shape[0]


def draw_link_taps(link_kind: str, beta: float, L: int, rng: RngStream,
                   c_rx=None, c_tx=None, *, rx_sqrt=None, tx_sqrt=None) -> LinkTaps:
    """
    Draw ``L + 1`` correlated Rayleigh taps of a link.

    Tap ``l`` is ``sqrt(beta / (L+1)) * C_rx^{1/2} Z_l C_tx^{1/2}`` for the
    RIS-BS matrix link and ``sqrt(beta / (L+1)) * C^{1/2} z_l`` for the
    vector links. Square roots may be passed precomputed via ``rx_sqrt`` /
    ``tx_sqrt`` to skip the eigendecomposition.
    """
    if L < 0:
        raise ValueError("L must be >= 0")
    if rx_sqrt is None:
        rx_sqrt = hermitian_sqrt(c_rx)
    scale = np.sqrt(beta / (L + 1))
    n_rx = rx_sqrt.shape[0]
    if link_kind in ("direct", "ue_ris"):
        z = rng.complex_normal((L + 1, n_rx))
        taps = scale * z @ rx_sqrt.T
    elif link_kind == "ris_bs":
        if tx_sqrt is None:
            tx_sqrt = hermitian_sqrt(c_tx)
        z = rng.complex_normal((L + 1, n_rx, tx_sqrt.shape[0]))
        taps = scale * (rx_sqrt @ z @ tx_sqrt)
    else:
        raise ValueError(f"unknown link kind {link_kind!r}")
    return LinkTaps(link_kind, taps)


def freq_response(taps, N: int) -> np.ndarray:
    """
    Frequency response ``sum_l tap_l exp(-j 2 pi n l / N)`` for every ``n``.

    Accepts a :class:`LinkTaps` or a raw array with taps along axis 0; the
    result has the subcarrier index on axis 0.
    """
    arr = taps.taps if isinstance(taps, LinkTaps) else np.asarray(taps)
    n_taps = arr.shape[0]
    if N < n_taps:
        raise ValueError(f"N={N} is smaller than the tap count {n_taps}")
    phase = np.outer(np.arange(N), np.arange(n_taps)) % N
    E = np.exp(-2j * np.pi * phase / N)
    return np.tensordot(E, arr, axes=(1, 0))


@dataclass
class ChannelRealization:
    """
    Ground truth for one coherence block.

    Attributes
    ----------
    direct : (U, N, K) complex
        Direct UE-BS frequency responses ``D_u``.
    cascade : (U, N, K, M) complex
        Sub-surface cascaded channels ``G_u``.
    ue_ris : (U, N, Me) complex
        Element-level UE-RIS responses ``Q_u``.
    ris_bs : (U, N, K, Me) complex
        Element-level RIS-BS responses ``B_u``.
    groups : list of index arrays
        Elements belonging to each sub-surface.
    """

    direct: np.ndarray
    cascade: np.ndarray
    ue_ris: np.ndarray
    ris_bs: np.ndarray
    groups: list

    @property
    def n_users(self):
        return self.direct.shape[0]

    @property
    def n_subsurfaces(self):
        return self.cascade.shape[-1]

    def stacked(self, u: int) -> np.ndarray:
        """``[D_u, G_u]`` as an ``(N, K, M + 1)`` array."""
        return np.concatenate([self.direct[u][..., None], self.cascade[u]], axis=-1)

    def element_cascade(self, u: int) -> np.ndarray:
        """``B[n] diag(q[n])`` for every subcarrier, shape ``(N, K, Me)``."""
        return self.ris_bs[u] * self.ue_ris[u][:, None, :]


def aggregate_subsurfaces(element_cascade: np.ndarray, groups) -> np.ndarray:
    """Sum element columns within each sub-surface (last axis)."""
    return np.stack([element_cascade[..., g].sum(axis=-1) for g in groups], axis=-1)


class ChannelModel:
    """
    Channel statistics for a fixed scenario.

    Holds the correlation matrices (and their square roots), the
    sub-surface grouping and per-user pathloss so that each realization
    only costs the Gaussian draws.

    Parameters
    ----------
    geometry : ScenarioGeometry
    taps : tuple of int
        ``(L_d, L_q, L_b)``; each link has ``L + 1`` taps.
    bs_corr : float
        Toeplitz correlation factor at the BS.
    ris_level : {"element", "subsurface"}
        Draw RIS links per physical element and aggregate, or directly per
        sub-surface using sinc correlation between tile centroids.
    pathloss : PathlossModel
    beta_override : dict, optional
        Fixed linear gain per link kind, replacing the pathloss formula.
    """

    def __init__(self, geometry: ScenarioGeometry, taps=(6, 2, 5), bs_corr=0.7,
                 ris_level="element", pathloss=PathlossModel(), beta_override=None):
        if ris_level not in ("element", "subsurface"):
            raise ValueError(f"unknown ris_level {ris_level!r}")
        self.geometry = geometry
        self.taps = tuple(int(t) for t in taps)
        self.bs_corr = bs_corr
        self.ris_level = ris_level
        self.pathloss = pathloss
        self.beta_override = dict(beta_override or {})

        g = geometry
        self.c_bs = bs_correlation(g.n_antennas, bs_corr)
        element_groups = subsurface_groups(g.n_elements, g.n_subsurfaces)
        if ris_level == "element":
            self.c_ris = ris_correlation(g)
            self.groups = element_groups
        else:
            pos = element_positions(g.n_elements, g.element_spacing)
            centroids = np.stack([pos[idx].mean(axis=0) for idx in element_groups])
            self.c_ris = _sinc_correlation(centroids)
            self.groups = [np.array([m]) for m in range(g.n_subsurfaces)]
        self.bs_sqrt = hermitian_sqrt(self.c_bs)
        self.ris_sqrt = hermitian_sqrt(self.c_ris)

    def beta(self, u: int, link_kind: str) -> float:
        if link_kind in self.beta_override:
            return float(self.beta_override[link_kind])
        g = self.geometry
        dist = {"direct": g.ue_bs_distance(u),
                "ue_ris": g.ue_ris_distance(u),
                "ris_bs": g.ris_bs_distance}[link_kind]
        return pathloss_linear(dist, link_kind, g.carrier_ghz, self.pathloss)

    @cached_property
    def subsurface_coupling(self) -> np.ndarray:
        """``W[m, m'] = sum over e in S_m, e' in S_m' of |C_ris[e, e']|^2``."""
        c2 = np.abs(self.c_ris) ** 2
        return np.array([[c2[np.ix_(a, b)].sum() for b in self.groups] for a in self.groups])

    def analytic_covariance(self, u: int, phi: np.ndarray) -> np.ndarray:
        """
        Exact ``E[h h^H]`` of the effective channel at any subcarrier.

        With independent links the covariance factorises as
        ``C_bs * (beta_d + beta_q beta_b phi^T W conj(phi))``.
        """
        phi = np.asarray(phi)
        scale = (self.beta(u, "direct") + self.beta(u, "ue_ris") * self.beta(u, "ris_bs")
                 * np.real(phi @ self.subsurface_coupling @ phi.conj()))
        return scale * self.c_bs

    def expected_power(self, u: int) -> float:
        """Per-entry effective-channel power averaged over a DFT training pattern."""
        W = self.subsurface_coupling
        return float(self.beta(u, "direct")
                     + self.beta(u, "ue_ris") * self.beta(u, "ris_bs") * np.trace(W))

    def draw(self, n_subcarriers: int, rng: RngStream) -> ChannelRealization:
        return assemble_realization(self, n_subcarriers, rng)


def assemble_realization(model: ChannelModel, n_subcarriers: int,
                         rng: RngStream) -> ChannelRealization:
    """Draw all links of all users and build the frequency-domain channels."""
    L_d, L_q, L_b = model.taps
    direct, cascade, ue_ris, ris_bs = [], [], [], []
    for u in range(model.geometry.n_users):
        a_d = draw_link_taps("direct", model.beta(u, "direct"), L_d, rng, rx_sqrt=model.bs_sqrt)
        a_q = draw_link_taps("ue_ris", model.beta(u, "ue_ris"), L_q, rng, rx_sqrt=model.ris_sqrt)
        a_b = draw_link_taps("ris_bs", model.beta(u, "ris_bs"), L_b, rng,
                             rx_sqrt=model.bs_sqrt, tx_sqrt=model.ris_sqrt)
        d = freq_response(a_d, n_subcarriers)
        q = freq_response(a_q, n_subcarriers)
        b = freq_response(a_b, n_subcarriers)
        direct.append(d)
        ue_ris.append(q)
        ris_bs.append(b)
        cascade.append(aggregate_subsurfaces(b * q[:, None, :], model.groups))
    return ChannelRealization(np.stack(direct), np.stack(cascade),
                              np.stack(ue_ris), np.stack(ris_bs), model.groups)


def effective_channel(realization: ChannelRealization, u: int, phi) -> np.ndarray:
    """
    ``H_u[n] = G_u[n] phi + d_u[n]`` for every subcarrier.

    Entries of ``phi`` must have unit modulus, or be exactly zero for a
    switched-off sub-surface.
    """
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != (realization.n_subsurfaces,):
        raise ValueError(f"phi must have length {realization.n_subsurfaces}")
    mod = np.abs(phi)
    if np.any((mod != 0) & (np.abs(mod - 1.0) > 1e-9)):
        raise NonUnitModulus("reflection coefficients must have unit modulus")
    return realization.cascade[u] @ phi + realization.direct[u]
