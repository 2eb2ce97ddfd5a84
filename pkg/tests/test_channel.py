import numpy as np
import pytest

from risdip.channel import (ChannelModel, PathlossModel, ScenarioGeometry, aggregate_subsurfaces,
                            bs_correlation, draw_link_taps, effective_channel,
                            element_positions, freq_response, pathloss_linear,
                            ris_correlation, subsurface_groups)
from risdip.errors import InvalidDistance, NonUnitModulus
from risdip.linalg import RngStream


def test_pathloss_values():
    # 32.4 + 21 log10(50) + 20 log10(6) = 83.6412 dB
    assert pathloss_linear(50.0, "ris_bs", 6.0) == pytest.approx(10 ** (-8.364121), rel=1e-5)
    # 32.4 + 31.9 log10(52) + 20 log10(6) = 102.7017 dB
    assert pathloss_linear(52.0, "direct", 6.0) == pytest.approx(10 ** (-10.270175), rel=1e-5)
    custom = PathlossModel(intercept=30.0, ris_slope=20.0)
    assert pathloss_linear(10.0, "ue_ris", 1.0, custom) == pytest.approx(1e-5)


def test_pathloss_rejects_short_distance():
    with pytest.raises(InvalidDistance):
        pathloss_linear(0.5, "direct", 6.0)
    with pytest.raises(ValueError):
        pathloss_linear(10.0, "bogus", 6.0)


def test_geometry_distances():
    g = ScenarioGeometry()
    assert g.ue_bs_distance(0) == pytest.approx(np.hypot(52, 2))
    assert g.ue_ris_distance(1) == pytest.approx(np.hypot(3, 3))
    assert g.ris_bs_distance == 50.0


def test_bs_correlation_toeplitz():
    C = bs_correlation(5, 0.7)
    for i in range(5):
        for j in range(5):
            assert C[i, j] == pytest.approx(0.7 ** abs(i - j))


def test_ris_correlation_sinc():
    g = ScenarioGeometry(n_elements=9, n_subsurfaces=3)
    C = ris_correlation(g)
    pos = element_positions(9, 0.5)
    for a in range(9):
        for b in range(9):
            d = np.linalg.norm(pos[a] - pos[b])
            ref = 1.0 if d == 0 else np.sin(2 * np.pi * d) / (2 * np.pi * d)
            assert C[a, b].real == pytest.approx(ref, abs=1e-15)
    # half-wavelength neighbours are uncorrelated, exactly
    assert C[0, 1] == 0 and C[0, 3] == 0 and C[0, 2] == 0
    assert np.linalg.eigvalsh(C).min() > 0


@pytest.mark.parametrize("n_el, M, shape", [(225, 15, (3, 5)), (16, 4, (2, 2)), (16, 8, (1, 2)),
                                            (36, 4, (3, 3))])
def test_subsurface_groups_tile(n_el, M, shape):
    groups = subsurface_groups(n_el, M)
    assert len(groups) == M
    flat = np.concatenate(groups)
    assert sorted(flat) == list(range(n_el))
    side = int(np.sqrt(n_el))
    for g in groups:
        rows, cols = np.divmod(g, side)
        assert (rows.max() - rows.min() + 1, cols.max() - cols.min() + 1) == shape


def test_freq_response_against_loop():
    g = np.random.default_rng(0)
    taps = g.standard_normal((3, 4)) + 1j * g.standard_normal((3, 4))
    N = 8
    H = freq_response(taps, N)
    for n in range(N):
        ref = sum(taps[l] * np.exp(-2j * np.pi * n * l / N) for l in range(3))
        np.testing.assert_allclose(H[n], ref, atol=1e-12)
    with pytest.raises(ValueError):
        freq_response(taps, 2)


def test_cascade_against_brute_force(small_model):
    real = small_model.draw(8, RngStream(3, 0))
    u = 1
    N, K, M = real.cascade.shape[1:]
    for n in range(N):
        for k in range(K):
            for m, grp in enumerate(real.groups):
                ref = sum(real.ris_bs[u, n, k, e] * real.ue_ris[u, n, e] for e in grp)
                assert real.cascade[u, n, k, m] == pytest.approx(ref, abs=1e-18)
    np.testing.assert_allclose(aggregate_subsurfaces(real.element_cascade(u), real.groups),
                               real.cascade[u])


def test_effective_channel(small_model):
    real = small_model.draw(8, RngStream(3, 0))
    phi = np.exp(1j * np.array([0.1, 2.0, -1.0, 3.0]))
    H = effective_channel(real, 0, phi)
    ref = np.einsum("nkm,m->nk", real.cascade[0], phi) + real.direct[0]
    np.testing.assert_allclose(H, ref)
    np.testing.assert_allclose(effective_channel(real, 0, np.zeros(4)), real.direct[0])
    with pytest.raises(NonUnitModulus):
        effective_channel(real, 0, np.array([1.0, 0.5, 1.0, 1.0]))


def test_draw_is_deterministic(small_model):
    a = small_model.draw(8, RngStream(5, 2))
    b = small_model.draw(8, RngStream(5, 2))
    np.testing.assert_array_equal(a.cascade, b.cascade)
    np.testing.assert_array_equal(a.direct, b.direct)


def test_direct_tap_covariance(rng):
    C = bs_correlation(4, 0.7)
    beta, L, n = 2.0, 3, 40_000
    taps = draw_link_taps("direct", beta, L, rng, c_rx=C).taps
    assert taps.shape == (L + 1, 4)
    z = np.concatenate([draw_link_taps("direct", beta, L, rng, c_rx=C).taps for _ in range(n // 4)])
    S = z.T @ z.conj() / len(z)
    ref = beta / (L + 1) * C
    assert np.linalg.norm(S - ref) / np.linalg.norm(ref) < 0.03


def test_ris_bs_tap_covariance(rng):
    Cr, Ct = bs_correlation(3, 0.5), bs_correlation(2, 0.3)
    Z = np.stack([draw_link_taps("ris_bs", 1.0, 0, rng, c_rx=Cr, c_tx=Ct).taps[0]
                  for _ in range(20_000)])
    vec = Z.reshape(len(Z), -1)  # row-major vec: index (i, j)
    S = vec.T @ vec.conj() / len(vec)
    # E[vec(A) vec(A)^H] of A = Cr^1/2 Z Ct^1/2 is kron(Cr, Ct^T) for row-major vec
    ref = np.kron(Cr, Ct.T)
    assert np.linalg.norm(S - ref) / np.linalg.norm(ref) < 0.05


def test_analytic_covariance_matches_monte_carlo(small_model):
    phi = np.exp(2j * np.pi * np.arange(4) / 5)
    rng = RngStream(11, 0)
    acc = 0
    n = 3000
    for _ in range(n):
        h = effective_channel(small_model.draw(4, rng), 0, phi)
        acc = acc + np.einsum("ni,nj->ij", h, h.conj()) / 4
    S = acc / n
    ref = small_model.analytic_covariance(0, phi)
    assert np.linalg.norm(S - ref) / np.linalg.norm(ref) < 0.06


def test_expected_power_is_pattern_average(small_model):
    from risdip.frame import dft_pattern
    phases = dft_pattern(4).phases
    avg = np.mean([small_model.analytic_covariance(0, p)[0, 0].real for p in phases])
    assert small_model.expected_power(0) == pytest.approx(avg, rel=1e-12)


def test_subsurface_level_model(small_geometry):
    m = ChannelModel(small_geometry, taps=(1, 0, 0), ris_level="subsurface")
    real = m.draw(4, RngStream(0))
    assert real.cascade.shape == (2, 4, 4, 4)
    assert m.c_ris.shape == (4, 4)
