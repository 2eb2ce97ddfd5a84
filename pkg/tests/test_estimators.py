from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from risdip.channel import ChannelModel
from risdip.errors import (PatternMismatch, ShapeMismatch, SingularPattern, TooFewPilots,
                           ZeroReference)
from risdip.estimators import (ChannelEstimate, EffectiveChannelGrid, estimate_covariances,
                               interpolate_subcarriers, interpolation_matrix, lmmse_filter,
                               ls_grid, ls_pilot_estimate, nmse, onoff_estimate,
                               stack_training_symbols, unmix, unstack_training_symbols)
from risdip.frame import (ImpairmentConfig, ReflectionPattern, dft_pattern, onoff_pattern,
                          pilot_plan, synth_received)
from risdip.linalg import RngStream


@settings(max_examples=50, deadline=None)
@given(N=st.integers(4, 40), data=st.data())
def test_linear_interpolation_matches_np_interp(N, data):
    idx = sorted(data.draw(st.sets(st.integers(0, N - 1), min_size=2, max_size=N)))
    W = interpolation_matrix(np.array(idx), N)
    vals = np.random.default_rng(N).standard_normal(len(idx))
    np.testing.assert_allclose(W @ vals, np.interp(np.arange(N), idx, vals), atol=1e-12)
    np.testing.assert_allclose(W.sum(axis=1), 1.0)


def test_cubic_interpolation_reproduces_cubics():
    idx = np.arange(1, 32, 4)
    W = interpolation_matrix(idx, 32, "cubic")
    f = lambda x: 0.3 * x ** 3 - x ** 2 + 2 * x - 5
    n = np.arange(idx[0], idx[-1] + 1)
    np.testing.assert_allclose((W @ f(idx))[n], f(n), rtol=1e-9)
    # constant extension outside the pilot span
    assert (W @ f(idx))[0] == pytest.approx(f(idx[0]))
    assert (W @ f(idx))[31] == pytest.approx(f(idx[-1]))


def test_interpolation_errors():
    with pytest.raises(TooFewPilots):
        interpolation_matrix([3], 8)
    with pytest.raises(TooFewPilots):
        interpolation_matrix([0, 2, 4], 8, "cubic")
    with pytest.raises(ValueError):
        interpolation_matrix([0, 4], 8, "sinc")


def test_interpolate_subcarriers_batches():
    plan = pilot_plan(16, 4, 2)
    sparse = np.random.default_rng(0).standard_normal((3, 4, 5))
    out = interpolate_subcarriers(sparse, plan, 1)
    assert out.shape == (3, 16, 5)
    np.testing.assert_allclose(out[:, plan.indices[1]], sparse)


def test_stack_roundtrip():
    grids = [np.full((4, 2), t, dtype=complex) for t in range(3)]
    g = stack_training_symbols(grids)
    assert g.shape == (4, 2, 3)
    for a, b in zip(unstack_training_symbols(g), grids):
        np.testing.assert_array_equal(a, b)
    with pytest.raises(ShapeMismatch):
        stack_training_symbols([np.zeros((4, 2)), np.zeros((3, 2))])
    with pytest.raises(ShapeMismatch):
        EffectiveChannelGrid(np.zeros((4, 2)))


@pytest.mark.parametrize("pattern", [dft_pattern(4), onoff_pattern(4)])
def test_unmix_inverts_mixing(pattern):
    g = np.random.default_rng(1)
    D = g.standard_normal((6, 3, 5)) + 1j * g.standard_normal((6, 3, 5))
    h = D @ pattern.matrix
    est = unmix(EffectiveChannelGrid(h), pattern)
    np.testing.assert_allclose(est.stacked, D, atol=1e-12)


def test_unmix_errors():
    bad = ReflectionPattern(np.ones((3, 3), dtype=complex), "custom")
    with pytest.raises(SingularPattern):
        unmix(EffectiveChannelGrid(np.ones((2, 2, 3))), bad)
    with pytest.raises(ShapeMismatch):
        unmix(EffectiveChannelGrid(np.ones((2, 2, 4))), dft_pattern(4))


def test_lmmse_scalar_and_identity():
    assert lmmse_filter(np.array([1.0]), np.array([[1.0]]), 1.0)[0] == 0.5
    C = np.diag([2.0, 1.0]).astype(complex)
    out = lmmse_filter(np.array([1.0, 1.0]), C, 1e15)
    np.testing.assert_allclose(out, [1.0, 1.0], rtol=1e-12)
    with pytest.raises(ValueError):
        lmmse_filter(np.ones(1), np.eye(1), 0.0)
    with pytest.raises(ValueError):
        lmmse_filter(np.ones(1), np.eye(1), 1.0, kappa_ue=0.1)


def test_distortion_aware_lmmse_against_direct_formula():
    g = np.random.default_rng(2)
    covs = []
    for _ in range(3):
        A = g.standard_normal((3, 3)) + 1j * g.standard_normal((3, 3))
        covs.append(A @ A.conj().T)
    covs = np.stack(covs)
    r = g.standard_normal(3) + 1j * g.standard_normal(3)
    ku, kb, snr = 0.02, 0.05, 4.0
    lam = covs[1] + ku * covs.sum(0) + kb * np.diag(np.diag(covs.sum(0))) + np.eye(3) / snr
    ref = covs[1] @ np.linalg.inv(lam) @ r
    out = lmmse_filter(r, covs[1], snr, kappa_ue=ku, kappa_bs=kb, cov_all=covs)
    np.testing.assert_allclose(out, ref, atol=1e-12)
    plain = lmmse_filter(r, covs[1], snr)
    zero = lmmse_filter(r, covs[1], snr, kappa_ue=0.0, kappa_bs=0.0, cov_all=covs)
    np.testing.assert_array_equal(plain, zero)


def test_lmmse_mse_matches_theory():
    # Gaussian prior and noise: empirical MSE equals tr(C - C (C + s I)^-1 C)
    g = np.random.default_rng(3)
    A = g.standard_normal((4, 4)) + 1j * g.standard_normal((4, 4))
    C = A @ A.conj().T / 4
    s = 0.5
    rs = RngStream(0)
    h = rs.complex_normal((20_000, 4)) @ np.linalg.cholesky(C).T
    r = h + np.sqrt(s) * rs.complex_normal((20_000, 4))
    est = lmmse_filter(r, np.broadcast_to(C, (20_000, 4, 4)), 1 / s)
    mse = np.mean(np.sum(np.abs(h - est) ** 2, axis=1))
    theory = np.trace(C - C @ np.linalg.inv(C + s * np.eye(4)) @ C).real
    assert mse == pytest.approx(theory, rel=0.03)
    assert mse < np.mean(np.sum(np.abs(h - r) ** 2, axis=1))


def test_ls_exact_without_noise(small_model):
    real = small_model.draw(8, RngStream(0))
    plan, pat = pilot_plan(8, 4, 2), dft_pattern(4)
    fr = synth_received(real, plan, pat, 0.0, ImpairmentConfig(), RngStream(1))
    for u in range(2):
        for t in range(5):
            np.testing.assert_allclose(ls_pilot_estimate(fr, u, t),
                                       fr.h_actual[u, t][plan.indices[u]], atol=1e-18)


def test_full_comb_recovers_channel(small_geometry):
    geo = replace(small_geometry, d_h=(52.0,), d_v=(2.0,))
    real = ChannelModel(geo, (2, 1, 1)).draw(8, RngStream(0))
    plan, pat = pilot_plan(8, 8, 1), dft_pattern(4)
    fr = synth_received(real, plan, pat, 0.0, ImpairmentConfig(), RngStream(1))
    est = unmix(ls_grid(fr, 0), pat)
    assert nmse(real.stacked(0), est) < 1e-20


def test_onoff_estimate(small_model):
    real = small_model.draw(8, RngStream(0))
    plan = pilot_plan(8, 4, 2)
    fr = synth_received(real, plan, onoff_pattern(4), 0.0, ImpairmentConfig(), RngStream(1))
    est = onoff_estimate(fr, 0)
    grid = ls_grid(fr, 0).values
    np.testing.assert_allclose(est.direct, grid[..., 0])
    np.testing.assert_allclose(est.cascade, grid[..., 1:] - grid[..., :1])
    fr_dft = synth_received(real, plan, dft_pattern(4), 0.0, ImpairmentConfig(), RngStream(1))
    with pytest.raises(PatternMismatch):
        onoff_estimate(fr_dft, 0)
    # equal to the generic unmixing for the ON/OFF matrix
    np.testing.assert_allclose(est.stacked, unmix(ls_grid(fr, 0), fr.pattern).stacked, atol=1e-20)


def test_covariance_oracle_matches_analytic(small_model):
    pat = dft_pattern(4)
    cov = estimate_covariances(small_model, 4, pat, 1500, RngStream(5))
    assert cov.shape == (2, 5, 4, 4, 4)
    for t in (0, 3):
        ref = small_model.analytic_covariance(1, pat.phases[t])
        S = cov[1, t].mean(axis=0)
        assert np.linalg.norm(S - ref) / np.linalg.norm(ref) < 0.06
    np.testing.assert_allclose(cov, np.conj(np.swapaxes(cov, -1, -2)))
    with pytest.raises(ValueError):
        estimate_covariances(small_model, 4, pat, 10, RngStream(5))


def test_nmse():
    a = np.array([3.0, 4.0j])
    assert nmse(a, a) == 0.0
    assert nmse(a, np.zeros(2)) == 1.0
    assert nmse(a, np.array([3.0, 0.0])) == pytest.approx(16 / 25)
    est = ChannelEstimate(np.ones((2, 1)), np.ones((2, 1, 3)))
    assert nmse(est, est) == 0.0
    with pytest.raises(ZeroReference):
        nmse(np.zeros(2), a)
    with pytest.raises(ShapeMismatch):
        nmse(a, np.zeros(3))
