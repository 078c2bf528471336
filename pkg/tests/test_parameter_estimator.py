"""
Tests for the closed-form parameter extraction.
"""
import numpy as np
import pytest

from coarray.coarray_pipeline import closed_form_factors, dirichlet_steering, exact_model_covariance, process_covariance
from coarray.cp_decomposition import FactorSet, TalsConfig, match_factors, tals
from coarray.emvs_model import SceneConfig, spatial_response
from coarray.errors import IllConditionedError, ShapeError
from coarray.parameter_estimator import (
    build_gamma,
    estimate_all,
    estimate_elevations,
    extract_angles_and_polarization,
    polarization_from_response,
    reconstruct_spatial_response,
)


@pytest.fixture
def model_factors(transmit_array, receive_array, make_targets):
    cfg = SceneConfig(transmit_array, receive_array, make_targets(4), noiseless=True)
    return cfg, FactorSet(*closed_form_factors(cfg))


class TestGamma:
    """Selection matrices for the beamspace rotation invariance."""

    def test_shapes_and_pattern(self):
        gamma = build_gamma(5)
        assert gamma.g1.shape == (4, 5)
        assert np.count_nonzero(gamma.g2[0]) == 1
        assert gamma.g1[0, 0] == 1.0
        np.testing.assert_allclose(gamma.g1[2, 3], np.cos(3 * np.pi / 5))
        np.testing.assert_allclose(gamma.g2[2, 3], np.sin(3 * np.pi / 5))
        assert gamma.g1[2, 0] == 0.0

    def test_rotation_identity(self, rng):
        """tan(π sinθ/2) Γ1 â(θ) = Γ2 â(θ)."""
        gamma = build_gamma(29)
        for theta in rng.uniform(0, 1.4, size=50):
            a = dirichlet_steering(29, theta)
            np.testing.assert_allclose(np.tan(np.pi * np.sin(theta) / 2) * gamma.g1 @ a, gamma.g2 @ a, atol=1e-9)

    def test_too_few_beams(self):
        with pytest.raises(ShapeError):
            build_gamma(1)


class TestElevations:

    def test_from_model_factors(self, model_factors):
        cfg, factors = model_factors
        np.testing.assert_allclose(estimate_elevations(factors.c_t, 29), cfg.parameter_matrix()[0], atol=1e-8)
        np.testing.assert_allclose(estimate_elevations(factors.c_r, 35), cfg.parameter_matrix()[4], atol=1e-8)

    def test_follows_column_order(self, model_factors):
        cfg, factors = model_factors
        perm = [3, 1, 0, 2]
        got = estimate_elevations(factors.c_t[:, perm], 29)
        np.testing.assert_allclose(got, cfg.parameter_matrix()[0, perm], atol=1e-8)

    def test_too_many_columns(self):
        with pytest.raises(IllConditionedError):
            estimate_elevations(np.ones((18, 13)), 3)

    def test_rank_deficient(self):
        with pytest.raises(IllConditionedError):
            estimate_elevations(np.ones((18, 2)), 3)

    def test_non_finite_eigenvalues(self, model_factors, monkeypatch):
        _, factors = model_factors
        monkeypatch.setattr(
            "coarray.parameter_estimator._elevation_eigenvalues",
            lambda c, m: np.array([0.5, np.nan, 0.1, 0.2], dtype=complex),
        )
        with pytest.raises(IllConditionedError):
            estimate_elevations(factors.c_t, 29)

    def test_large_eigenvalues_stay_in_range(self, model_factors, monkeypatch):
        _, factors = model_factors
        monkeypatch.setattr(
            "coarray.parameter_estimator._elevation_eigenvalues",
            lambda c, m: np.array([1e300, -1e300, 0.0, 1.0], dtype=complex),
        )
        got = estimate_elevations(factors.c_t, 29)
        np.testing.assert_allclose(got, [np.pi / 2, -np.pi / 2, 0.0, np.arcsin(0.5)], atol=1e-12)


class TestSpatialResponse:

    def test_block_mean_recovers_q(self, model_factors):
        cfg, factors = model_factors
        params = cfg.parameter_matrix()
        q = reconstruct_spatial_response(factors.c_t, 29)
        for k in range(cfg.k):
            np.testing.assert_allclose(q[:, k], spatial_response(*params[:4, k]).q, atol=1e-10)

    def test_bad_shape(self):
        with pytest.raises(ShapeError):
            reconstruct_spatial_response(np.ones((17, 2)), 3)

    def test_polarization_round_trip(self, rng):
        for theta, phi, gamma, eta in rng.uniform(0.1, 1.4, size=(30, 4)):
            q = spatial_response(theta, phi, gamma, eta).q
            got = polarization_from_response(q, theta, phi)
            np.testing.assert_allclose(got, (gamma, eta), atol=1e-10)

    def test_scaled_response(self):
        q = (0.3 - 2j) * spatial_response(0.5, 0.7, 0.9, 0.4).q
        np.testing.assert_allclose(extract_angles_and_polarization(q), (0.5, 0.7, 0.9, 0.4), atol=1e-10)

    def test_external_elevation_used(self):
        q = spatial_response(0.5, 0.7, 0.9, 0.4).q
        assert extract_angles_and_polarization(q, theta=0.5000001)[0] == 0.5000001


class TestEstimateAll:
    """Paired estimates, record k from column k of both factors."""

    def test_model_factors_exact(self, model_factors):
        cfg, factors = model_factors
        est = estimate_all(factors, 29, 35)
        assert est.ok and len(est) == 4
        np.testing.assert_allclose(est.parameter_matrix(), cfg.parameter_matrix(), atol=1e-8)

    def test_scaling_invariance(self, model_factors):
        cfg, factors = model_factors
        alpha = np.array([1 + 1j, -2.0, 0.5j, 3 - 1j])
        scaled = FactorSet(factors.c_t * alpha, factors.c_r / alpha, factors.q_kron)
        np.testing.assert_allclose(estimate_all(scaled, 29, 35).parameter_matrix(), cfg.parameter_matrix(), atol=1e-8)

    def test_degenerate_column_is_isolated(self, model_factors):
        """A column whose electric part vanishes fails alone."""
        cfg, factors = model_factors
        c_t = factors.c_t.copy()
        for m in range(29):
            c_t[6 * m:6 * m + 3, 1] = 0.0
        est = estimate_all(FactorSet(c_t, factors.c_r, factors.q_kron), 29, 35)
        assert not est.records[1].ok
        assert est.records[1].category == "degenerate_response"
        assert [r.ok for r in est.records] == [True, False, True, True]
        np.testing.assert_allclose(est.records[2].angles(), cfg.parameter_matrix()[:, 2], atol=1e-8)

    def test_noiseless_tals_end_to_end(self, three_target_config):
        cfg = three_target_config.replace(noiseless=True)
        out = process_covariance(exact_model_covariance(cfg), cfg.transmit, cfg.receive)
        factors = tals(out.r5, TalsConfig(k=3, tol=1e-12, max_iter=2000, restarts=3))
        perm, _ = match_factors(factors, FactorSet(*closed_form_factors(cfg)))
        est = estimate_all(factors.permuted(perm), out.m_tilde, out.n_tilde)
        assert est.ok
        err_deg = np.rad2deg(np.abs(est.parameter_matrix() - cfg.parameter_matrix()))
        assert err_deg.max() < 1e-3
