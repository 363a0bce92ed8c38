import numpy as np
import pytest
from numpy.testing import assert_allclose

from rssbounds.bounds import (CONDITION_LIMIT, bienayme_bound, bound_report, bound_sweep,
                              crlb_rmse, fisher, fisher_independent, mean_jacobian)
from rssbounds.correlation import (CorrelationKernel, build_covariance, effective_count,
                                   mean_correlation)
from rssbounds.errors import RankDeficiencyError, SingularCovarianceError
from rssbounds.geometry import SetupConfig, perimeter_positions
from rssbounds.propagation import DEFAULT_PARAMS, PropagationParams

from conftest import fd_column_error


def test_jacobian_hand_values():
    # Blind at the origin, one reference at (1, 0), eta = 3.36:
    # d/dx = -b (0 - 1) / 1 = +b with b = 33.6 / ln 10; the eta column
    # vanishes because ln(1) = 0.
    jac = mean_jacobian(DEFAULT_PARAMS, np.array([[1.0, 0.0]]), (0.0, 0.0))
    b = 10 * 3.36 / np.log(10)
    assert_allclose(jac[0], [b, 0.0, 1.0, 0.0], atol=1e-12)
    assert jac[0, 0] == pytest.approx(14.5923, abs=1e-4)


def test_jacobian_p_r0_column_is_one(positions_2400):
    jac = mean_jacobian(DEFAULT_PARAMS, positions_2400[:50], (0.0, 0.0))
    assert_allclose(jac[:, 2], 1.0, rtol=0)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(17)
    cfg = SetupConfig().with_density(0.5)
    positions = perimeter_positions(cfg)
    for _ in range(10):
        params = PropagationParams(
            p_r0=rng.uniform(-40, 0), eta=rng.uniform(1.5, 5.0),
            sigma_db=1.0, r0=rng.uniform(0.5, 2.0))
        blind = (rng.uniform(-0.8, 1.8), rng.uniform(-1.8, 0.8))
        assert fd_column_error(params, positions, blind) <= 1e-6


def test_fisher_identity_covariance_equals_independent_path():
    cfg = SetupConfig().with_density(1.0)
    jac = mean_jacobian(DEFAULT_PARAMS, perimeter_positions(cfg), (0.0, 0.0))
    sigma = DEFAULT_PARAMS.sigma_db
    via_cov = fisher(jac, sigma**2 * np.eye(len(jac)))
    direct = fisher_independent(jac, sigma)
    assert_allclose(via_cov.matrix, direct.matrix, rtol=1e-10)
    assert_allclose(direct.matrix, jac.T @ jac / sigma**2, rtol=1e-12)
    assert not via_cov.regularized


def test_fisher_is_psd(positions_2400):
    jac = mean_jacobian(DEFAULT_PARAMS, positions_2400[:300], (0.0, 0.0))
    fim = fisher_independent(jac, 1.68)
    w = np.linalg.eigvalsh(fim.matrix)
    assert w.min() >= -1e-12 * w.max()
    assert np.array_equal(fim.matrix, fim.matrix.T)


def test_two_measurements_leave_fisher_rank_deficient():
    jac = mean_jacobian(DEFAULT_PARAMS, np.array([[1.0, 0.0], [0.0, 2.0]]), (0.0, 0.0))
    fim = fisher_independent(jac, 1.0)
    assert np.linalg.matrix_rank(fim.matrix) <= 2
    with pytest.raises(RankDeficiencyError):
        crlb_rmse(fim)


def test_duplicating_measurements_doubles_information():
    cfg = SetupConfig().with_density(0.5)
    jac = mean_jacobian(DEFAULT_PARAMS, perimeter_positions(cfg), (0.0, 0.0))
    single = fisher_independent(jac, 1.68)
    doubled = fisher_independent(np.vstack([jac, jac]), 1.68)
    assert_allclose(doubled.matrix, 2.0 * single.matrix, rtol=1e-12)


def test_scaling_fisher_by_four_halves_the_bound():
    cfg = SetupConfig().with_density(1.0)
    jac = mean_jacobian(DEFAULT_PARAMS, perimeter_positions(cfg), (0.0, 0.0))
    fim = fisher_independent(jac, 1.68)
    scaled = type(fim)(matrix=4.0 * fim.matrix)
    assert crlb_rmse(scaled) == pytest.approx(crlb_rmse(fim) / 2.0, rel=1e-12)


def test_inverse_sqrt_n_scaling(default_cfg, params):
    # Quadrupling the sampling density halves the independent-noise bound.
    values = {}
    for n in (600, 1200, 2400):
        cfg = default_cfg.with_density(n / (default_cfg.perimeter / default_cfg.wavelength))
        jac = mean_jacobian(params, perimeter_positions(cfg), cfg.blind_position)
        values[n] = crlb_rmse(fisher_independent(jac, params.sigma_db))
    assert values[2400] / values[600] == pytest.approx(0.5, rel=0.01)
    assert values[1200] / values[600] == pytest.approx(1 / np.sqrt(2), rel=0.01)
    assert values[2400] / values[1200] == pytest.approx(1 / np.sqrt(2), rel=0.01)


def test_monotone_information():
    # Adding an independent measurement never increases the bound.
    cfg = SetupConfig().with_density(0.5)
    positions = perimeter_positions(cfg)
    jac = mean_jacobian(DEFAULT_PARAMS, positions, (0.0, 0.0))
    bound_full = crlb_rmse(fisher_independent(jac, 1.68))
    bound_less = crlb_rmse(fisher_independent(jac[:-1], 1.68))
    assert bound_full <= bound_less + 1e-15


def test_bienayme_reduces_to_crlb_without_correlation():
    cfg = SetupConfig().with_density(1.0)
    jac = mean_jacobian(DEFAULT_PARAMS, perimeter_positions(cfg), (0.0, 0.0))
    fim = fisher_independent(jac, 1.68)
    n = len(jac)
    assert bienayme_bound(fim, n, effective_count(n, 0.0)) == pytest.approx(crlb_rmse(fim))


def test_effective_count_positions_match_bienayme(default_cfg, params, positions_2400, sinc2_kernel):
    # Keeping only n_eff ~ 191 equally spaced positions gives practically the
    # same bound as the corrected bound at the full 2400.
    rho_bar = mean_correlation(sinc2_kernel, positions_2400)
    n_eff = effective_count(2400, rho_bar)
    jac_full = mean_jacobian(params, positions_2400, default_cfg.blind_position)
    corrected = bienayme_bound(fisher_independent(jac_full, params.sigma_db), 2400, n_eff)
    cfg_eff = default_cfg.with_density(round(n_eff) / (default_cfg.perimeter / default_cfg.wavelength))
    jac_eff = mean_jacobian(params, perimeter_positions(cfg_eff), default_cfg.blind_position)
    independent = crlb_rmse(fisher_independent(jac_eff, params.sigma_db))
    assert abs(independent - corrected) < 0.002


def test_bound_report_independent_kernel(default_cfg, params):
    report = bound_report(default_cfg.with_density(2.0), params, CorrelationKernel.independent())
    assert report.rho_bar == 0.0
    assert report.n_eff == report.n
    assert report.rmse_bienayme == report.rmse_crlb_indep
    assert report.rmse_crlb_correlated == report.rmse_crlb_indep
    assert not report.degenerate
    assert report.condition_number == 1.0


def test_bound_sweep_correlated_vs_corrected(default_cfg, params, sinc2_kernel, exp_kernel):
    densities = [0.2, 0.5, 1.0, 2.0]
    for kernel in (sinc2_kernel, exp_kernel):
        for report in bound_sweep(default_cfg, params, kernel, densities):
            assert not report.degenerate
            assert abs(report.rmse_bienayme - report.rmse_crlb_correlated) < 1e-3


def test_bound_sweep_degenerate_beyond_nyquist(default_cfg, params, sinc2_kernel):
    report = bound_report(default_cfg.with_density(8.0), params, sinc2_kernel)
    assert report.degenerate
    assert report.rmse_crlb_correlated is None
    assert report.condition_number > CONDITION_LIMIT


def test_fisher_singular_covariance_paths(default_cfg, params, sinc2_kernel):
    cfg = default_cfg.with_density(8.0)
    positions = perimeter_positions(cfg)
    cov = build_covariance(sinc2_kernel, positions, params.sigma_db)
    jac = mean_jacobian(params, positions, cfg.blind_position)
    with pytest.raises(SingularCovarianceError):
        fisher(jac, cov)
    fim = fisher(jac, cov, allow_singular=True)
    assert fim.regularized
    assert np.all(np.isfinite(fim.matrix))


def test_bienayme_plateau_between_nyquist_and_oversampled(default_cfg, params, sinc2_kernel):
    at_2 = bound_report(default_cfg.with_density(2.0), params, sinc2_kernel)
    at_25 = bound_report(default_cfg.with_density(25.0), params, sinc2_kernel)
    assert at_25.rmse_bienayme == pytest.approx(at_2.rmse_bienayme, rel=0.05)
    # while the uncorrected bound keeps falling like 1/sqrt(n)
    assert at_25.rmse_crlb_indep < 0.4 * at_2.rmse_crlb_indep


def test_full_trace_variant_is_larger(default_cfg, params):
    cfg = default_cfg.with_density(1.0)
    jac = mean_jacobian(params, perimeter_positions(cfg), cfg.blind_position)
    fim = fisher_independent(jac, params.sigma_db)
    assert crlb_rmse(fim, full_trace=True) > crlb_rmse(fim)


def test_jacobian_rejects_zero_distance():
    with pytest.raises(ValueError):
        mean_jacobian(DEFAULT_PARAMS, np.array([[0.0, 0.0]]), (0.0, 0.0))
