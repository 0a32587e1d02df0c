import math

import numpy as np
import pytest

from conftest import random_gaussian_prior
from freemass import tcs
from freemass.errors import ConfigError, DomainError
from freemass.experiment import (
    caves_bound_check,
    build_model,
    build_prior,
    load_config,
    monte_carlo_report,
    parse_config,
    predict,
    predictive_uncertainty_analytic,
    predictive_uncertainty_monte_carlo,
    read_state_csv,
    render_report,
    resolve_tau,
    run_config,
    sweep_contraction,
    sweep_csv,
    write_state_csv,
    write_trial_log,
)
from freemass.grid import Grid, discretize, free_evolve, gaussian_state, quadrature_moments
from freemass.models import ContractiveGLModel, VonNeumannModel, gl_posterior
from freemass.tcs import contraction_time, make_tcs, params_from_xi

ROOT2 = math.sqrt(2.0)


@pytest.fixture(scope="module")
def egrid():
    return Grid(-40.0, 40.0, 4096)


@pytest.fixture(scope="module")
def breach_model(egrid):
    return ContractiveGLModel(ROOT2, 1j, grid=egrid)


@pytest.fixture(scope="module")
def vn_model(egrid):
    return VonNeumannModel(gaussian_state(egrid, sigma=0.5))


CONFIG_TEMPLATE = """\
[system]
mass = 1.0
hbar = 1.0
tau = contraction

[model]
type = contractive_gl
mu = 1.4142135623730951
nu = 0+1j
omega = 1.0

[prior]
type = gaussian
sigma = 1.0
mean = 0.0

[grid]
x_min = -40
x_max = 40
n = 4096

[run]
trials = {trials}
seed = {seed}
readout_bins = 40
"""


class TestPredict:
    def test_contractive_posterior_prediction_is_readout(self, breach_model):
        post = gl_posterior(breach_model, 2.0)
        assert predict(post, 0.9428) == pytest.approx(2.0, abs=1e-9)

    def test_arithmetic(self, egrid):
        state = gaussian_state(egrid, center=1.0, sigma=0.7, momentum=2.0)
        assert predict(state, 0.5) == pytest.approx(2.0, abs=1e-8)

    def test_matches_evolve_then_average(self, vn_model, egrid):
        from freemass.models import vn_posterior
        psi = gaussian_state(egrid, center=0.3, sigma=1.2, momentum=0.4)
        q_bar = float(egrid.points()[2060])
        post = vn_posterior(vn_model, psi, q_bar)
        tau = 0.8
        evolved_mean = quadrature_moments(free_evolve(post, tau)).mean_x
        assert predict(post, tau) == pytest.approx(evolved_mean, abs=1e-8)


class TestAnalyticContractive:
    def test_headline_breach_value(self, breach_model, egrid):
        prior = gaussian_state(egrid, sigma=1.0)
        tau = contraction_time(breach_model.params)
        report = predictive_uncertainty_analytic(breach_model, prior, tau)
        assert report.predictive_variance == pytest.approx(1.0 / 6.0, rel=1e-9)
        assert report.sql_ratio == pytest.approx(1.0 / (4.0 * ROOT2), rel=1e-9)
        assert report.precision_avg == 0.0
        assert report.xi_value == pytest.approx(ROOT2)

    def test_decomposition_identity(self, breach_model, egrid):
        prior = gaussian_state(egrid, sigma=0.7, center=1.0)
        report = predictive_uncertainty_analytic(breach_model, prior, 0.5)
        assert report.predictive_variance == pytest.approx(
            report.precision_avg + report.posterior_variance_avg, abs=1e-12)

    def test_prior_independence(self, breach_model, egrid):
        tau = contraction_time(breach_model.params)
        reports = [
            predictive_uncertainty_analytic(breach_model,
                                            gaussian_state(egrid, c, s), tau)
            for c, s in ((0.0, 1.0), (2.0, 0.4), (-1.5, 2.0))]
        values = [r.predictive_variance for r in reports]
        assert max(values) - min(values) < 1e-9
        assert all(r.prior_independence_dev < 1e-9 for r in reports)

    def test_rejects_nonpositive_tau(self, breach_model, egrid):
        with pytest.raises(DomainError):
            predictive_uncertainty_analytic(
                breach_model, gaussian_state(egrid), 0.0)


class TestAnalyticVonNeumann:
    def test_sql_holds(self, vn_model, egrid):
        for tau in (0.1, 1.0, 10.0):
            report = predictive_uncertainty_analytic(
                vn_model, gaussian_state(egrid, sigma=1.0), tau)
            assert report.sql_ratio >= 1.0 - 1e-6

    def test_precision_term_is_probe_variance(self, vn_model, egrid):
        report = predictive_uncertainty_analytic(
            vn_model, gaussian_state(egrid, sigma=1.0), 1.0)
        assert report.precision_avg == pytest.approx(0.25, abs=1e-9)
        assert report.probe_delta_q == pytest.approx(0.5, abs=1e-9)

    def test_gaussian_closed_form(self, egrid):
        # gaussian prior s0, probe s: posterior variance v = (s0^-2 + s^-2)^-1,
        # momentum variance hbar^2/(4v), no correlation; evolve and add eps^2
        s0, s, tau = 1.0, 0.5, 1.0
        model = VonNeumannModel(gaussian_state(egrid, sigma=s))
        prior = gaussian_state(egrid, sigma=s0)
        v = 1.0 / (1.0 / s0 ** 2 + 1.0 / s ** 2)
        expected = s ** 2 + v + tau ** 2 / (4.0 * v)
        report = predictive_uncertainty_analytic(model, prior, tau)
        assert report.predictive_variance == pytest.approx(expected, rel=1e-9)

    def test_random_suite_respects_sql(self, egrid):
        rng = np.random.default_rng(41)
        for _ in range(8):
            model = VonNeumannModel(
                gaussian_state(egrid, sigma=rng.uniform(0.05, 1.0)))
            prior = random_gaussian_prior(rng, egrid)
            tau = rng.choice([0.1, 1.0, 10.0])
            report = predictive_uncertainty_analytic(model, prior, float(tau))
            assert report.sql_ratio >= 1.0 - 1e-6


class TestMonteCarlo:
    def test_contractive_agrees_with_analytic(self, breach_model, egrid):
        prior = gaussian_state(egrid, sigma=1.0)
        tau = contraction_time(breach_model.params)
        report = monte_carlo_report(breach_model, prior, tau, 20_000, seed=7)
        assert abs(report.mc_predictive_variance - report.predictive_variance) \
            < 4.0 * report.mc_stderr

    def test_von_neumann_agrees_with_analytic(self, vn_model, egrid):
        prior = gaussian_state(egrid, sigma=1.0)
        report = monte_carlo_report(vn_model, prior, 1.0, 2_000, seed=11)
        assert abs(report.mc_predictive_variance - report.predictive_variance) \
            < 4.0 * report.mc_stderr

    def test_deterministic_given_seed(self, breach_model, egrid):
        prior = gaussian_state(egrid, sigma=1.0)
        r1 = monte_carlo_report(breach_model, prior, 0.9, 500, seed=42)
        r2 = monte_carlo_report(breach_model, prior, 0.9, 500, seed=42)
        np.testing.assert_array_equal(r1.second_readouts, r2.second_readouts)
        assert render_report(r1) == render_report(r2)

    def test_different_seed_differs(self, breach_model, egrid):
        prior = gaussian_state(egrid, sigma=1.0)
        r1 = monte_carlo_report(breach_model, prior, 0.9, 500, seed=1)
        r2 = monte_carlo_report(breach_model, prior, 0.9, 500, seed=2)
        assert not np.array_equal(r1.second_readouts, r2.second_readouts)

    def test_stderr_scales_with_trials(self, breach_model, egrid):
        prior = gaussian_state(egrid, sigma=1.0)
        tau = contraction_time(breach_model.params)
        se = [monte_carlo_report(breach_model, prior, tau, n, seed=5).mc_stderr
              for n in (1_000, 10_000)]
        ratio = se[0] / se[1]
        assert math.sqrt(10.0) / 1.5 < ratio < math.sqrt(10.0) * 1.5

    def test_minimum_trials_enforced(self, breach_model, egrid):
        with pytest.raises(DomainError):
            monte_carlo_report(breach_model, gaussian_state(egrid), 1.0, 50, 0)


class TestCavesBound:
    def test_von_neumann_condition_holds(self, vn_model, egrid):
        report = caves_bound_check(vn_model, gaussian_state(egrid, sigma=1.0), 1.0)
        assert report.condition_holds
        assert report.sql_holds
        assert report.min_product_slack >= -1e-9

    def test_contractive_condition_fails_but_commutator_holds(
            self, breach_model, egrid):
        tau = contraction_time(breach_model.params)
        report = caves_bound_check(breach_model,
                                   gaussian_state(egrid, sigma=1.0), tau)
        assert not report.condition_holds
        assert not report.sql_holds
        assert report.precision_sq_avg == 0.0
        assert report.posterior_position_var_avg > 0.0
        assert report.min_product_slack >= -1e-9

    def test_commutator_bound_over_posteriors(self, vn_model, egrid):
        # Dx(0) Dx(tau) >= hbar tau / 2m for every sampled posterior
        for tau in (0.3, 2.0):
            report = caves_bound_check(vn_model,
                                       gaussian_state(egrid, sigma=0.8), tau)
            assert report.min_product_slack >= -1e-9


class TestSweep:
    def test_contraction_rows(self):
        rows = sweep_contraction([0.5, 1.0, 2.0, 5.0, 25.0])
        assert len(rows) == 5
        for row in rows:
            assert row.sql_ratio == pytest.approx(1.0 / (4.0 * row.xi), rel=1e-9)

    def test_csv_shape(self):
        text = sweep_csv(sweep_contraction([1.0, 2.0]))
        lines = text.strip().splitlines()
        assert lines[0] == "xi,tau,predictive_variance,sql_bound,sql_ratio"
        assert len(lines) == 3


class TestConfig:
    def test_parse_and_run_analytic(self):
        config = parse_config(CONFIG_TEMPLATE.format(trials=0, seed=1))
        report = run_config(config)
        assert report.predictive_variance == pytest.approx(1.0 / 6.0, rel=1e-9)
        assert report.trials == 0

    def test_monte_carlo_entry_point(self):
        config = parse_config(CONFIG_TEMPLATE.format(trials=500, seed=3))
        report = predictive_uncertainty_monte_carlo(config)
        assert report.trials == 500
        assert report.rng_algorithm == "philox4x64"

    def test_tau_contraction_resolution(self):
        config = parse_config(CONFIG_TEMPLATE.format(trials=0, seed=1))
        model = build_model(config)
        assert resolve_tau(config, model) == pytest.approx(2.0 * ROOT2 / 3.0)

    def test_malformed_syntax_reports_line(self):
        bad = "[system\nmass = 1\n"
        with pytest.raises(ConfigError) as err:
            parse_config(bad)
        assert "line" in str(err.value).lower()

    def test_bad_value_reports_location(self):
        text = CONFIG_TEMPLATE.format(trials=0, seed=1).replace(
            "mass = 1.0", "mass = -2.0")
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert "mass" in str(err.value)
        assert "line" in str(err.value)

    def test_missing_section(self):
        with pytest.raises(ConfigError):
            parse_config("[system]\nmass = 1\n")

    def test_von_neumann_cannot_use_contraction_tau(self):
        text = CONFIG_TEMPLATE.format(trials=0, seed=1)
        text = text.replace("type = contractive_gl", "type = von_neumann")
        text = text.replace("mu = 1.4142135623730951", "probe_sigma = 0.5")
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_von_neumann_config(self):
        text = CONFIG_TEMPLATE.format(trials=0, seed=1)
        text = text.replace("tau = contraction", "tau = 1.0")
        text = text.replace("type = contractive_gl", "type = von_neumann")
        text = text.replace("mu = 1.4142135623730951", "probe_sigma = 0.5")
        config = parse_config(text)
        report = run_config(config)
        assert report.model == "von_neumann"
        assert report.sql_ratio >= 1.0 - 1e-6

    def test_tcs_prior(self):
        text = CONFIG_TEMPLATE.format(trials=0, seed=1)
        text = text.replace(
            "type = gaussian\nsigma = 1.0\nmean = 0.0",
            "type = tcs\nmu = 1.4142135623730951\nnu = 0+1j\nx0 = 0.5")
        config = parse_config(text)
        prior = build_prior(config)
        assert quadrature_moments(prior).mean_x == pytest.approx(0.5, abs=1e-8)

    def test_file_prior_round_trip(self, tmp_path, egrid):
        state = gaussian_state(egrid, center=0.7, sigma=1.1)
        path = tmp_path / "prior.csv"
        write_state_csv(state, path)
        back = read_state_csv(path, egrid)
        np.testing.assert_allclose(back.amplitudes, state.amplitudes, atol=1e-12)
        text = CONFIG_TEMPLATE.format(trials=0, seed=1).replace(
            "type = gaussian\nsigma = 1.0\nmean = 0.0",
            f"type = file\npath = {path}")
        config = parse_config(text)
        prior = build_prior(config)
        assert quadrature_moments(prior).mean_x == pytest.approx(0.7, abs=1e-8)

    def test_file_prior_grid_mismatch(self, tmp_path, egrid):
        state = gaussian_state(Grid(-20.0, 20.0, 1024), sigma=1.0)
        path = tmp_path / "prior.csv"
        write_state_csv(state, path)
        with pytest.raises(ConfigError):
            read_state_csv(path, egrid)

    def test_load_config_from_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(CONFIG_TEMPLATE.format(trials=0, seed=1))
        config = load_config(path)
        assert config.model_type == "contractive_gl"
        assert len(config.digest()) == 64


class TestReportRendering:
    def test_deterministic_bytes(self):
        config = parse_config(CONFIG_TEMPLATE.format(trials=300, seed=9))
        blobs = []
        for _ in range(2):
            report = run_config(config)
            blobs.append(render_report(report, config.digest()).encode())
        assert blobs[0] == blobs[1]

    def test_twelve_significant_digits(self, breach_model, egrid):
        report = predictive_uncertainty_analytic(
            breach_model, gaussian_state(egrid), contraction_time(breach_model.params))
        text = render_report(report)
        assert "predictive_variance 0.166666666667" in text

    def test_trial_log_columns(self, tmp_path, breach_model, egrid):
        report = monte_carlo_report(breach_model, gaussian_state(egrid),
                                    0.9, 120, seed=2)
        path = tmp_path / "trials.csv"
        write_trial_log(report, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "trial,first_readout,prediction,second_readout,squared_error"
        assert len(lines) == 121
        first = lines[1].split(",")
        assert int(first[0]) == 0
        assert float(first[4]) == pytest.approx(
            (float(first[3]) - float(first[2])) ** 2, rel=1e-9)
