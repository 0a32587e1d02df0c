import math

import numpy as np
import pytest

from conftest import random_gaussian_prior, two_peak_state
from freemass import models
from freemass.errors import (
    CompletenessViolation,
    DomainError,
    GridTooNarrow,
    NormalizationViolation,
    NotContractive,
    ZeroProbabilityReadout,
)
from freemass.grid import (
    Grid,
    GridState,
    discretize,
    free_evolve,
    gaussian_state,
    quadrature_moments,
)
from freemass.models import (
    ContractiveGLModel,
    ExactPositionEffect,
    GordonLouisellModel,
    SmearedPositionEffect,
    VonNeumannModel,
    check_unbiasedness,
    contractive_interaction,
    gl_posterior,
    gl_probability,
    interaction_posterior,
    interaction_readout_density,
    noise_kernel,
    precision,
    readout_moment_table,
    resolution,
    vn_joint_state,
    vn_posterior,
    vn_probability,
)
from freemass.tcs import make_tcs, moments, recenter, wavefunction_at

ROOT2 = math.sqrt(2.0)


@pytest.fixture(scope="module")
def mgrid():
    return Grid(-20.0, 20.0, 1024)


@pytest.fixture(scope="module")
def vn_model(mgrid):
    return VonNeumannModel(gaussian_state(mgrid, sigma=0.1))


@pytest.fixture(scope="module")
def contractive_model(mgrid):
    return ContractiveGLModel(ROOT2, 1j, grid=mgrid)


@pytest.fixture(scope="module")
def prior(mgrid):
    return gaussian_state(mgrid, center=0.4, sigma=0.9)


class TestModelConstruction:
    def test_centered_probe_flag(self, vn_model):
        assert vn_model.coupling_checked

    def test_shifted_probe_flag(self, mgrid):
        model = VonNeumannModel(gaussian_state(mgrid, center=0.3, sigma=0.1))
        assert not model.coupling_checked

    def test_unnormalized_probe_rejected(self, mgrid):
        raw = gaussian_state(mgrid, sigma=0.1)
        bad = GridState(mgrid, 2.0 * raw.amplitudes)
        with pytest.raises(NormalizationViolation):
            VonNeumannModel(bad)

    def test_delta_q(self, vn_model):
        assert vn_model.delta_q == pytest.approx(0.1, abs=1e-9)

    def test_contractive_requires_positive_twist(self, mgrid):
        with pytest.raises(NotContractive):
            ContractiveGLModel(ROOT2, -1j, grid=mgrid)
        with pytest.raises(NotContractive):
            ContractiveGLModel(1.0, 0.0, grid=mgrid)


class TestVnJointState:
    def test_marginal_over_probe_coordinate(self, vn_model, prior, mgrid):
        joint = vn_joint_state(vn_model, prior)
        x = mgrid.points()
        marginal = np.empty(mgrid.n)
        for start in range(0, mgrid.n, 256):
            xs = x[start:start + 256, None]
            marginal[start:start + 256] = np.sum(
                np.abs(joint(xs, x[None, :])) ** 2, axis=1) * mgrid.dx
        np.testing.assert_allclose(marginal, prior.density(), atol=1e-10)

    def test_readout_mean_equals_position_mean(self, vn_model, prior, mgrid):
        joint = vn_joint_state(vn_model, prior)
        x = mgrid.points()
        q_mean = 0.0
        for start in range(0, mgrid.n, 256):
            xs = x[start:start + 256, None]
            q_mean += np.sum(x[None, :] * np.abs(joint(xs, x[None, :])) ** 2) \
                * mgrid.dx ** 2
        assert q_mean == pytest.approx(quadrature_moments(prior).mean_x, abs=1e-8)

    def test_narrow_probe_concentrates_on_diagonal(self, mgrid, prior):
        model = VonNeumannModel(gaussian_state(mgrid, sigma=0.05))
        joint = vn_joint_state(model, prior)
        assert abs(joint(0.4, 0.4)) ** 2 > 100.0 * abs(joint(0.4, 1.4)) ** 2


class TestVnProbability:
    def test_delta_limit(self, mgrid, prior):
        model = VonNeumannModel(gaussian_state(mgrid, sigma=0.02))
        density = vn_probability(model, prior)
        assert np.max(np.abs(density - prior.density())) < 2e-3

    def test_variance_additivity(self, vn_model, mgrid):
        psi = gaussian_state(mgrid, sigma=math.sqrt(0.5))
        density = vn_probability(vn_model, psi)
        x = mgrid.points()
        mean = np.sum(x * density) * mgrid.dx
        var = np.sum((x - mean) ** 2 * density) * mgrid.dx
        assert var == pytest.approx(0.51, abs=1e-6)

    def test_total_integral(self, vn_model, prior, mgrid):
        density = vn_probability(vn_model, prior)
        assert np.sum(density) * mgrid.dx == pytest.approx(1.0, abs=1e-9)

    def test_mass_escape_guard(self, mgrid):
        small = Grid(-2.0, 2.0, 64)
        psi = gaussian_state(small, sigma=0.2)
        model = VonNeumannModel(gaussian_state(mgrid, sigma=1.5))
        with pytest.raises(GridTooNarrow):
            vn_probability(model, psi)


class TestVnPosterior:
    def test_gaussian_product_variance(self, vn_model, mgrid):
        psi = gaussian_state(mgrid, sigma=1.0)
        q_bar = float(mgrid.points()[525])  # on-grid readout: probe sampled exactly
        post = vn_posterior(vn_model, psi, q_bar=q_bar)
        expected = 1.0 / (1.0 / 1.0 ** 2 + 1.0 / 0.1 ** 2)
        assert quadrature_moments(post).var_x == pytest.approx(expected, rel=1e-9)

    def test_wide_probe_leaves_prior(self, mgrid):
        model = VonNeumannModel(gaussian_state(mgrid, sigma=2.0))
        psi = gaussian_state(mgrid, sigma=0.4)
        post = vn_posterior(model, psi, q_bar=0.3)
        l1 = np.sum(np.abs(post.density() - psi.density())) * mgrid.dx
        assert l1 < 0.05

    def test_delta_limit_concentrates(self, mgrid):
        model = VonNeumannModel(gaussian_state(mgrid, sigma=0.02))
        psi = gaussian_state(mgrid, sigma=1.0)
        post = vn_posterior(model, psi, q_bar=-0.7)
        m = quadrature_moments(post)
        assert abs(m.mean_x + 0.7) < 1e-3
        assert m.var_x < (1.1 * 0.02) ** 2

    def test_zero_probability_readout(self, vn_model, mgrid):
        psi = gaussian_state(mgrid, sigma=0.5)
        with pytest.raises(ZeroProbabilityReadout):
            vn_posterior(vn_model, psi, q_bar=19.0)

    def test_normalized(self, vn_model, prior):
        post = vn_posterior(vn_model, prior, q_bar=0.2)
        assert post.norm() == pytest.approx(1.0, abs=1e-12)


class TestGlProbability:
    def test_exact_effect_is_pointwise_density(self, contractive_model, prior):
        np.testing.assert_array_equal(gl_probability(contractive_model, prior),
                                      prior.density())

    def test_smeared_family_matches_vn_form(self, mgrid, prior, vn_model):
        gl = GordonLouisellModel(
            posterior_family=lambda a: gaussian_state(mgrid, center=a, sigma=0.1),
            effect=SmearedPositionEffect(vn_model.probe),
            grid=mgrid)
        np.testing.assert_allclose(gl_probability(gl, prior),
                                   vn_probability(vn_model, prior), atol=1e-12)

    def test_integral_is_one(self, contractive_model, prior, mgrid):
        assert np.sum(gl_probability(contractive_model, prior)) * mgrid.dx == \
            pytest.approx(1.0, abs=1e-9)

    def test_incomplete_family_rejected(self, mgrid, prior):
        leaky = gaussian_state(mgrid, sigma=0.1)
        leaky = GridState(mgrid, math.sqrt(0.9) * leaky.amplitudes)
        gl = GordonLouisellModel(
            posterior_family=lambda a: gaussian_state(mgrid, center=a, sigma=0.1),
            effect=SmearedPositionEffect(leaky),
            grid=mgrid)
        with pytest.raises(CompletenessViolation):
            gl_probability(gl, prior)


class TestGlPosterior:
    def test_centered_readout(self, contractive_model, mgrid):
        post = gl_posterior(contractive_model, 0.0)
        direct = discretize(contractive_model.params, mgrid)
        np.testing.assert_allclose(post.amplitudes, direct.amplitudes, atol=1e-12)

    def test_translation(self, contractive_model):
        post = gl_posterior(contractive_model, 3.0)
        m = quadrature_moments(post)
        assert m.mean_x == pytest.approx(3.0, abs=1e-9)
        assert m.mean_p == pytest.approx(0.0, abs=1e-9)
        assert m.var_x == pytest.approx(1.5, rel=1e-9)

    def test_prior_independent_by_signature(self, contractive_model):
        # the posterior map takes only the readout: same a, same state
        a = 1.25
        p1 = gl_posterior(contractive_model, a)
        p2 = gl_posterior(contractive_model, a)
        np.testing.assert_array_equal(p1.amplitudes, p2.amplitudes)


class TestNoiseKernel:
    def test_vn_gaussian_kernel(self, vn_model):
        kernel = noise_kernel(vn_model)
        assert not kernel.exact
        dx = vn_model.probe.grid.dx
        u = dx * np.arange(-8, 9)  # kernel samples are exact at grid offsets
        expected = np.exp(-u ** 2 / (2 * 0.1 ** 2)) / math.sqrt(2 * np.pi * 0.1 ** 2)
        np.testing.assert_allclose(kernel.evaluate(u, 0.0), expected, rtol=1e-6)

    def test_contractive_kernel_is_exact_tag(self, contractive_model):
        kernel = noise_kernel(contractive_model)
        assert kernel.exact
        assert kernel.second_moment() == 0.0

    def test_normalization(self, vn_model):
        assert noise_kernel(vn_model).normalization_defect() < 1e-8

    def test_translation_invariance(self, vn_model):
        kernel = noise_kernel(vn_model)
        assert kernel.evaluate(1.3, 1.0) == pytest.approx(
            kernel.evaluate(0.3, 0.0), rel=1e-12)


class TestPrecision:
    def test_contractive_zero(self, contractive_model, prior):
        assert precision(contractive_model, prior) == 0.0

    @pytest.mark.parametrize("dq", [0.05, 0.1, 0.5])
    def test_vn_equals_probe_spread(self, mgrid, prior, dq):
        model = VonNeumannModel(gaussian_state(mgrid, sigma=dq))
        assert precision(model, prior) == pytest.approx(dq, abs=1e-9)

    def test_noise_decomposition_identity(self, vn_model, mgrid):
        # eps(psi)^2 = readout variance - position variance, both by quadrature
        for psi in (gaussian_state(mgrid, center=-0.4, sigma=0.7),
                    two_peak_state(mgrid)):
            density = vn_probability(vn_model, psi)
            x = mgrid.points()
            mean = np.sum(x * density) * mgrid.dx
            readout_var = np.sum((x - mean) ** 2 * density) * mgrid.dx
            pos_var = quadrature_moments(psi).var_x
            assert precision(vn_model, psi) ** 2 == pytest.approx(
                readout_var - pos_var, abs=1e-7)


class TestResolution:
    @pytest.mark.parametrize("dq", [0.05, 0.1, 0.5])
    def test_vn_equals_probe_spread(self, mgrid, prior, dq):
        model = VonNeumannModel(gaussian_state(mgrid, sigma=dq))
        assert resolution(model, prior) == pytest.approx(dq, abs=1e-6)

    def test_contractive_equals_posterior_spread(self, contractive_model, prior):
        expected = math.sqrt(moments(contractive_model.params).var_x)
        assert resolution(contractive_model, prior) == pytest.approx(expected, rel=1e-9)

    def test_decomposition(self, vn_model, mgrid):
        # sigma^2 = [Dx(psi_a)^2] + [(a - <x>_a)^2], via the moment table
        psi = two_peak_state(mgrid)
        table = readout_moment_table(vn_model, psi)
        spread = table.average(table.var_x)
        offset = table.average((table.readouts - table.mean_x) ** 2)
        assert resolution(vn_model, psi) ** 2 == pytest.approx(
            spread + offset, abs=1e-12)
        assert spread + offset == pytest.approx(0.1 ** 2, abs=1e-7)

    def test_generic_family_loop(self, prior):
        small = Grid(-20.0, 20.0, 256)
        psi = gaussian_state(small, sigma=0.9)
        gl = GordonLouisellModel(
            posterior_family=lambda a: gaussian_state(small, center=a, sigma=0.3),
            effect=ExactPositionEffect(),
            grid=small)
        assert resolution(gl, psi) == pytest.approx(0.3, abs=1e-6)


class TestReadoutMomentTable:
    def test_against_direct_posteriors(self, vn_model, mgrid):
        psi = two_peak_state(mgrid, momentum=0.7)
        table = readout_moment_table(vn_model, psi)
        x = mgrid.points()
        strong = table.probability > 1e-4 * np.max(table.probability)
        for j in np.nonzero(strong)[0][::97]:
            post = vn_posterior(vn_model, psi, float(x[j]))
            m = quadrature_moments(post)
            assert table.mean_x[j] == pytest.approx(m.mean_x, abs=1e-9)
            assert table.var_x[j] == pytest.approx(m.var_x, abs=1e-9)
            assert table.mean_p[j] == pytest.approx(m.mean_p, abs=1e-8)
            assert table.var_p[j] == pytest.approx(m.var_p, abs=1e-7)
            assert table.correlation[j] == pytest.approx(m.correlation, abs=1e-8)

    def test_probability_matches_density(self, vn_model, prior):
        table = readout_moment_table(vn_model, prior)
        np.testing.assert_allclose(table.probability,
                                   vn_probability(vn_model, prior), atol=1e-12)


class TestUnbiasedness:
    def test_centered_probe_passes(self, vn_model, mgrid):
        states = [gaussian_state(mgrid, center=c, sigma=0.8) for c in (-1.0, 0.0, 2.0)]
        report = check_unbiasedness(vn_model, states)
        assert report.passed
        assert report.max_abs_bias < 1e-8

    def test_shifted_probe_fails_with_bias(self, mgrid):
        model = VonNeumannModel(gaussian_state(mgrid, center=0.3, sigma=0.1))
        report = check_unbiasedness(model, [gaussian_state(mgrid, sigma=0.8)])
        assert not report.passed
        assert report.biases[0] == pytest.approx(0.3, abs=1e-6)

    def test_contractive_exact(self, contractive_model, mgrid):
        report = check_unbiasedness(
            contractive_model, [two_peak_state(mgrid), gaussian_state(mgrid)])
        assert report.passed
        assert report.max_abs_bias < 1e-10


class TestTheorem41Suite:
    def test_identities_over_random_priors(self, mgrid):
        rng = np.random.default_rng(23)
        for _ in range(6):
            dq = rng.uniform(0.05, 0.5)
            model = VonNeumannModel(gaussian_state(mgrid, sigma=dq))
            psi = (random_gaussian_prior(rng, mgrid) if rng.random() < 0.5
                   else two_peak_state(mgrid, momentum=rng.uniform(-1, 1)))
            density = vn_probability(model, psi)
            x = mgrid.points()
            mean = np.sum(x * density) * mgrid.dx
            readout_var = np.sum((x - mean) ** 2 * density) * mgrid.dx
            eps2 = precision(model, psi) ** 2
            assert eps2 == pytest.approx(
                readout_var - quadrature_moments(psi).var_x, abs=1e-6)
            table = readout_moment_table(model, psi)
            sigma2 = resolution(model, psi) ** 2
            assert sigma2 == pytest.approx(
                table.average(table.var_x)
                + table.average((table.readouts - table.mean_x) ** 2), abs=1e-6)


class TestContractiveInteraction:
    def test_identity_at_start(self, mgrid):
        psi = gaussian_state(mgrid, center=0.5, sigma=1.0)
        probe = discretize(make_tcs(ROOT2, 1j), mgrid)
        joint = contractive_interaction(psi, probe, 0.0)
        xs = np.linspace(-3.0, 3.0, 7)
        for x in xs:
            for q in xs:
                expected = (np.interp(x, mgrid.points(), psi.amplitudes.real)
                            + 1j * np.interp(x, mgrid.points(), psi.amplitudes.imag))
                expected *= (np.interp(q, mgrid.points(), probe.amplitudes.real)
                             + 1j * np.interp(q, mgrid.points(), probe.amplitudes.imag))
                assert joint(x, q) == pytest.approx(expected, abs=1e-12)

    def test_readout_density_at_completion(self, mgrid):
        psi = two_peak_state(mgrid)
        probe = discretize(make_tcs(ROOT2, 1j), mgrid)
        density = interaction_readout_density(psi, probe, 1.0)
        assert np.max(np.abs(density - psi.density())) < 1e-9

    def test_posterior_at_completion_is_contractive_state(self, mgrid):
        psi = gaussian_state(mgrid, center=0.3, sigma=1.1)
        params = make_tcs(ROOT2, 1j)
        probe = discretize(params, mgrid)
        x = mgrid.points()
        for q_bar in (float(x[486]), 0.0, float(x[533])):  # on-grid readouts
            post = interaction_posterior(psi, probe, 1.0, q_bar)
            target = discretize(recenter(params, q_bar), mgrid)
            overlap = abs(np.sum(np.conj(post.amplitudes) * target.amplitudes)
                          * mgrid.dx)
            assert overlap > 1.0 - 1e-9

    def test_norm_preserved_midway(self, mgrid):
        psi = gaussian_state(mgrid, sigma=1.0)
        probe = discretize(make_tcs(ROOT2, 1j), mgrid)
        density = interaction_readout_density(psi, probe, 0.5)
        assert np.sum(density) * mgrid.dx == pytest.approx(1.0, abs=1e-3)

    def test_domain_guard(self, mgrid):
        psi = gaussian_state(mgrid, sigma=1.0)
        probe = discretize(make_tcs(ROOT2, 1j), mgrid)
        for bad in (-0.1, 1.1):
            with pytest.raises(DomainError):
                contractive_interaction(psi, probe, bad)

    def test_swap_property(self, mgrid):
        # statistics carried by psi(Q), posterior shape carried by the probe
        psi = gaussian_state(mgrid, center=-0.6, sigma=0.8)
        params = make_tcs(ROOT2, 1j)
        probe = discretize(params, mgrid)
        density = interaction_readout_density(psi, probe, 1.0)
        np.testing.assert_allclose(density, psi.density(), atol=1e-9)
        post = interaction_posterior(psi, probe, 1.0, float(mgrid.points()[518]))
        m = quadrature_moments(post)
        assert m.var_x == pytest.approx(moments(params).var_x, rel=1e-6)
