"""Repeated-measurement experiment harness.

The experiment is always the same: measure the position of a free mass,
predict the second readout from the first by the mean-value strategy
h(a) = <x>_a + <p>_a tau / m, let the mass evolve freely for tau,
measure again with an identical apparatus, and score (second - h)^2.
The readout-averaged score is the squared predictive uncertainty
Delta(tau, psi)^2, compared against the squared standard quantum limit
hbar tau / m.

Both an analytic route (quadrature over the readout distribution, using
the exact decomposition Delta^2 = [eps^2] + [Dx(tau)^2]) and a Monte
Carlo route (explicit two-measurement trials, counter-based RNG,
deterministic per seed) are provided, for the von Neumann model and the
contractive Gordon-Louisell model.

Configuration files are INI-style key=value sections; see the README
for the full schema.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from . import grid as gridmod
from . import models, tcs
from .errors import ConfigError, DomainError
from .grid import Grid, GridState, PositionSampler, free_evolve, gaussian_state
from .models import (
    ContractiveGLModel,
    MeasurementModel,
    VonNeumannModel,
    gl_posterior,
    gl_probability,
    noise_kernel,
    readout_moment_table,
    vn_probability,
)

RNG_ALGORITHM = "philox4x64"

_CONDITION_TOL = 1e-9


# ---------------------------------------------------------------------------
# prediction strategy
# ---------------------------------------------------------------------------

def predict(posterior: GridState, tau: float) -> float:
    """Mean-value prediction h(a) = <x> + <p> tau / m for the posterior."""
    m = gridmod.quadrature_moments(posterior)
    return m.mean_x + m.mean_p * tau / posterior.mass


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class ExperimentReport:
    """Everything a repeated-measurement run produces.

    The analytic fields always satisfy
    predictive_variance = precision_avg + posterior_variance_avg;
    Monte Carlo fields are populated when trials > 0.
    """

    model: str
    tau: float
    mass: float
    hbar: float
    sql_bound: float
    predictive_variance: float
    precision_avg: float
    posterior_variance_avg: float
    sql_ratio: float
    excluded_readout_mass: float
    xi_value: float | None = None
    probe_delta_q: float | None = None
    prior_independence_dev: float | None = None
    trials: int = 0
    seed: int | None = None
    rng_algorithm: str | None = None
    mc_predictive_variance: float | None = None
    mc_stderr: float | None = None
    first_readouts: np.ndarray | None = None
    predictions: np.ndarray | None = None
    second_readouts: np.ndarray | None = None
    squared_errors: np.ndarray | None = None


def _fmt(value) -> str:
    if value is None:
        return "na"
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def render_report(report: ExperimentReport, config_digest: str = "na") -> str:
    """Deterministic plain-text rendering (12 significant digits)."""
    pairs = [
        ("report", "freemass-repeat"),
        ("format_version", 1),
        ("config_sha256", config_digest),
        ("model", report.model),
        ("mass", report.mass),
        ("hbar", report.hbar),
        ("tau", report.tau),
        ("xi", report.xi_value),
        ("probe_delta_q", report.probe_delta_q),
        ("sql_bound", report.sql_bound),
        ("predictive_variance", report.predictive_variance),
        ("precision_avg", report.precision_avg),
        ("posterior_variance_avg", report.posterior_variance_avg),
        ("sql_ratio", report.sql_ratio),
        ("excluded_readout_mass", report.excluded_readout_mass),
        ("prior_independence_dev", report.prior_independence_dev),
        ("trials", report.trials),
        ("seed", report.seed),
        ("rng_algorithm", report.rng_algorithm),
        ("mc_predictive_variance", report.mc_predictive_variance),
        ("mc_stderr", report.mc_stderr),
    ]
    return "\n".join(f"{key} {_fmt(value)}" for key, value in pairs) + "\n"


def write_trial_log(report: ExperimentReport, path) -> None:
    """Trial CSV: trial, first_readout, prediction, second_readout, squared_error."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("trial,first_readout,prediction,second_readout,squared_error\n")
        if report.trials == 0 or report.first_readouts is None:
            return
        for t in range(report.trials):
            fh.write(f"{t},{report.first_readouts[t]:.12g},"
                     f"{report.predictions[t]:.12g},"
                     f"{report.second_readouts[t]:.12g},"
                     f"{report.squared_errors[t]:.12g}\n")


def write_state_csv(state: GridState, path) -> None:
    """Export a grid state as CSV columns x, re(psi), im(psi)."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("x,re,im\n")
        for x, a in zip(state.grid.points(), state.amplitudes):
            fh.write(f"{x:.17g},{a.real:.17g},{a.imag:.17g}\n")


def read_state_csv(path, grid: Grid, mass: float = 1.0,
                   hbar: float = 1.0) -> GridState:
    """Load a state written by :func:`write_state_csv` onto a known grid."""
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ConfigError(f"{path}: expected three CSV columns x,re,im")
    if data.shape[0] != grid.n:
        raise ConfigError(
            f"{path}: state has {data.shape[0]} rows, grid needs {grid.n}")
    if np.max(np.abs(data[:, 0] - grid.points())) > 1e-9:
        raise ConfigError(f"{path}: sample positions do not match the grid")
    return GridState(grid, data[:, 1] + 1j * data[:, 2], mass, hbar).normalized()


# ---------------------------------------------------------------------------
# analytic predictive uncertainty
# ---------------------------------------------------------------------------

def _evolved_variance(var_x, correlation, var_p, tau, mass):
    """Free-evolution position variance from t=0 moments (exact)."""
    return var_x + correlation * (tau / mass) + var_p * (tau / mass) ** 2


def _contractive_posterior_average(model: ContractiveGLModel,
                                   prior: GridState, tau: float):
    """Readout-averaged posterior variance; constant per readout, so the
    quadrature average only renormalizes over retained readouts."""
    density = gl_probability(model, prior)
    dx = prior.grid.dx
    retained = density > models.PROBABILITY_FLOOR * float(np.max(density))
    weights = density[retained]
    v_tau = tcs.position_variance_at(model.params, tau)
    average = float(np.sum(weights * v_tau) / np.sum(weights))
    excluded = float(np.sum(density[~retained]) * dx)
    return average, excluded


def predictive_uncertainty_analytic(model: MeasurementModel, prior: GridState,
                                    tau: float) -> ExperimentReport:
    """Quadrature evaluation of Delta(tau, psi)^2 and its decomposition.

    Per readout, Delta(tau, psi, a)^2 = eps(U_tau psi_a)^2 + Dx(tau)(psi_a)^2;
    the report averages both terms over P(a|psi), excluding readouts
    below the probability floor.
    """
    if not tau > 0.0:
        raise DomainError(f"tau must be positive, got {tau!r}")
    bound = tcs.sql_bound(prior.mass, tau, prior.hbar)
    if isinstance(model, ContractiveGLModel):
        posterior_avg, excluded = _contractive_posterior_average(model, prior, tau)
        reference = gaussian_state(prior.grid, 0.0, 1.0, mass=prior.mass,
                                   hbar=prior.hbar)
        ref_avg, _ = _contractive_posterior_average(model, reference, tau)
        precision_avg = 0.0
        predictive = precision_avg + posterior_avg
        return ExperimentReport(
            model="contractive_gl", tau=tau, mass=prior.mass, hbar=prior.hbar,
            sql_bound=bound, predictive_variance=predictive,
            precision_avg=precision_avg, posterior_variance_avg=posterior_avg,
            sql_ratio=predictive / bound, excluded_readout_mass=excluded,
            xi_value=tcs.xi(model.params),
            prior_independence_dev=abs(predictive - (ref_avg + precision_avg)))
    if isinstance(model, VonNeumannModel):
        table = readout_moment_table(model, prior)
        evolved = _evolved_variance(table.var_x, table.correlation,
                                    table.var_p, tau, prior.mass)
        posterior_avg = table.average(evolved)
        precision_avg = noise_kernel(model).second_moment()
        predictive = precision_avg + posterior_avg
        return ExperimentReport(
            model="von_neumann", tau=tau, mass=prior.mass, hbar=prior.hbar,
            sql_bound=bound, predictive_variance=predictive,
            precision_avg=precision_avg, posterior_variance_avg=posterior_avg,
            sql_ratio=predictive / bound,
            excluded_readout_mass=table.excluded_mass(),
            probe_delta_q=model.delta_q)
    raise DomainError(f"unsupported model for the harness: {model!r}")


# ---------------------------------------------------------------------------
# Monte Carlo predictive uncertainty
# ---------------------------------------------------------------------------

def _contractive_trials(model: ContractiveGLModel, prior: GridState,
                        tau: float, draws: np.ndarray):
    """Contractive trials via translation invariance.

    The posterior for readout a is the a = 0 posterior translated, free
    evolution commutes with translation, and the second readout density
    is the evolved posterior's own position density; so a trial is
    second = a + (sample of evolved zero-centered posterior) with
    prediction h(a) = a + <p>_0 tau / m.  This is an exact identity of
    the model, not an approximation.
    """
    first = PositionSampler.from_state(prior)(draws[:, 0])
    post0 = gl_posterior(model, 0.0)
    m0 = gridmod.quadrature_moments(post0)
    predictions = first + m0.mean_p * tau / post0.mass
    evolved0 = free_evolve(post0, tau)
    second = first + PositionSampler.from_state(evolved0)(draws[:, 1])
    return first, predictions, second


def _rowwise_inverse_cdf(x_left: np.ndarray, cell_mass: np.ndarray,
                         u: np.ndarray, dx: float) -> np.ndarray:
    """Vectorized per-row inverse-CDF sampling (linear within a cell)."""
    rows, n = cell_mass.shape
    cdf = np.cumsum(cell_mass, axis=1)
    cdf /= cdf[:, -1:]
    shifts = 2.0 * np.arange(rows)
    flat = (cdf + shifts[:, None]).ravel()
    targets = u + shifts
    idx = np.searchsorted(flat, targets, side="right") - np.arange(rows) * n
    idx = np.clip(idx, 0, n - 1)
    rows_idx = np.arange(rows)
    below = np.where(idx > 0, cdf[rows_idx, np.maximum(idx - 1, 0)], 0.0)
    mass = cdf[rows_idx, idx] - below
    frac = np.where(mass > 0, (u - below) / np.where(mass > 0, mass, 1.0), 0.5)
    return x_left[idx] + frac * dx


def _vn_trials(model: VonNeumannModel, prior: GridState, tau: float,
               draws: np.ndarray, chunk: int = 256):
    """Von Neumann trials, vectorized over chunks of readouts."""
    g = prior.grid
    x = g.points()
    dx = g.dx
    k = g.wavenumbers()
    hbar, mass = prior.hbar, prior.mass
    density1 = vn_probability(model, prior)
    first = PositionSampler(x, density1 * dx, dx)(draws[:, 0])

    pgrid = model.probe.grid
    k_lo, probe_amp = models._resample_on_spacing(model.probe, dx)
    rho_probe = np.abs(probe_amp) ** 2
    evolve_phase = np.exp(-1j * hbar * k ** 2 * tau / (2.0 * mass))

    n_trials = len(first)
    predictions = np.empty(n_trials)
    second = np.empty(n_trials)
    x_left = x - 0.5 * dx
    for start in range(0, n_trials, chunk):
        a = first[start:start + chunk]
        u2 = draws[start:start + chunk, 1]
        probe_at = models._complex_interp(a[:, None] - x[None, :],
                                          pgrid.points(), model.probe.amplitudes)
        amp = prior.amplitudes[None, :] * probe_at
        norms = np.sqrt(np.sum(np.abs(amp) ** 2, axis=1) * dx)
        amp /= norms[:, None]
        weights = np.abs(amp) ** 2 * dx
        mean_x = np.sum(x[None, :] * weights, axis=1)
        ft = np.fft.fft(amp, axis=1)
        p_amp = np.fft.ifft(hbar * k[None, :] * ft, axis=1)
        mean_p = np.real(np.sum(np.conj(amp) * p_amp, axis=1)) * dx
        predictions[start:start + chunk] = mean_x + mean_p * tau / mass
        evolved = np.fft.ifft(evolve_phase[None, :] * ft, axis=1)
        dens_t = np.abs(evolved) ** 2
        conv = fftconvolve(dens_t, rho_probe[None, :], mode="full", axes=1)
        lo = -k_lo
        dens2 = np.maximum(conv[:, lo:lo + g.n].real, 0.0) * dx
        second[start:start + chunk] = _rowwise_inverse_cdf(
            x_left, dens2 * dx, u2, dx)
    return first, predictions, second


def monte_carlo_report(model: MeasurementModel, prior: GridState, tau: float,
                       trials: int, seed: int) -> ExperimentReport:
    """Run the two-measurement Monte Carlo and attach analytic fields.

    Per trial: sample the first readout, form the posterior, predict,
    evolve by tau, sample the second readout from the evolved state's
    readout density, and score the squared prediction error.
    Deterministic for a given seed (counter-based Philox stream).
    """
    if trials < 100:
        raise DomainError(f"need at least 100 trials, got {trials}")
    report = predictive_uncertainty_analytic(model, prior, tau)
    rng = np.random.Generator(np.random.Philox(key=seed))
    draws = rng.random((trials, 2))
    if isinstance(model, ContractiveGLModel):
        first, predictions, second = _contractive_trials(model, prior, tau, draws)
    else:
        first, predictions, second = _vn_trials(model, prior, tau, draws)
    squared = (second - predictions) ** 2
    report.trials = trials
    report.seed = seed
    report.rng_algorithm = RNG_ALGORITHM
    report.mc_predictive_variance = float(np.mean(squared))
    report.mc_stderr = float(np.std(squared, ddof=1) / math.sqrt(trials))
    report.first_readouts = first
    report.predictions = predictions
    report.second_readouts = second
    report.squared_errors = squared
    return report


# ---------------------------------------------------------------------------
# the sufficient condition for the standard quantum limit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CavesBoundReport:
    """Both sides of the SQL-sufficient condition plus the commutator bound.

    The condition [Dx(psi_a)^2] <= [eps(U_tau psi_a)^2] guarantees the
    SQL.  ``min_product_slack`` is the worst retained-readout value of
    Dx(0)(psi_a) Dx(tau)(psi_a) - hbar tau / 2m, which the uncertainty
    relation keeps nonnegative for every state.
    """

    posterior_position_var_avg: float
    precision_sq_avg: float
    condition_holds: bool
    min_product_slack: float
    sql_ratio: float
    sql_holds: bool


def caves_bound_check(model: MeasurementModel, prior: GridState,
                      tau: float) -> CavesBoundReport:
    """Evaluate the SQL-sufficient condition and the commutator chain."""
    report = predictive_uncertainty_analytic(model, prior, tau)
    half_bound = prior.hbar * tau / (2.0 * prior.mass)
    if isinstance(model, ContractiveGLModel):
        var0 = tcs.moments(model.params).var_x
        var_tau = tcs.position_variance_at(model.params, tau)
        posterior_var_avg = var0
        slack = math.sqrt(var0 * var_tau) - half_bound
    else:
        table = readout_moment_table(model, prior)
        posterior_var_avg = table.average(table.var_x)
        var_tau = _evolved_variance(table.var_x, table.correlation,
                                    table.var_p, tau, prior.mass)
        products = np.sqrt(table.var_x[table.retained]
                           * var_tau[table.retained])
        slack = float(np.min(products)) - half_bound
    eps2 = report.precision_avg
    return CavesBoundReport(
        posterior_position_var_avg=posterior_var_avg,
        precision_sq_avg=eps2,
        condition_holds=posterior_var_avg <= eps2 + _CONDITION_TOL,
        min_product_slack=slack,
        sql_ratio=report.sql_ratio,
        sql_holds=report.sql_ratio >= 1.0 - 1e-6)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    xi: float
    tau: float
    predictive_variance: float
    sql_bound: float
    sql_ratio: float


def sweep_contraction(xi_values, tau_values=None, mass: float = 1.0,
                      hbar: float = 1.0, omega: float = 1.0,
                      grid: Grid | None = None) -> list[SweepRow]:
    """Contractive-measurement sweep over the twist (and optionally tau).

    With tau_values None each row runs at that twist's contraction time,
    where the predictive variance is (1/4 xi)(hbar tau / m).  Without an
    explicit grid each twist gets an automatically widened one.
    """
    rows = []
    for xi_value in xi_values:
        params = tcs.params_from_xi(float(xi_value), omega=omega, mass=mass,
                                    hbar=hbar)
        taus = ([tcs.contraction_time(params)] if tau_values is None
                else [float(t) for t in tau_values])
        row_grid = grid or gridmod.auto_grid(params, t_max=max(taus))
        model = ContractiveGLModel(params.mu, params.nu, omega=omega,
                                   mass=mass, hbar=hbar, grid=row_grid)
        prior = gaussian_state(row_grid, 0.0, 1.0, mass=mass, hbar=hbar)
        for tau in taus:
            report = predictive_uncertainty_analytic(model, prior, tau)
            rows.append(SweepRow(xi=float(xi_value), tau=tau,
                                 predictive_variance=report.predictive_variance,
                                 sql_bound=report.sql_bound,
                                 sql_ratio=report.sql_ratio))
    return rows


def sweep_csv(rows) -> str:
    out = ["xi,tau,predictive_variance,sql_bound,sql_ratio"]
    for r in rows:
        out.append(f"{r.xi:.12g},{r.tau:.12g},{r.predictive_variance:.12g},"
                   f"{r.sql_bound:.12g},{r.sql_ratio:.12g}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# configuration files
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed and validated experiment configuration."""

    mass: float
    hbar: float
    tau_spec: float | str
    model_type: str
    model_options: dict
    prior_type: str
    prior_options: dict
    grid: Grid
    trials: int
    seed: int
    readout_bins: int
    source_text: str

    def digest(self) -> str:
        return hashlib.sha256(self.source_text.encode()).hexdigest()


class _KeyLocator:
    """Map (section, key) pairs to 1-based line numbers of the raw text."""

    def __init__(self, text: str):
        self.lines = {}
        section = None
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if stripped.startswith("[") and stripped.endswith("]"):
                section = stripped[1:-1].strip().lower()
            elif "=" in stripped and not stripped.startswith(("#", ";")):
                key = stripped.split("=", 1)[0].strip().lower()
                self.lines.setdefault((section, key), lineno)

    def describe(self, section: str, key: str) -> str:
        lineno = self.lines.get((section, key))
        where = f"line {lineno}: " if lineno else ""
        return f"{where}[{section}] {key}"


def _parse_complex(text: str) -> complex:
    cleaned = text.strip().replace(" ", "").replace("i", "j").replace("I", "j")
    return complex(cleaned)


_REQUIRED = object()


def parse_config(text: str, base_dir=None) -> ExperimentConfig:
    """Parse an INI-style experiment configuration.

    Raises :class:`ConfigError` with a line-numbered message on both
    syntax and value errors.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                       interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    locator = _KeyLocator(text)

    def get(section: str, key: str, cast, default=_REQUIRED, check=None):
        if not parser.has_option(section, key):
            if default is _REQUIRED:
                raise ConfigError(f"missing required key [{section}] {key}")
            return default
        raw = parser.get(section, key)
        try:
            value = cast(raw)
        except (ValueError, TypeError):
            raise ConfigError(
                f"{locator.describe(section, key)}: cannot parse {raw!r}") from None
        if check is not None and not check(value):
            raise ConfigError(
                f"{locator.describe(section, key)}: invalid value {raw!r}")
        return value

    for section in ("system", "model", "prior", "grid", "run"):
        if not parser.has_section(section):
            raise ConfigError(f"missing required section [{section}]")

    mass = get("system", "mass", float, default=1.0, check=lambda v: v > 0)
    hbar = get("system", "hbar", float, default=1.0, check=lambda v: v > 0)
    tau_raw = get("system", "tau", str)
    if tau_raw.strip().lower() == "contraction":
        tau_spec: float | str = "contraction"
    else:
        try:
            tau_spec = float(tau_raw)
        except ValueError:
            raise ConfigError(
                f"{locator.describe('system', 'tau')}: must be a positive "
                f"number or 'contraction', got {tau_raw!r}") from None
        if not tau_spec > 0:
            raise ConfigError(
                f"{locator.describe('system', 'tau')}: must be positive")

    model_type = get("model", "type", str).strip().lower()
    if model_type == "contractive_gl":
        model_options = {
            "mu": get("model", "mu", _parse_complex),
            "nu": get("model", "nu", _parse_complex),
            "omega": get("model", "omega", float, default=1.0,
                         check=lambda v: v > 0),
        }
    elif model_type == "von_neumann":
        model_options = {
            "probe_sigma": get("model", "probe_sigma", float,
                               check=lambda v: v > 0),
        }
        if tau_spec == "contraction":
            raise ConfigError(
                "tau = contraction requires a contractive_gl model")
    else:
        raise ConfigError(
            f"{locator.describe('model', 'type')}: unknown model type "
            f"{model_type!r} (expected contractive_gl or von_neumann)")

    prior_type = get("prior", "type", str, default="gaussian").strip().lower()
    if prior_type == "gaussian":
        prior_options = {
            "sigma": get("prior", "sigma", float, default=1.0,
                         check=lambda v: v > 0),
            "mean": get("prior", "mean", float, default=0.0),
            "mean_p": get("prior", "mean_p", float, default=0.0),
        }
    elif prior_type == "tcs":
        prior_options = {
            "mu": get("prior", "mu", _parse_complex),
            "nu": get("prior", "nu", _parse_complex),
            "omega": get("prior", "omega", float, default=1.0,
                         check=lambda v: v > 0),
            "x0": get("prior", "x0", float, default=0.0),
            "p0": get("prior", "p0", float, default=0.0),
        }
    elif prior_type == "file":
        path = Path(get("prior", "path", str))
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        prior_options = {"path": path}
    else:
        raise ConfigError(
            f"{locator.describe('prior', 'type')}: unknown prior type "
            f"{prior_type!r} (expected gaussian, tcs, or file)")

    grid_obj_error = None
    try:
        grid_obj = Grid(get("grid", "x_min", float, default=-40.0),
                        get("grid", "x_max", float, default=40.0),
                        get("grid", "n", int, default=4096))
    except DomainError as exc:
        grid_obj_error = str(exc)
    if grid_obj_error is not None:
        raise ConfigError(f"[grid]: {grid_obj_error}")

    trials = get("run", "trials", int, default=0, check=lambda v: v >= 0)
    seed = get("run", "seed", int, default=0, check=lambda v: v >= 0)
    readout_bins = get("run", "readout_bins", int, default=50,
                       check=lambda v: v >= 1)
    return ExperimentConfig(mass=mass, hbar=hbar, tau_spec=tau_spec,
                            model_type=model_type, model_options=model_options,
                            prior_type=prior_type, prior_options=prior_options,
                            grid=grid_obj, trials=trials, seed=seed,
                            readout_bins=readout_bins, source_text=text)


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return parse_config(text, base_dir=Path(path).parent)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def build_model(config: ExperimentConfig) -> MeasurementModel:
    if config.model_type == "contractive_gl":
        opts = config.model_options
        return ContractiveGLModel(opts["mu"], opts["nu"], omega=opts["omega"],
                                  mass=config.mass, hbar=config.hbar,
                                  grid=config.grid)
    probe = gaussian_state(config.grid, 0.0, config.model_options["probe_sigma"],
                           mass=config.mass, hbar=config.hbar)
    return VonNeumannModel(probe)


def build_prior(config: ExperimentConfig) -> GridState:
    opts = config.prior_options
    if config.prior_type == "gaussian":
        return gaussian_state(config.grid, opts["mean"], opts["sigma"],
                              momentum=opts["mean_p"], mass=config.mass,
                              hbar=config.hbar)
    if config.prior_type == "tcs":
        params = tcs.make_tcs(opts["mu"], opts["nu"], x0=opts["x0"],
                              p0=opts["p0"], omega=opts["omega"],
                              mass=config.mass, hbar=config.hbar)
        return gridmod.discretize(params, config.grid)
    return read_state_csv(opts["path"], config.grid, config.mass, config.hbar)


def resolve_tau(config: ExperimentConfig, model: MeasurementModel) -> float:
    if config.tau_spec == "contraction":
        return tcs.contraction_time(model.params)
    return float(config.tau_spec)


def run_config(config: ExperimentConfig) -> ExperimentReport:
    """Execute a configuration: analytic always, Monte Carlo if trials > 0."""
    model = build_model(config)
    prior = build_prior(config)
    tau = resolve_tau(config, model)
    if config.trials == 0:
        return predictive_uncertainty_analytic(model, prior, tau)
    return monte_carlo_report(model, prior, tau, config.trials, config.seed)


def predictive_uncertainty_monte_carlo(config: ExperimentConfig) -> ExperimentReport:
    """Monte Carlo run from a configuration (trials must be >= 100)."""
    model = build_model(config)
    prior = build_prior(config)
    return monte_carlo_report(model, prior, resolve_tau(config, model),
                              config.trials, config.seed)
