"""Continuous position-measurement models.

Two families are implemented:

* The linear-coupling (von Neumann) model: a probe packet ``Phi(Q)`` is
  entangled with the object by ``x``-translation, the joint state after
  the coupling being ``psi(x) Phi(Q - x)``.  Reading out ``Qbar`` gives
  the convolution statistics ``P(Qbar) = int dx |psi(x)|^2 |Phi(Qbar-x)|^2``
  and the posterior ``psi(x) Phi(Qbar - x)`` (normalized).  Its precision
  and resolution both equal the probe spread ``DQ``.

* Gordon-Louisell models: the posterior depends only on the readout,
  never on the prior.  The contractive variant reduces to the twisted
  coherent state centered at the readout (``<x> = a``, ``<p> = 0``) while
  the readout statistics are exactly ``|psi(a)|^2`` (exact-position
  effect).  This combination has zero precision with finite resolution,
  which is what lets repeated measurements beat the standard quantum
  limit.

Effect families are represented position-diagonally: either by the
exact-position tag (a delta kernel, never approximated by a narrow
Gaussian) or by a smearing kernel ``G(a, x) = |g(a - x)|^2`` built from
a profile packet ``g``.  Readout densities live on the same grid as the
states; readouts whose probability falls below ``PROBABILITY_FLOOR``
times the peak are excluded from conditional averages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy.signal import fftconvolve

from . import grid as gridmod
from . import tcs
from .errors import (
    CompletenessViolation,
    DomainError,
    GridTooNarrow,
    IncompatibleModel,
    NormalizationViolation,
    NotContractive,
    ZeroProbabilityReadout,
)
from .grid import Grid, GridState
from .tcs import TCSParams

#: Readouts with probability density below this fraction of the peak are
#: excluded from conditional (per-readout) averages.
PROBABILITY_FLOOR = 1e-12

#: Tolerance on the resolution-of-identity of an effect kernel.
COMPLETENESS_TOL = 1e-6

_MASS_ESCAPE_TOL = 1e-6


# ---------------------------------------------------------------------------
# model types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VonNeumannModel:
    """Linear-coupling model defined by its prepared probe packet.

    ``coupling_checked`` records whether <Q> = <P> = 0 held at
    construction (required for unbiased statistics); biased probes are
    allowed so the bias itself can be studied.
    """

    probe: GridState
    coupling_checked: bool = field(init=False)

    def __post_init__(self) -> None:
        if abs(self.probe.norm() - 1.0) > 1e-8:
            raise NormalizationViolation("probe state must be normalized")
        m = gridmod.quadrature_moments(self.probe)
        object.__setattr__(self, "coupling_checked",
                           abs(m.mean_x) < 1e-8 and abs(m.mean_p) < 1e-8)

    @property
    def delta_q(self) -> float:
        """Probe position spread DQ (standard deviation)."""
        return math.sqrt(gridmod.quadrature_moments(self.probe).var_x)


@dataclass(frozen=True)
class ExactPositionEffect:
    """Delta-kernel effect family: readout density is |psi(a)|^2."""


@dataclass(frozen=True)
class SmearedPositionEffect:
    """Position-diagonal smearing kernel G(a, x) = |profile(a - x)|^2."""

    profile: GridState


Effect = Union[ExactPositionEffect, SmearedPositionEffect]


@dataclass(frozen=True)
class GordonLouisellModel:
    """Readout-indexed posterior family plus a position-diagonal effect.

    ``posterior_family(a)`` must return a normalized GridState; it may
    not depend on any prior state.
    """

    posterior_family: Callable[[float], GridState]
    effect: Effect
    grid: Grid


@dataclass(frozen=True)
class ContractiveGLModel:
    """Gordon-Louisell measurement with contractive posteriors.

    Exact position statistics (delta effect) with state reduction to the
    twisted coherent state centered at the readout, <x> = a, <p> = 0.
    Requires a positive twist.
    """

    mu: complex
    nu: complex
    omega: float = 1.0
    mass: float = 1.0
    hbar: float = 1.0
    grid: Grid = field(default_factory=lambda: Grid(-40.0, 40.0, 4096))
    params: TCSParams = field(init=False)

    def __post_init__(self) -> None:
        params = tcs.make_tcs(self.mu, self.nu, x0=0.0, p0=0.0,
                              omega=self.omega, mass=self.mass, hbar=self.hbar)
        if tcs.xi(params) <= 0.0:
            raise NotContractive(
                f"contractive model requires xi > 0, got {tcs.xi(params)!r}")
        object.__setattr__(self, "params", params)


MeasurementModel = Union[VonNeumannModel, GordonLouisellModel, ContractiveGLModel]


@dataclass(frozen=True)
class NoiseKernel:
    """Readout-noise kernel G(a, x) of a position-diagonal effect family.

    ``exact`` marks the delta kernel (exact position measurement); the
    smeared case stores the translation-invariant density rho(u) sampled
    at offsets u, with G(a, x) = rho(a - x).
    """

    exact: bool
    offsets: np.ndarray | None = None
    density: np.ndarray | None = None

    def evaluate(self, a, x):
        """G(a, x); arrays broadcast.  Undefined for the exact kernel."""
        if self.exact:
            raise DomainError("exact-position kernel has no pointwise density")
        u = np.asarray(a) - np.asarray(x)
        return np.interp(u, self.offsets, self.density, left=0.0, right=0.0)

    def _du(self) -> float:
        return float(self.offsets[1] - self.offsets[0])

    def normalization_defect(self) -> float:
        """|int da G(a, x) - 1| (x-independent by translation invariance)."""
        if self.exact:
            return 0.0
        return abs(float(np.sum(self.density) * self._du()) - 1.0)

    def mean_offset(self) -> float:
        """int da (a - x) G(a, x): the readout bias."""
        if self.exact:
            return 0.0
        total = float(np.sum(self.density) * self._du())
        return float(np.sum(self.offsets * self.density) * self._du()) / total

    def second_moment(self) -> float:
        """int da (a - x)^2 G(a, x): the squared precision eps(x)^2."""
        if self.exact:
            return 0.0
        total = float(np.sum(self.density) * self._du())
        return float(np.sum(self.offsets ** 2 * self.density) * self._du()) / total


# ---------------------------------------------------------------------------
# interpolation / convolution plumbing
# ---------------------------------------------------------------------------

def _complex_interp(u, xs, amps):
    re = np.interp(u, xs, amps.real, left=0.0, right=0.0)
    im = np.interp(u, xs, amps.imag, left=0.0, right=0.0)
    return re + 1j * im


def _resample_on_spacing(state: GridState, dx: float):
    """Sample a packet's amplitudes at offsets u = k*dx covering its grid.

    Returns (k_lo, amplitudes).  Exact when the packet's own grid shares
    the spacing dx and is aligned to it; linear interpolation otherwise.
    """
    g = state.grid
    k_lo = math.floor(g.x_min / dx)
    k_hi = math.ceil((g.x_min + (g.n - 1) * g.dx) / dx)
    u = dx * np.arange(k_lo, k_hi + 1)
    return k_lo, _complex_interp(u, g.points(), state.amplitudes)


def _aligned_convolution(f: np.ndarray, g_values: np.ndarray, k_lo: int,
                         n: int, dx: float) -> np.ndarray:
    """(f * g)(a_j) dx for a_j on the f-grid, g sampled at offsets k*dx.

    Entry c of the full convolution corresponds to readout index
    j = c + k_lo; readouts outside the covered range get zero.
    """
    full = fftconvolve(f, g_values, mode="full")
    out = np.zeros(n, dtype=full.dtype)
    j0 = max(0, k_lo)
    j1 = min(n - 1, k_lo + len(full) - 1)
    if j1 >= j0:
        out[j0:j1 + 1] = full[j0 - k_lo:j1 - k_lo + 1]
    return out * dx


# ---------------------------------------------------------------------------
# von Neumann model
# ---------------------------------------------------------------------------

def vn_joint_state(model: VonNeumannModel, psi: GridState):
    """Two-body closed form after the coupling: (x, Q) -> psi(x) Phi(Q - x).

    Returns an evaluator; no two-dimensional grid is materialized.
    """
    pgrid = model.probe.grid
    sgrid = psi.grid

    def evaluate(x, q):
        x = np.asarray(x, dtype=float)
        q = np.asarray(q, dtype=float)
        psi_x = _complex_interp(x, sgrid.points(), psi.amplitudes)
        phi_u = _complex_interp(q - x, pgrid.points(), model.probe.amplitudes)
        return psi_x * phi_u

    return evaluate


def vn_probability(model: VonNeumannModel, psi: GridState) -> np.ndarray:
    """Readout density P(Qbar) = int dx |psi(x)|^2 |Phi(Qbar - x)|^2.

    Evaluated on psi's grid points; integrates to 1.  Raises
    :class:`GridTooNarrow` if convolution mass escapes the window.
    """
    return _smeared_density(psi, model.probe)


def _smeared_density(psi: GridState, profile: GridState) -> np.ndarray:
    g = psi.grid
    k_lo, prof_amp = _resample_on_spacing(profile, g.dx)
    rho = np.abs(prof_amp) ** 2
    density = _aligned_convolution(psi.density(), rho, k_lo, g.n, g.dx)
    density = np.maximum(density.real, 0.0)
    total = float(np.sum(density) * g.dx)
    expected = psi.norm() * float(np.sum(rho) * g.dx)
    if total < expected - _MASS_ESCAPE_TOL:
        raise GridTooNarrow(
            f"readout density integrates to {total:.9f} on the window "
            f"(expected {expected:.9f}); widen the grid")
    return density


def vn_posterior(model: VonNeumannModel, psi: GridState, q_bar: float) -> GridState:
    """Posterior packet psi(x) Phi(Qbar - x) / sqrt(P(Qbar)), normalized."""
    g = psi.grid
    pgrid = model.probe.grid
    amp = psi.amplitudes * _complex_interp(q_bar - g.points(), pgrid.points(),
                                           model.probe.amplitudes)
    prob = float(np.sum(np.abs(amp) ** 2) * g.dx)
    if prob < 1e-300:
        raise ZeroProbabilityReadout(
            f"readout {q_bar!r} has numerically zero probability")
    return GridState(g, amp / math.sqrt(prob), psi.mass, psi.hbar)


# ---------------------------------------------------------------------------
# Gordon-Louisell models
# ---------------------------------------------------------------------------

def _model_effect(model: MeasurementModel) -> Effect:
    if isinstance(model, ContractiveGLModel):
        return ExactPositionEffect()
    if isinstance(model, GordonLouisellModel):
        return model.effect
    if isinstance(model, VonNeumannModel):
        return SmearedPositionEffect(model.probe)
    raise IncompatibleModel(f"not a measurement model: {model!r}")


def gl_probability(model: GordonLouisellModel | ContractiveGLModel,
                   psi: GridState) -> np.ndarray:
    """Readout density of a Gordon-Louisell measurement on psi's grid.

    Exact-position effect: |psi(a)|^2 pointwise.  Smeared effect: the
    kernel convolution, after checking the kernel integrates to one
    (:class:`CompletenessViolation` otherwise).
    """
    effect = _model_effect(model)
    if isinstance(effect, ExactPositionEffect):
        return psi.density()
    kernel = _kernel_from_profile(effect.profile, psi.grid.dx)
    defect = kernel.normalization_defect()
    if defect > COMPLETENESS_TOL:
        raise CompletenessViolation(
            f"effect kernel integrates to 1 with defect {defect:.3e} "
            f"(limit {COMPLETENESS_TOL:g})")
    return _smeared_density(psi, effect.profile)


def gl_posterior(model: GordonLouisellModel | ContractiveGLModel,
                 a: float) -> GridState:
    """Posterior for readout a; independent of any prior state."""
    if isinstance(model, ContractiveGLModel):
        return gridmod.discretize(tcs.recenter(model.params, a), model.grid)
    return model.posterior_family(a)


# ---------------------------------------------------------------------------
# kernel, precision, resolution, bias
# ---------------------------------------------------------------------------

def _kernel_from_profile(profile: GridState, dx: float) -> NoiseKernel:
    k_lo, amp = _resample_on_spacing(profile, dx)
    u = dx * np.arange(k_lo, k_lo + len(amp))
    return NoiseKernel(exact=False, offsets=u, density=np.abs(amp) ** 2)


def noise_kernel(model: MeasurementModel) -> NoiseKernel:
    """Readout-noise kernel of the model's (position-diagonal) effects."""
    effect = _model_effect(model)
    if isinstance(effect, ExactPositionEffect):
        return NoiseKernel(exact=True)
    dx = effect.profile.grid.dx
    return _kernel_from_profile(effect.profile, dx)


def precision(model: MeasurementModel, psi: GridState) -> float:
    """Precision eps(psi): rms readout noise relative to the prior position.

    eps(psi)^2 = int dx eps(x)^2 |psi(x)|^2 with
    eps(x)^2 = int da (a - x)^2 G(a, x).  The kernels here are
    translation invariant, so eps(x) is constant and eps(psi) is
    prior-independent; it vanishes identically for exact-position
    effects.
    """
    kernel = noise_kernel(model)
    if kernel.exact:
        return 0.0
    return math.sqrt(kernel.second_moment() * psi.norm())


@dataclass(frozen=True)
class ReadoutMomentTable:
    """Per-readout posterior moments of a von Neumann measurement.

    Arrays are aligned with ``readouts`` (the state grid points); rows
    where ``retained`` is False fell below the probability floor and
    hold NaN moments.
    """

    readouts: np.ndarray
    probability: np.ndarray
    retained: np.ndarray
    mean_x: np.ndarray
    var_x: np.ndarray
    mean_p: np.ndarray
    var_p: np.ndarray
    correlation: np.ndarray

    def average(self, values: np.ndarray) -> float:
        """Probability-weighted average over retained readouts."""
        w = self.probability[self.retained]
        return float(np.sum(w * values[self.retained]) / np.sum(w))

    def excluded_mass(self) -> float:
        dx = self.readouts[1] - self.readouts[0]
        return float(np.sum(self.probability[~self.retained]) * dx)


def readout_moment_table(model: VonNeumannModel, psi: GridState) -> ReadoutMomentTable:
    """All per-readout posterior moments in one pass of convolutions.

    For the posterior psi(x) Phi(a - x) every moment <x^m p^l> is a
    convolution of products of (psi, psi') against products of
    (Phi, Phi'), so one FFT pass per term yields the whole table with
    quadrature accuracy.
    """
    g = psi.grid
    x = g.points()
    dx = g.dx
    k = g.wavenumbers()
    hbar = psi.hbar

    dpsi = np.fft.ifft(1j * k * np.fft.fft(psi.amplitudes))
    pg = model.probe.grid
    kprobe = pg.wavenumbers()
    dprobe = np.fft.ifft(1j * kprobe * np.fft.fft(model.probe.amplitudes))
    k_lo, phi_u = _resample_on_spacing(model.probe, dx)
    _, dphi_u = _resample_on_spacing(
        GridState(pg, dprobe, model.probe.mass, model.probe.hbar), dx)

    s0 = psi.density()
    s1 = np.conj(psi.amplitudes) * dpsi
    s2 = np.abs(dpsi) ** 2
    g0 = np.abs(phi_u) ** 2
    g1 = np.conj(phi_u) * dphi_u
    g2 = np.abs(dphi_u) ** 2

    def conv(f, h):
        return _aligned_convolution(f, h, k_lo, g.n, dx)

    prob = np.maximum(np.real(conv(s0, g0)), 0.0)
    mx = np.real(conv(x * s0, g0))
    x2 = np.real(conv(x * x * s0, g0))
    pm = np.real(-1j * (conv(s1, g0) - conv(s0, g1)))
    p2 = np.real(conv(s2, g0)) + np.real(conv(s0, g2)) \
        - 2.0 * np.real(conv(np.conj(s1), np.conj(g1)))
    xp = -1j * (conv(x * s1, g0) - conv(x * s0, g1))

    retained = prob > PROBABILITY_FLOOR * float(np.max(prob))
    safe = np.where(retained, prob, 1.0)
    mean_x = np.where(retained, mx / safe, np.nan)
    var_x = np.where(retained, x2 / safe - mean_x ** 2, np.nan)
    mean_p = np.where(retained, hbar * pm / safe, np.nan)
    var_p = np.where(retained, hbar ** 2 * p2 / safe - mean_p ** 2, np.nan)
    corr = np.where(retained,
                    2.0 * hbar * np.real(xp) / safe - 2.0 * mean_x * mean_p,
                    np.nan)
    return ReadoutMomentTable(readouts=x, probability=prob, retained=retained,
                              mean_x=mean_x, var_x=var_x, mean_p=mean_p,
                              var_p=var_p, correlation=corr)


def resolution(model: MeasurementModel, psi: GridState) -> float:
    """Resolution sigma(psi): rms deviation of the posterior position
    from the readout, averaged over the readout distribution.

    sigma(a)^2 = int dx (a - x)^2 |psi_a(x)|^2, averaged with P(a|psi).
    """
    if isinstance(model, VonNeumannModel):
        table = readout_moment_table(model, psi)
        sig2 = table.var_x + (table.readouts - table.mean_x) ** 2
        return math.sqrt(table.average(sig2))
    if isinstance(model, ContractiveGLModel):
        # posteriors are exact translates: one quadrature serves all readouts
        post = gl_posterior(model, 0.0)
        m = gridmod.quadrature_moments(post)
        return math.sqrt(m.var_x + m.mean_x ** 2)
    density = gl_probability(model, psi)
    g = psi.grid
    x = g.points()
    retained = density > PROBABILITY_FLOOR * float(np.max(density))
    acc = 0.0
    weight = 0.0
    for j in np.nonzero(retained)[0]:
        a = float(x[j])
        post = gl_posterior(model, a)
        sig2 = float(np.sum((a - post.grid.points()) ** 2 * post.density())
                     * post.grid.dx)
        acc += density[j] * sig2
        weight += density[j]
    return math.sqrt(acc / weight)


@dataclass(frozen=True)
class UnbiasednessReport:
    """Readout-mean bias of a model over a set of test states."""

    biases: tuple[float, ...]
    max_abs_bias: float
    passed: bool


def readout_density(model: MeasurementModel, psi: GridState) -> np.ndarray:
    """P(a|psi) on psi's grid points, for any model type."""
    if isinstance(model, VonNeumannModel):
        return vn_probability(model, psi)
    return gl_probability(model, psi)


def check_unbiasedness(model: MeasurementModel, test_states,
                       tol: float = 1e-7) -> UnbiasednessReport:
    """Compare the readout mean with the prior position mean per state."""
    biases = []
    for state in test_states:
        density = readout_density(model, state)
        g = state.grid
        total = float(np.sum(density) * g.dx)
        readout_mean = float(np.sum(g.points() * density) * g.dx) / total
        biases.append(readout_mean - gridmod.quadrature_moments(state).mean_x)
    max_abs = max(abs(b) for b in biases) if biases else 0.0
    return UnbiasednessReport(biases=tuple(biases), max_abs_bias=max_abs,
                              passed=max_abs <= tol)


# ---------------------------------------------------------------------------
# the contractive object-probe coupling
# ---------------------------------------------------------------------------

def _interaction_matrix(kt: float) -> np.ndarray:
    c = 2.0 / math.sqrt(3.0)
    th = kt * math.pi / 3.0
    return np.array([
        [c * math.sin((1.0 - kt) * math.pi / 3.0), c * math.sin(th)],
        [-c * math.sin(th), c * math.sin((1.0 + kt) * math.pi / 3.0)],
    ])


def contractive_interaction(psi: GridState, probe: GridState, kt: float):
    """Closed-form two-body state during the coordinate-swapping coupling.

    With the coupling strength normalized so the interaction completes
    at kt = 1, the initial product f(x, Q) = psi(x) probe(Q) evolves by
    an area-preserving rotation of its arguments; at kt = 0 the state is
    unchanged and at kt = 1 it becomes psi(Q) probe(Q - x), i.e. the
    readout carries the object statistics while the probe shape becomes
    the posterior.  Returns an evaluator (x, Q) -> amplitude.
    """
    if not 0.0 <= kt <= 1.0:
        raise DomainError(f"interaction fraction kt must be in [0, 1], got {kt!r}")
    m = _interaction_matrix(kt)
    sgrid, pgrid = psi.grid, probe.grid

    def evaluate(x, q):
        x = np.asarray(x, dtype=float)
        q = np.asarray(q, dtype=float)
        arg1 = m[0, 0] * x + m[0, 1] * q
        arg2 = m[1, 0] * x + m[1, 1] * q
        a = _complex_interp(arg1, sgrid.points(), psi.amplitudes)
        b = _complex_interp(arg2, pgrid.points(), probe.amplitudes)
        return a * b

    return evaluate


def interaction_readout_density(psi: GridState, probe: GridState,
                                kt: float, chunk: int = 256) -> np.ndarray:
    """Probe-coordinate marginal P(Qbar) = int dx |Psi_kt(x, Qbar)|^2.

    Evaluated on psi's grid points by quadrature over the object
    coordinate.
    """
    joint = contractive_interaction(psi, probe, kt)
    x = psi.grid.points()
    out = np.empty(psi.grid.n)
    for start in range(0, psi.grid.n, chunk):
        q = x[start:start + chunk, None]
        out[start:start + chunk] = np.sum(
            np.abs(joint(x[None, :], q)) ** 2, axis=1) * psi.grid.dx
    return out


def interaction_posterior(psi: GridState, probe: GridState, kt: float,
                          q_bar: float) -> GridState:
    """Normalized object state conditioned on probe readout Qbar."""
    joint = contractive_interaction(psi, probe, kt)
    x = psi.grid.points()
    amp = joint(x, np.full_like(x, q_bar))
    prob = float(np.sum(np.abs(amp) ** 2) * psi.grid.dx)
    if prob < 1e-300:
        raise ZeroProbabilityReadout(
            f"readout {q_bar!r} has numerically zero probability")
    return GridState(psi.grid, amp / math.sqrt(prob), psi.mass, psi.hbar)
