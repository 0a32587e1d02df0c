"""Twisted coherent states of a free mass in closed form.

A twisted coherent state (TCS) is the normalized eigenstate of
``mu*a + nu*adag`` with ``|mu|^2 - |nu|^2 = 1``, where ``a`` is the
annihilation operator built from position and momentum with an arbitrary
frequency parameter ``omega`` (omega only fixes the parametrization; the
dynamics here is always free, H = p^2/2m).  In the position
representation the state is a Gaussian packet

    psi(x) = (m w / (pi hbar |mu-nu|^2))^{1/4}
             * exp( -(m w / 2 hbar) (1 + 2 i xi) / |mu-nu|^2 (x-x0)^2
                    + i p0 (x-x0) / hbar )

with the twist ``xi = Im(conj(mu) nu)`` controlling the
position-momentum correlation <Dx Dp + Dp Dx> = -2 hbar xi.  For
``xi > 0`` the packet *contracts* under free evolution: the position
variance

    Dx(t)^2 = (hbar / 2 m w) (|mu-nu|^2 - 4 xi w t + |mu+nu|^2 (w t)^2)

decreases until the contraction time ``tau = 2 xi / (w |mu+nu|^2)``,
where it reaches (1/4 xi)(hbar tau / m) -- a factor 1/(4 xi) below the
squared standard quantum limit ``hbar tau / m``.

All functions are pure; ``TCSParams`` is immutable.
"""

from __future__ import annotations

import cmath
import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NormalizationViolation, NotContractive

#: Absolute tolerance accepted for |mu|^2 - |nu|^2 = 1 at construction.
#: Inputs within it are rescaled to satisfy the constraint exactly.
CONSTRAINT_TOL = 1e-9


@dataclass(frozen=True)
class TCSParams:
    """Parameters of a twisted coherent state.

    ``mu``/``nu`` are the Bogoliubov coefficients, ``x0``/``p0`` the
    packet center, and ``omega``/``mass``/``hbar`` the (strictly
    positive) scale constants.  Build through :func:`make_tcs`, which
    validates and renormalizes.
    """

    mu: complex
    nu: complex
    x0: float = 0.0
    p0: float = 0.0
    omega: float = 1.0
    mass: float = 1.0
    hbar: float = 1.0


@dataclass(frozen=True)
class Moments:
    """First and second moments of a single-particle state.

    ``correlation`` is the symmetrized cross moment
    <Dx Dp + Dp Dx>; ``mean_energy`` is <p^2>/2m.
    """

    mean_x: float
    mean_p: float
    var_x: float
    var_p: float
    correlation: float
    mean_energy: float


def make_tcs(mu: complex, nu: complex, x0: float = 0.0, p0: float = 0.0,
             omega: float = 1.0, mass: float = 1.0,
             hbar: float = 1.0) -> TCSParams:
    """Validated constructor for :class:`TCSParams`.

    Accepts ``|mu|^2 - |nu|^2`` within ``CONSTRAINT_TOL`` of 1 and
    rescales (mu, nu) so the constraint holds exactly; larger deviations
    raise :class:`NormalizationViolation`.  Nonpositive omega/mass/hbar
    raise :class:`DomainError`.
    """
    for name, value in (("omega", omega), ("mass", mass), ("hbar", hbar)):
        if not (value > 0.0 and math.isfinite(value)):
            raise DomainError(f"{name} must be strictly positive, got {value!r}")
    mu = complex(mu)
    nu = complex(nu)
    norm = abs(mu) ** 2 - abs(nu) ** 2
    if abs(norm - 1.0) > CONSTRAINT_TOL:
        raise NormalizationViolation(
            f"|mu|^2 - |nu|^2 = {norm!r}, must equal 1 within {CONSTRAINT_TOL}")
    if norm != 1.0:
        scale = 1.0 / math.sqrt(norm)
        mu *= scale
        nu *= scale
    return TCSParams(mu=mu, nu=nu, x0=float(x0), p0=float(p0),
                     omega=float(omega), mass=float(mass), hbar=float(hbar))


def params_from_xi(xi_value: float, x0: float = 0.0, p0: float = 0.0,
                   omega: float = 1.0, mass: float = 1.0,
                   hbar: float = 1.0) -> TCSParams:
    """Canonical contractive parametrization with a prescribed twist.

    Uses mu = cosh(r), nu = i sinh(r) with sinh(2r) = 2*xi, which gives
    Im(conj(mu) nu) = xi exactly and |mu|^2 - |nu|^2 = 1.
    """
    r = 0.5 * math.asinh(2.0 * xi_value)
    return make_tcs(math.cosh(r), 1j * math.sinh(r), x0=x0, p0=p0,
                    omega=omega, mass=mass, hbar=hbar)


def recenter(params: TCSParams, x0: float, p0: float = 0.0) -> TCSParams:
    """Same packet shape translated to center (x0, p0)."""
    return dataclasses.replace(params, x0=float(x0), p0=float(p0))


def xi(params: TCSParams) -> float:
    """Twist xi = Im(conj(mu) nu); positive iff the state is contractive."""
    return (params.mu.conjugate() * params.nu).imag


def moments(params: TCSParams) -> Moments:
    """Closed-form moments of the packet.

    var_x = hbar |mu-nu|^2 / (2 m w), var_p = hbar m w |mu+nu|^2 / 2,
    correlation = -2 hbar xi, mean_energy = (p0^2 + var_p)/2m.
    """
    h, m, w = params.hbar, params.mass, params.omega
    dminus = abs(params.mu - params.nu) ** 2
    dplus = abs(params.mu + params.nu) ** 2
    var_x = h * dminus / (2.0 * m * w)
    var_p = h * m * w * dplus / 2.0
    return Moments(
        mean_x=params.x0,
        mean_p=params.p0,
        var_x=var_x,
        var_p=var_p,
        correlation=-2.0 * h * xi(params),
        mean_energy=(params.p0 ** 2 + var_p) / (2.0 * m),
    )


def schroedinger_slack(m: Moments, hbar: float) -> float:
    """Slack of the Robertson-Schroedinger relation.

    Returns var_x*var_p - (correlation/2)^2 - (hbar/2)^2, which must be
    >= 0 (up to roundoff) for any physical state and vanishes exactly
    for a twisted coherent state.
    """
    return m.var_x * m.var_p - (m.correlation / 2.0) ** 2 - (hbar / 2.0) ** 2


def wavefunction_at(params: TCSParams, x):
    """Position-space amplitude psi(x); accepts scalars or arrays.

    The free constant phase is fixed by taking the positive real
    normalization prefactor.  |psi|^2 integrates to 1.
    """
    h, m, w = params.hbar, params.mass, params.omega
    dminus = abs(params.mu - params.nu) ** 2
    prefactor = (m * w / (math.pi * h * dminus)) ** 0.25
    c = (m * w / (2.0 * h)) * (1.0 + 2.0j * xi(params)) / dminus
    dx = np.asarray(x) - params.x0
    out = prefactor * np.exp(-c * dx ** 2 + 1j * params.p0 * dx / h)
    if np.isscalar(x):
        return complex(out)
    return out


def position_variance_at(params: TCSParams, t):
    """Free-evolution position variance Dx(t)^2; accepts scalar or array t.

    Dx(t)^2 = (hbar/2mw)(|mu-nu|^2 - 4 xi w t + |mu+nu|^2 (w t)^2),
    a quadratic in t equal to moments(params).var_x at t = 0.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise DomainError("free-evolution time must be nonnegative")
    h, m, w = params.hbar, params.mass, params.omega
    dminus = abs(params.mu - params.nu) ** 2
    dplus = abs(params.mu + params.nu) ** 2
    wt = w * t_arr
    out = (h / (2.0 * m * w)) * (dminus - 4.0 * xi(params) * wt + dplus * wt ** 2)
    if np.isscalar(t):
        return float(out)
    return out


def contraction_time(params: TCSParams) -> float:
    """Time tau = 2 xi / (w |mu+nu|^2) minimizing the position variance.

    Equivalently tau = xi hbar m / var_p.  Requires xi > 0.
    """
    twist = xi(params)
    if twist <= 0.0:
        raise NotContractive(f"contraction time requires xi > 0, got xi = {twist!r}")
    return 2.0 * twist / (params.omega * abs(params.mu + params.nu) ** 2)


def min_position_uncertainty(params: TCSParams) -> float:
    """Minimum position spread Dx(tau) reached by free contraction.

    Returns hbar / (2 Dp(0)); agrees with Dx(0)/sqrt(1+4 xi^2) and
    with sqrt((1/4 xi)(hbar tau / m)) at tau = contraction_time.
    Requires xi > 0.
    """
    twist = xi(params)
    if twist <= 0.0:
        raise NotContractive(f"minimum uncertainty requires xi > 0, got xi = {twist!r}")
    mom = moments(params)
    value = params.hbar / (2.0 * math.sqrt(mom.var_p))
    alt_spread = math.sqrt(mom.var_x / (1.0 + 4.0 * twist ** 2))
    tau = contraction_time(params)
    alt_sql = math.sqrt(params.hbar * tau / (4.0 * twist * params.mass))
    assert math.isclose(value, alt_spread, rel_tol=1e-12)
    assert math.isclose(value, alt_sql, rel_tol=1e-12)
    return value


def sql_bound(mass: float, tau: float, hbar: float) -> float:
    """Squared standard-quantum-limit uncertainty hbar*tau/m.

    This is the benchmark the predictive variance of a repeated
    position measurement is compared against.
    """
    for name, value in (("mass", mass), ("tau", tau), ("hbar", hbar)):
        if not value > 0.0:
            raise DomainError(f"{name} must be strictly positive, got {value!r}")
    return hbar * tau / mass


def alpha(params: TCSParams) -> complex:
    """Complex center (m w / 2 hbar)^{1/2} x0 + i p0 / (2 hbar m w)^{1/2}."""
    h, m, w = params.hbar, params.mass, params.omega
    return cmath.sqrt(m * w / (2.0 * h)) * params.x0 \
        + 1j * params.p0 / math.sqrt(2.0 * h * m * w)
