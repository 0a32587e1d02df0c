"""Uniform-grid wavefunction numerics.

This module is the numerical oracle for the closed forms in
:mod:`freemass.tcs`: states are sampled on a uniform position grid,
moments come from quadrature and spectral differentiation, and free
evolution is the exact multiplication ``exp(-i p^2 t / 2 m hbar)`` in
momentum space.  For analytic packets that decay well inside the box,
all of these are accurate to near machine precision.

Conventions: the grid holds ``n`` points ``x_min + j*dx`` with
``dx = (x_max - x_min)/n`` (right endpoint excluded, FFT-periodic);
``n`` must be a power of two.  States are normalized so that
``sum |psi|^2 dx = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tcs
from .errors import AliasingRisk, DomainError, GridTooNarrow
from .tcs import Moments, TCSParams

#: Relative boundary-amplitude ratio above which discretization refuses.
BOUNDARY_TOL = 1e-10

#: Fraction of momentum-space probability allowed in the outer 10% of
#: the spectral band before free evolution refuses to propagate.
ALIASING_TOL = 1e-8


@dataclass(frozen=True)
class Grid:
    """Uniform position grid on [x_min, x_max) with n points (power of two)."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self) -> None:
        if not self.x_max > self.x_min:
            raise DomainError(f"x_max={self.x_max!r} must exceed x_min={self.x_min!r}")
        if self.n < 16 or (self.n & (self.n - 1)) != 0:
            raise DomainError(f"n must be a power of two >= 16, got {self.n!r}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    def points(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, self.dx)


@dataclass(frozen=True)
class GridState:
    """Complex wavefunction sampled on a :class:`Grid`.

    Immutable; operations return new states.  ``mass`` and ``hbar``
    travel with the state because momentum moments and free evolution
    need them.
    """

    grid: Grid
    amplitudes: np.ndarray
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self) -> None:
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (self.grid.n,):
            raise DomainError(
                f"amplitudes shape {amp.shape} does not match grid n={self.grid.n}")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    def norm(self) -> float:
        """sum |psi|^2 dx."""
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dx)

    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def normalized(self) -> "GridState":
        return GridState(self.grid, self.amplitudes / np.sqrt(self.norm()),
                         self.mass, self.hbar)


def _check_boundary(amp: np.ndarray) -> None:
    peak = float(np.max(np.abs(amp)))
    if peak == 0.0:
        raise GridTooNarrow("state has no support on the grid")
    edge = max(abs(amp[0]), abs(amp[-1])) / peak
    if edge > BOUNDARY_TOL:
        raise GridTooNarrow(
            f"boundary amplitude is {edge:.3e} of the peak (limit {BOUNDARY_TOL:g}); "
            "widen the grid")


def discretize(params: TCSParams, grid: Grid) -> GridState:
    """Sample a twisted coherent state on the grid and normalize.

    Raises :class:`GridTooNarrow` when the packet does not decay to
    below ``BOUNDARY_TOL`` of its peak at the grid edges.
    """
    amp = tcs.wavefunction_at(params, grid.points())
    _check_boundary(amp)
    return GridState(grid, amp, params.mass, params.hbar).normalized()


def auto_grid(params: TCSParams, t_max: float = 0.0, n_min: int = 4096,
              half_min: float = 40.0, sigmas: float = 16.0) -> Grid:
    """Grid wide and fine enough for a packet over a free-evolution horizon.

    The half-width covers the drifted center plus ``sigmas`` position
    spreads (largest over the horizon); the spacing keeps the spectral
    band at least eight momentum spreads wide.  Large-twist states have
    both large position and momentum spreads, so they get wider, denser
    grids automatically.
    """
    var0 = tcs.position_variance_at(params, 0.0)
    var_t = tcs.position_variance_at(params, t_max) if t_max > 0.0 else var0
    spread = np.sqrt(max(var0, var_t))
    drift = abs(params.x0) + abs(params.p0) * t_max / params.mass
    half = max(half_min, drift + sigmas * spread)
    sigma_k = np.sqrt(tcs.moments(params).var_p) / params.hbar
    dx_max = np.pi / (8.0 * sigma_k)
    n = n_min
    while (2.0 * half) / n > dx_max:
        n *= 2
    return Grid(-half, half, n)


def gaussian_state(grid: Grid, center: float = 0.0, sigma: float = 1.0,
                   momentum: float = 0.0, mass: float = 1.0,
                   hbar: float = 1.0) -> GridState:
    """Gaussian packet whose position density has standard deviation sigma."""
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma!r}")
    x = grid.points()
    amp = np.exp(-(x - center) ** 2 / (4.0 * sigma ** 2)
                 + 1j * momentum * (x - center) / hbar)
    _check_boundary(amp)
    return GridState(grid, amp, mass, hbar).normalized()


def quadrature_moments(state: GridState) -> Moments:
    """Moments by quadrature and spectral differentiation.

    Position moments from the sampled density; momentum moments from
    applying p = -i hbar d/dx via the FFT; the symmetrized correlation
    as 2 Re<x p> - 2 <x><p>.
    """
    g = state.grid
    x = g.points()
    dx = g.dx
    amp = state.amplitudes
    w = np.abs(amp) ** 2 * dx
    mean_x = float(np.sum(x * w))
    var_x = float(np.sum((x - mean_x) ** 2 * w))
    p_amp = np.fft.ifft(state.hbar * g.wavenumbers() * np.fft.fft(amp))
    mean_p = float(np.real(np.sum(np.conj(amp) * p_amp)) * dx)
    mean_p2 = float(np.sum(np.abs(p_amp) ** 2) * dx)
    var_p = mean_p2 - mean_p ** 2
    mean_xp = complex(np.sum(np.conj(amp) * x * p_amp) * dx)
    correlation = 2.0 * mean_xp.real - 2.0 * mean_x * mean_p
    return Moments(mean_x=mean_x, mean_p=mean_p, var_x=var_x, var_p=var_p,
                   correlation=correlation,
                   mean_energy=mean_p2 / (2.0 * state.mass))


def free_evolve(state: GridState, t: float) -> GridState:
    """Exact free propagation by time t (spectral, unitary).

    Multiplies momentum amplitudes by exp(-i p^2 t / 2 m hbar).  Raises
    :class:`AliasingRisk` when more than ``ALIASING_TOL`` of the
    momentum-space probability sits in the outer 10% of the band.
    """
    if t < 0.0:
        raise DomainError(f"evolution time must be nonnegative, got {t!r}")
    g = state.grid
    k = g.wavenumbers()
    ft = np.fft.fft(state.amplitudes)
    spectrum = np.abs(ft) ** 2
    total = float(np.sum(spectrum))
    outer = float(np.sum(spectrum[np.abs(k) >= 0.9 * np.pi / g.dx]))
    if total > 0.0 and outer / total > ALIASING_TOL:
        raise AliasingRisk(
            f"{outer / total:.3e} of momentum mass in the outer 10% of the band; "
            "refine the grid")
    phase = np.exp(-1j * state.hbar * k ** 2 * t / (2.0 * state.mass))
    return GridState(g, np.fft.ifft(phase * ft), state.mass, state.hbar)


class PositionSampler:
    """Inverse-CDF sampler for a density sampled on a uniform grid.

    Probability within each cell (centered on a grid point, width dx)
    is distributed uniformly, i.e. the CDF is interpolated linearly.
    Deterministic: identical uniform draws give identical samples.
    """

    def __init__(self, x: np.ndarray, weights: np.ndarray, dx: float):
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0.0) or not np.sum(w) > 0.0:
            raise DomainError("sampler weights must be nonnegative with positive sum")
        self._dx = dx
        self._left = np.asarray(x) - 0.5 * dx
        self._cell_mass = w / np.sum(w)
        self._cdf = np.cumsum(self._cell_mass)

    @classmethod
    def from_state(cls, state: GridState) -> "PositionSampler":
        g = state.grid
        return cls(g.points(), state.density() * g.dx, g.dx)

    def __call__(self, uniform_draw):
        u = np.asarray(uniform_draw, dtype=float)
        if np.any(u < 0.0) or np.any(u >= 1.0):
            raise DomainError("uniform draws must lie in [0, 1)")
        idx = np.searchsorted(self._cdf, u, side="right")
        idx = np.minimum(idx, len(self._cdf) - 1)
        below = np.where(idx > 0, self._cdf[idx - 1], 0.0)
        mass = self._cell_mass[idx]
        frac = np.where(mass > 0.0, (u - below) / np.where(mass > 0, mass, 1.0), 0.5)
        out = self._left[idx] + frac * self._dx
        if np.isscalar(uniform_draw):
            return float(out)
        return out


def sample_position(state: GridState, uniform_draw):
    """Inverse-CDF sample of the position density; scalar or array draws."""
    return PositionSampler.from_state(state)(uniform_draw)
