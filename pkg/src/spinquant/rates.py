"""Coherence-broadened densities of states and scattering rates.

All kernels take the coherence clock ``tau`` (time since the last
scattering event, in units of 1/omega) and the scattering time ``tau_c``.

The transition weights split into two spectral channels::

    rho(theta -> theta') = cos^2(theta/2) * [cos^2(theta'/2) d(eps' - 1/2)]
                         + sin^2(theta/2) * [sin^2(theta'/2) d(eps' + 1/2)]

so the total rate is ``cos^2(theta/2) * R_plus(tau) + sin^2(theta/2) * R_minus(tau)``.
:class:`RateTable` stores the two channel rates and their running integrals
instead of a dense (theta, tau) array.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .spin import energy

__all__ = [
    "QuadratureError",
    "ThetaGrid",
    "RateTable",
    "broadened_delta",
    "dos_rho_bar",
    "transition_dos",
    "differential_rate",
    "total_rate",
    "build_rate_table",
    "constant_rate_table",
    "DEFAULT_N_THETA",
    "DEFAULT_N_TAU",
]

DEFAULT_N_THETA = 2048
DEFAULT_N_TAU = 4096
MIN_POINTS_PER_PEAK = 8
_TAYLOR_SWITCH = 1e-6


class QuadratureError(ArithmeticError):
    """The theta' grid is too coarse to resolve the broadened peaks."""


def _delta_raw(x: np.ndarray, tau: float) -> np.ndarray:
    a = 0.5 * tau * x
    small = np.abs(a) < _TAYLOR_SWITCH
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sin(a) ** 2 / (math.pi * x * x * (0.5 * tau))
    if np.any(small):
        out = np.where(small, (tau / (2.0 * math.pi)) * (1.0 - a * a / 3.0), out)
    return out


def broadened_delta(eps, tau: float):
    """Unit-area kernel ``sin^2(eps*tau/2) / (pi * eps^2 * tau/2)``.

    Parameters
    ----------
    eps : float or array_like
        Energy offset in units of hbar*omega.
    tau : float
        Coherence time, must be positive.
    """
    if not tau > 0.0:
        raise ValueError(f"tau must be > 0, got {tau!r}")
    x = np.asarray(eps, dtype=float)
    out = _delta_raw(x, tau)
    return float(out) if out.ndim == 0 else out


def dos_rho_bar(theta, tau: float):
    """Time-dependent density of states of a precessing spin at polar angle theta."""
    th = np.asarray(theta, dtype=float)
    eps = np.asarray(energy(th))
    c2 = np.cos(0.5 * th) ** 2
    s2 = np.sin(0.5 * th) ** 2
    out = c2 * broadened_delta(eps - 0.5, tau) + s2 * broadened_delta(eps + 0.5, tau)
    return float(out) if np.ndim(out) == 0 else out


def transition_dos(theta_from, theta_to, tau: float):
    """Density of final states for a transition theta_from -> theta_to."""
    th0 = np.asarray(theta_from, dtype=float)
    th1 = np.asarray(theta_to, dtype=float)
    energy(th0)  # domain check
    energy(th1)
    b_plus2 = (np.cos(0.5 * th0) * np.cos(0.5 * th1)) ** 2
    b_minus2 = (np.sin(0.5 * th0) * np.sin(0.5 * th1)) ** 2
    # eps' - 1/2 = -sin^2(theta'/2) and eps' + 1/2 = cos^2(theta'/2), written
    # this way to avoid cancellation near the poles
    out = b_plus2 * broadened_delta(-np.sin(0.5 * th1) ** 2, tau) + b_minus2 * broadened_delta(
        np.cos(0.5 * th1) ** 2, tau
    )
    return float(out) if np.ndim(out) == 0 else out


def differential_rate(theta_from, theta_to, tau: float, tau_c: float):
    """Golden-rule rate density per unit (theta', phi') measure, in units of omega."""
    if not tau_c > 0.0:
        raise ValueError(f"tau_c must be > 0, got {tau_c!r}")
    return transition_dos(theta_from, theta_to, tau) / tau_c


@dataclass(frozen=True)
class ThetaGrid:
    """Uniform grid on [0, pi] with the mirror-symmetric weights used everywhere.

    ``cos2`` is stored as the reverse of ``sin2`` so that the two spectral
    channels are exact mirror images on the grid.
    """

    theta: np.ndarray
    sin: np.ndarray
    sin2: np.ndarray  # sin^2(theta/2) == 1/2 - eps(theta)
    cos2: np.ndarray  # cos^2(theta/2) == 1/2 + eps(theta)

    @classmethod
    def uniform(cls, n: int) -> "ThetaGrid":
        if n < 2:
            raise ValueError("theta grid needs at least 2 points")
        theta = np.linspace(0.0, math.pi, n)
        s = np.sin(theta)
        s = 0.5 * (s + s[::-1])
        s[0] = s[-1] = 0.0
        sin2 = np.sin(0.5 * theta) ** 2
        cos2 = sin2[::-1].copy()
        for a in (theta, s, sin2, cos2):
            a.setflags(write=False)
        return cls(theta, s, sin2, cos2)

    @property
    def n(self) -> int:
        return self.theta.size

    @property
    def step(self) -> float:
        return math.pi / (self.n - 1)

    def channel_integrals(self, tau: float) -> tuple[float, float]:
        """Trapezoid integrals of sin(t')*cos^2(t'/2)*d(eps'-1/2) and its mirror channel."""
        d = _delta_raw(-self.sin2, tau)
        plus = np.trapezoid(self.sin * self.cos2 * d, dx=self.step)
        minus = np.trapezoid(self.sin * self.sin2 * d[::-1], dx=self.step)
        return float(plus), float(minus)


def check_resolution(tau: float, n_theta: int) -> None:
    """Raise QuadratureError if the first lobe of the kernel spans < 8 grid cells.

    The lobe ``|eps' -+ 1/2| < 2*pi/tau`` maps to ``theta' < 2*asin(sqrt(2*pi/tau))``
    next to each pole.
    """
    if tau <= 0.0:
        return
    w = 2.0 * math.pi / tau
    if w >= 1.0:
        return
    width = 2.0 * math.asin(math.sqrt(w))
    points = width / (math.pi / (n_theta - 1))
    if points < MIN_POINTS_PER_PEAK:
        raise QuadratureError(
            f"tau={tau:g} needs a finer theta grid: peak spans {points:.1f} points "
            f"with n_theta={n_theta} (need >= {MIN_POINTS_PER_PEAK})"
        )


def total_rate(theta_from, tau: float, tau_c: float, n_theta: int = DEFAULT_N_THETA):
    """Total scattering rate out of direction theta_from after coherence time tau.

    The phi' integral contributes 2*pi; the theta' integral is a composite
    trapezoid on ``n_theta`` uniform points.
    """
    if not tau > 0.0:
        raise ValueError(f"tau must be > 0, got {tau!r}")
    if not tau_c > 0.0:
        raise ValueError(f"tau_c must be > 0, got {tau_c!r}")
    check_resolution(tau, n_theta)
    th = np.asarray(theta_from, dtype=float)
    energy(th)
    plus, minus = ThetaGrid.uniform(n_theta).channel_integrals(tau)
    pref = 2.0 * math.pi / tau_c
    out = pref * (np.cos(0.5 * th) ** 2 * plus + np.sin(0.5 * th) ** 2 * minus)
    return float(out) if out.ndim == 0 else out


def _cumtrapz(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x), out=out[1:])
    return out


@dataclass(frozen=True, eq=False)
class RateTable:
    """Tabulated total rate and its running integral over the coherence clock.

    ``rate_plus``/``rate_minus`` are the channel rates (units of omega) and
    ``cum_plus``/``cum_minus`` their trapezoid integrals, all on ``tau_grid``.
    The dense arrays :attr:`total_rate` and :attr:`cumulative_rate` are
    built on first access (``n_theta * n_tau`` doubles each).
    """

    tau_c: float
    grid: ThetaGrid
    tau_grid: np.ndarray
    rate_plus: np.ndarray
    rate_minus: np.ndarray
    cum_plus: np.ndarray
    cum_minus: np.ndarray

    @property
    def theta_grid(self) -> np.ndarray:
        return self.grid.theta

    @property
    def tau_max(self) -> float:
        return float(self.tau_grid[-1])

    @cached_property
    def total_rate(self) -> np.ndarray:
        return (
            self.grid.cos2[:, None] * self.rate_plus[None, :]
            + self.grid.sin2[:, None] * self.rate_minus[None, :]
        )

    @cached_property
    def cumulative_rate(self) -> np.ndarray:
        return (
            self.grid.cos2[:, None] * self.cum_plus[None, :]
            + self.grid.sin2[:, None] * self.cum_minus[None, :]
        )

    def _weights(self, theta: float) -> tuple[float, float]:
        if not (0.0 <= theta <= math.pi):
            raise ValueError(f"theta={theta!r} outside the table range [0, pi]")
        c = math.cos(0.5 * theta)
        return c * c, 1.0 - c * c

    def rate(self, theta: float, tau=None):
        """Total rate at an arbitrary theta; on the tau grid unless ``tau`` is given."""
        cw, sw = self._weights(theta)
        row = cw * self.rate_plus + sw * self.rate_minus
        if tau is None:
            return row
        return np.interp(tau, self.tau_grid, row)

    def cumulative(self, theta: float) -> np.ndarray:
        """Running integral of the total rate at an arbitrary theta, on the tau grid."""
        cw, sw = self._weights(theta)
        return cw * self.cum_plus + sw * self.cum_minus

    def write_csv(self, path, theta_stride: int = 1, tau_stride: int = 1) -> None:
        """Dump ``theta, tau, total_rate, cumulative_rate`` rows (optionally thinned)."""
        th = self.grid.theta[::theta_stride]
        tau = self.tau_grid[::tau_stride]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["theta", "tau", "total_rate", "cumulative_rate"])
            for t in th:
                rate = self.rate(float(t))[::tau_stride]
                cum = self.cumulative(float(t))[::tau_stride]
                for k in range(tau.size):
                    w.writerow([repr(float(t)), repr(float(tau[k])), repr(float(rate[k])), repr(float(cum[k]))])


def build_rate_table(
    tau_c: float,
    n_theta: int = DEFAULT_N_THETA,
    n_tau: int = DEFAULT_N_TAU,
    tau_max: float | None = None,
) -> RateTable:
    """Tabulate the total rate on a uniform tau grid (default ``tau_max = 4*tau_c``)."""
    if not tau_c > 0.0:
        raise ValueError(f"tau_c must be > 0, got {tau_c!r}")
    if n_tau < 2:
        raise ValueError("tau grid needs at least 2 points")
    if tau_max is None:
        tau_max = 4.0 * tau_c
    if not tau_max > 0.0:
        raise ValueError("tau_max must be > 0")
    check_resolution(tau_max, n_theta)

    grid = ThetaGrid.uniform(n_theta)
    tau_grid = np.linspace(0.0, tau_max, n_tau)
    plus = np.zeros(n_tau)
    minus = np.zeros(n_tau)
    weight_p = grid.sin * grid.cos2
    weight_m = (grid.sin * grid.sin2)[::-1]
    # plus[j] = trapz(weight_p * d_j); minus[j] = trapz(weight_m * d_j) after reversing
    for start in range(1, n_tau, 256):
        taus = tau_grid[start:start + 256, None]
        a = 0.5 * taus * (-grid.sin2[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.sin(a) ** 2 / (math.pi * grid.sin2[None, :] ** 2 * (0.5 * taus))
        small = np.abs(a) < _TAYLOR_SWITCH
        d = np.where(small, (taus / (2.0 * math.pi)) * (1.0 - a * a / 3.0), d)
        plus[start:start + 256] = np.trapezoid(d * weight_p, dx=grid.step, axis=1)
        minus[start:start + 256] = np.trapezoid(d * weight_m, dx=grid.step, axis=1)
    pref = 2.0 * math.pi / tau_c
    plus *= pref
    minus *= pref
    return RateTable(
        tau_c=float(tau_c),
        grid=grid,
        tau_grid=tau_grid,
        rate_plus=plus,
        rate_minus=minus,
        cum_plus=_cumtrapz(plus, tau_grid),
        cum_minus=_cumtrapz(minus, tau_grid),
    )


def constant_rate_table(
    rate: float,
    tau_max: float,
    n_tau: int = DEFAULT_N_TAU,
    n_theta: int = DEFAULT_N_THETA,
    tau_c: float = 1.0,
) -> RateTable:
    """Table with a theta- and tau-independent total rate (free-flight test override).

    ``tau_c`` is carried along only for bookkeeping; final-direction sampling
    does not depend on it.
    """
    if not rate > 0.0:
        raise ValueError("rate must be > 0")
    tau_grid = np.linspace(0.0, tau_max, n_tau)
    r = np.full(n_tau, float(rate))
    cum = rate * tau_grid
    return RateTable(
        tau_c=float(tau_c),
        grid=ThetaGrid.uniform(n_theta),
        tau_grid=tau_grid,
        rate_plus=r,
        rate_minus=r.copy(),
        cum_plus=cum,
        cum_minus=cum.copy(),
    )
