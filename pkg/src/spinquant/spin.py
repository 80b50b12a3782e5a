"""Closed-form spin-1/2 algebra for precession about the field axis.

Units: hbar = omega = 1, so times are ``tau = omega * t`` and energies are
in units of ``hbar * omega``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

__all__ = [
    "SpinDirection",
    "Spinor",
    "make_spinor",
    "precess",
    "energy",
    "coherence_term",
    "projector",
]


def _check_theta(theta: float) -> None:
    if not (0.0 <= theta <= math.pi):
        raise ValueError(f"theta must lie in [0, pi], got {theta!r}")


@dataclass(frozen=True)
class SpinDirection:
    """Point on the Bloch sphere plus the coherence clock.

    Attributes
    ----------
    theta : float
        Polar angle in [0, pi].
    phi : float
        Azimuth, reduced into [0, 2*pi) on construction.
    tau_since_scatter : float
        Dimensionless time elapsed since the last scattering event.
    """

    theta: float
    phi: float = 0.0
    tau_since_scatter: float = 0.0

    def __post_init__(self):
        _check_theta(self.theta)
        if not self.tau_since_scatter >= 0.0:
            raise ValueError(f"tau_since_scatter must be >= 0, got {self.tau_since_scatter!r}")
        phi = math.fmod(self.phi, TWO_PI)
        if phi < 0.0:
            phi += TWO_PI
        if phi >= TWO_PI:  # fmod of a tiny negative number can round up
            phi = 0.0
        object.__setattr__(self, "phi", phi)


@dataclass(frozen=True)
class Spinor:
    c_plus: complex
    c_minus: complex

    def norm2(self) -> float:
        return abs(self.c_plus) ** 2 + abs(self.c_minus) ** 2

    def as_array(self) -> np.ndarray:
        return np.array([self.c_plus, self.c_minus], dtype=complex)


def make_spinor(direction: SpinDirection) -> Spinor:
    """Amplitudes on |+> and |-> of the state pointing along (theta, phi)."""
    _check_theta(direction.theta)
    half = 0.5 * direction.theta
    hp = 0.5 * direction.phi
    return Spinor(
        c_plus=math.cos(half) * complex(math.cos(hp), -math.sin(hp)),
        c_minus=math.sin(half) * complex(math.cos(hp), math.sin(hp)),
    )


def precess(direction: SpinDirection, dtau: float) -> SpinDirection:
    """Free precession for a dimensionless time ``dtau`` (theta is conserved)."""
    if dtau < 0.0:
        raise ValueError("dtau must be >= 0")
    return SpinDirection(
        direction.theta,
        direction.phi + dtau,
        direction.tau_since_scatter + dtau,
    )


def energy(theta):
    """Expectation value of the Zeeman energy, cos(theta)/2.

    Accepts scalars or arrays.
    """
    th = np.asarray(theta, dtype=float)
    if np.any((th < 0.0) | (th > math.pi)) or np.any(np.isnan(th)):
        raise ValueError("theta must lie in [0, pi]")
    out = 0.5 * np.cos(th)
    return float(out) if out.ndim == 0 else out


def coherence_term(direction: SpinDirection) -> complex:
    # (1,2) element of |theta,phi><theta,phi|
    r = 0.5 * math.sin(direction.theta)
    return complex(r * math.cos(direction.phi), -r * math.sin(direction.phi))


def projector(direction: SpinDirection) -> np.ndarray:
    """Pure-state density matrix in the (|+>, |->) basis."""
    c = math.cos(0.5 * direction.theta) ** 2
    off = coherence_term(direction)
    return np.array([[c, off], [off.conjugate(), 1.0 - c]], dtype=complex)
