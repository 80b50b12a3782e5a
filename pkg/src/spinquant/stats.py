"""Ensemble reductions: theta histograms, averaged density matrix, coherence.

Two coherence measures are reported at every time:

* ``coherence_mag`` -- the mean per-spin magnitude ``<|rho_12^(j)|> = <sin(theta)/2>``;
  starts at 1/pi for an isotropic ensemble and vanishes once every spin sits
  on a pole;
* ``complex_coherence`` -- the off-diagonal element of the averaged density
  matrix, ``<sin(theta)/2 * exp(-i phi)>``, which is zero up to sampling
  noise whenever the azimuths are uniform.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .engine import PathBatch

__all__ = [
    "EnsembleSnapshot",
    "CoherencePoint",
    "DecileCounts",
    "snapshot",
    "snapshot_from_angles",
    "coherence_series",
    "mixedness_check",
    "decile_counts",
    "write_histogram_csv",
    "write_coherence_csv",
    "HISTOGRAM_HEADER",
    "COHERENCE_HEADER",
]

HISTOGRAM_HEADER = ("bin_center", "count", "normalized_density")
COHERENCE_HEADER = ("tau_over_tc", "coherence_mag", "complex_avg_re", "complex_avg_im")
DEFAULT_BINS = 50


@dataclass(frozen=True, eq=False)
class EnsembleSnapshot:
    tau_lab: float
    theta_histogram: np.ndarray
    bin_edges: np.ndarray
    n_paths: int
    rho_matrix: np.ndarray
    coherence_mag: float
    coherence_stderr: float
    theta: np.ndarray
    phi: np.ndarray

    @property
    def complex_coherence(self) -> complex:
        return complex(self.rho_matrix[0, 1])

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])


@dataclass(frozen=True)
class CoherencePoint:
    tau_lab: float
    coherence_mag: float
    stderr: float
    complex_avg: complex


@dataclass(frozen=True)
class DecileCounts:
    """Counts in the two polar deciles and in the equatorial decile."""

    low: int  # theta < pi/10
    high: int  # theta > 9pi/10
    central: int  # |theta - pi/2| < pi/20

    @property
    def ratio(self) -> float:
        """Smaller edge count over the central count."""
        if self.central == 0:
            return math.inf
        return min(self.low, self.high) / self.central

    @property
    def ratio_sigma(self) -> float:
        # Poisson errors propagated through the ratio
        edge = min(self.low, self.high)
        if self.central == 0 or edge == 0:
            return math.inf
        return self.ratio * math.sqrt(1.0 / edge + 1.0 / self.central)


def decile_counts(theta) -> DecileCounts:
    theta = np.asarray(theta)
    return DecileCounts(
        low=int(np.count_nonzero(theta < 0.1 * math.pi)),
        high=int(np.count_nonzero(theta > 0.9 * math.pi)),
        central=int(np.count_nonzero(np.abs(theta - 0.5 * math.pi) < 0.05 * math.pi)),
    )


def snapshot_from_angles(theta, phi, tau_lab: float = 0.0, n_bins: int = DEFAULT_BINS) -> EnsembleSnapshot:
    """Reduce explicit ensemble angles (theta_j, phi_j) to a snapshot."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    n = theta.size
    if n == 0:
        raise ValueError("empty ensemble")
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    edges = np.linspace(0.0, math.pi, n_bins + 1)
    counts, _ = np.histogram(theta, bins=edges)
    half = 0.5 * theta
    p_up = float(np.mean(np.cos(half) ** 2))
    p_down = float(np.mean(np.sin(half) ** 2))
    mag = 0.5 * np.sin(theta)
    off = complex(np.mean(mag * np.cos(phi)), -np.mean(mag * np.sin(phi)))
    rho = np.array([[p_up, off], [off.conjugate(), p_down]], dtype=complex)
    stderr = float(np.std(mag, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return EnsembleSnapshot(
        tau_lab=float(tau_lab),
        theta_histogram=counts.astype(np.int64),
        bin_edges=edges,
        n_paths=n,
        rho_matrix=rho,
        coherence_mag=float(np.mean(mag)),
        coherence_stderr=stderr,
        theta=theta,
        phi=phi,
    )


def _as_batch(paths) -> PathBatch:
    if isinstance(paths, PathBatch):
        return paths
    return PathBatch.from_paths(paths)


def snapshot(paths, tau_lab: float, n_bins: int = DEFAULT_BINS) -> EnsembleSnapshot:
    """Ensemble state at lab time ``tau_lab``.

    ``paths`` is a :class:`~spinquant.engine.PathBatch` or any iterable of
    :class:`~spinquant.engine.Path`; ``tau_lab`` must lie within every
    path's horizon.
    """
    batch = _as_batch(paths)
    theta, phi, _ = batch.directions_at(tau_lab)
    return snapshot_from_angles(theta, phi, tau_lab, n_bins)


def coherence_series(paths, snapshot_times) -> list[CoherencePoint]:
    batch = _as_batch(paths)
    out = []
    for t in snapshot_times:
        s = snapshot(batch, float(t), n_bins=1)
        out.append(CoherencePoint(s.tau_lab, s.coherence_mag, s.coherence_stderr, s.complex_coherence))
    return out


def mixedness_check(snap: EnsembleSnapshot) -> float:
    """Max-norm distance of the averaged density matrix from identity/2."""
    return float(np.max(np.abs(snap.rho_matrix - 0.5 * np.eye(2))))


def write_histogram_csv(snap: EnsembleSnapshot, path) -> None:
    width = np.diff(snap.bin_edges)
    dens = snap.theta_histogram / (snap.n_paths * width)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTOGRAM_HEADER)
        for c, n, d in zip(snap.bin_centers, snap.theta_histogram, dens):
            w.writerow([repr(float(c)), int(n), repr(float(d))])


def write_coherence_csv(series, tau_c: float, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COHERENCE_HEADER)
        for pt in series:
            w.writerow([
                repr(pt.tau_lab / tau_c),
                repr(pt.coherence_mag),
                repr(pt.complex_avg.real),
                repr(pt.complex_avg.imag),
            ])
