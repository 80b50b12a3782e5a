"""Monte Carlo dynamics: free precession interrupted by inelastic scattering.

One path runs:

1. draw an initial direction (theta uniform on [0, pi], phi uniform);
2. draw a flight time by inverting the tabulated cumulative rate against
   ``-log r``;
3. if the flight ends before the horizon, precess to the event and draw the
   new direction from the transition density; the coherence clock restarts;
4. repeat from 2.

The functions here are the reference (pure Python) route.  Batches of paths
go through :func:`simulate_ensemble`, which dispatches to the compiled kernel
when it is available; both draw from the same counter-based streams.
"""
from __future__ import annotations

import bisect
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .rates import RateTable, _delta_raw
from .rng import RngStream
from .spin import TWO_PI, SpinDirection, precess

__all__ = [
    "NO_SCATTER",
    "DegenerateWeightError",
    "PathEvent",
    "Path",
    "PathConfig",
    "PathBatch",
    "sample_initial",
    "sample_flight_time",
    "sample_final_direction",
    "simulate_path",
    "direction_at",
    "simulate_ensemble",
]

#: flight-time sentinel: no scattering before the end of the rate table
NO_SCATTER = math.inf


class DegenerateWeightError(ArithmeticError):
    """All transitions out of the current direction have (numerically) zero weight."""


@dataclass(frozen=True)
class PathEvent:
    tau_lab: float
    dir_before: SpinDirection
    dir_after: SpinDirection


@dataclass(frozen=True)
class Path:
    initial: SpinDirection
    events: tuple[PathEvent, ...]
    tau_end: float
    path_index: int = 0


@dataclass(frozen=True)
class PathConfig:
    """Per-path settings.

    ``initial`` pins the starting direction instead of drawing it; the
    stream then starts directly with the first flight time.
    """

    tau_end: float
    initial: SpinDirection | None = None

    def __post_init__(self):
        if not self.tau_end > 0.0:
            raise ValueError("tau_end must be > 0")


def sample_initial(rng: RngStream) -> SpinDirection:
    theta = math.pi * rng.uniform()
    phi = TWO_PI * rng.uniform()
    return SpinDirection(theta, phi, 0.0)


def _direction_weights(theta: float) -> tuple[float, float]:
    c = math.cos(0.5 * theta)
    cw = c * c
    return cw, 1.0 - cw


def sample_flight_time(direction: SpinDirection, table: RateTable, rng: RngStream) -> float:
    """Solve ``Lambda(theta, tau_f) = -log r`` on the tabulated cumulative rate.

    Returns :data:`NO_SCATTER` when ``-log r`` exceeds the table's last entry.
    """
    cum = table.cumulative(direction.theta)
    target = -math.log(rng.uniform())
    if target > cum[-1]:
        return NO_SCATTER
    hi = int(np.searchsorted(cum, target, side="left"))
    hi = max(hi, 1)
    lo = hi - 1
    tg = table.tau_grid
    return float(tg[lo] + (target - cum[lo]) / (cum[hi] - cum[lo]) * (tg[hi] - tg[lo]))


def _sample_theta_prime(theta_from: float, tau_f: float, table: RateTable, u: float) -> float:
    grid = table.grid
    cw, sw = _direction_weights(theta_from)
    d = _delta_raw(-grid.sin2, tau_f)
    w = grid.sin * (cw * grid.cos2 * d + sw * grid.sin2 * d[::-1])
    cdf = np.zeros_like(w)
    np.cumsum(0.5 * (w[1:] + w[:-1]) * grid.step, out=cdf[1:])
    total = cdf[-1]
    if not (total > 0.0 and math.isfinite(total)):
        raise DegenerateWeightError(
            f"transition weight out of theta={theta_from!r} at tau={tau_f!r} is {total!r}"
        )
    target = u * total
    hi = max(int(np.searchsorted(cdf, target, side="left")), 1)
    lo = hi - 1
    den = cdf[hi] - cdf[lo]
    th = grid.theta[lo]
    if den > 0.0:
        th = th + (target - cdf[lo]) / den * grid.step
    return float(min(max(th, 0.0), math.pi))


def sample_final_direction(
    dir_from: SpinDirection, tau_f: float, table: RateTable, rng: RngStream
) -> SpinDirection:
    """Draw the post-scattering direction.

    theta' follows ``sin(theta') * transition_dos(theta, theta', tau_f)`` via a
    trapezoid CDF on the table's theta grid; phi' is uniform.  Two draws are
    consumed even when :class:`DegenerateWeightError` is raised.
    """
    if not tau_f > 0.0:
        raise ValueError("tau_f must be > 0")
    u_theta = rng.uniform()
    u_phi = rng.uniform()
    theta = _sample_theta_prime(dir_from.theta, tau_f, table, u_theta)
    return SpinDirection(theta, TWO_PI * u_phi, 0.0)


def simulate_path(config: PathConfig, table: RateTable, rng: RngStream) -> Path:
    d = config.initial if config.initial is not None else sample_initial(rng)
    if d.tau_since_scatter != 0.0:
        d = SpinDirection(d.theta, d.phi, 0.0)
    initial = d
    t = 0.0
    events = []
    while True:
        tau_f = sample_flight_time(d, table, rng)
        if t + tau_f > config.tau_end:
            break
        t = t + tau_f
        before = precess(d, tau_f)
        try:
            after = sample_final_direction(before, tau_f, table, rng)
        except DegenerateWeightError:
            after = SpinDirection(before.theta, before.phi, 0.0)
        events.append(PathEvent(t, before, after))
        d = after
    return Path(initial, tuple(events), float(config.tau_end), rng.path_index)


def direction_at(path: Path, tau_lab: float) -> SpinDirection:
    """Direction at lab time ``tau_lab``; right-continuous at event times."""
    if not (0.0 <= tau_lab <= path.tau_end):
        raise ValueError(f"tau_lab={tau_lab!r} outside [0, {path.tau_end!r}]")
    times = [e.tau_lab for e in path.events]
    k = bisect.bisect_right(times, tau_lab)
    if k == 0:
        return precess(path.initial, tau_lab)
    ev = path.events[k - 1]
    return precess(ev.dir_after, tau_lab - ev.tau_lab)


@dataclass(frozen=True, eq=False)
class PathBatch:
    """Columnar store for many paths, ordered by path index.

    Events of path ``i`` occupy ``offsets[i]:offsets[i+1]`` of the ``ev_*``
    arrays.
    """

    tau_end: float
    path_index: np.ndarray
    theta0: np.ndarray
    phi0: np.ndarray
    offsets: np.ndarray
    ev_tau: np.ndarray
    ev_theta_before: np.ndarray
    ev_phi_before: np.ndarray
    ev_theta_after: np.ndarray
    ev_phi_after: np.ndarray
    backend: str = field(default="python", compare=False)

    def __len__(self):
        return int(self.path_index.size)

    @property
    def n_paths(self) -> int:
        return len(self)

    @property
    def event_counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    def path(self, i: int) -> Path:
        a, b = int(self.offsets[i]), int(self.offsets[i + 1])
        events = []
        t_prev = 0.0
        for k in range(a, b):
            t = float(self.ev_tau[k])
            before = SpinDirection(float(self.ev_theta_before[k]), float(self.ev_phi_before[k]), t - t_prev)
            after = SpinDirection(float(self.ev_theta_after[k]), float(self.ev_phi_after[k]), 0.0)
            events.append(PathEvent(t, before, after))
            t_prev = t
        return Path(
            SpinDirection(float(self.theta0[i]), float(self.phi0[i]), 0.0),
            tuple(events),
            self.tau_end,
            int(self.path_index[i]),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self.path(i)

    def directions_at(self, tau_lab: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized :func:`direction_at`: arrays ``(theta, phi, tau_since_scatter)``."""
        if not (0.0 <= tau_lab <= self.tau_end):
            raise ValueError(f"tau_lab={tau_lab!r} outside [0, {self.tau_end!r}]")
        seen = np.concatenate([[0], np.cumsum(self.ev_tau <= tau_lab)])
        k = seen[self.offsets[1:]] - seen[self.offsets[:-1]]
        has = k > 0
        last = np.where(has, self.offsets[:-1] + k - 1, 0)
        if self.ev_tau.size:
            theta = np.where(has, self.ev_theta_after[last], self.theta0)
            phi_base = np.where(has, self.ev_phi_after[last], self.phi0)
            t_base = np.where(has, self.ev_tau[last], 0.0)
        else:
            theta, phi_base, t_base = self.theta0.copy(), self.phi0.copy(), np.zeros(len(self))
        since = tau_lab - t_base
        phi = np.fmod(phi_base + since, TWO_PI)
        return theta, phi, since

    @classmethod
    def from_paths(cls, paths, tau_end: float | None = None) -> "PathBatch":
        paths = list(paths)
        if tau_end is None:
            tau_end = min(p.tau_end for p in paths)
        counts = np.array([len(p.events) for p in paths], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        evs = [e for p in paths for e in p.events]
        return cls(
            tau_end=float(tau_end),
            path_index=np.array([p.path_index for p in paths], dtype=np.int64),
            theta0=np.array([p.initial.theta for p in paths]),
            phi0=np.array([p.initial.phi for p in paths]),
            offsets=offsets,
            ev_tau=np.array([e.tau_lab for e in evs], dtype=float),
            ev_theta_before=np.array([e.dir_before.theta for e in evs], dtype=float),
            ev_phi_before=np.array([e.dir_before.phi for e in evs], dtype=float),
            ev_theta_after=np.array([e.dir_after.theta for e in evs], dtype=float),
            ev_phi_after=np.array([e.dir_after.phi for e in evs], dtype=float),
        )

    @classmethod
    def concatenate(cls, parts, tau_end: float, backend: str) -> "PathBatch":
        counts = np.concatenate([np.diff(p.offsets) for p in parts])
        offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

        def cat(name):
            return np.concatenate([getattr(p, name) for p in parts])

        return cls(
            tau_end=float(tau_end),
            path_index=cat("path_index"),
            theta0=cat("theta0"),
            phi0=cat("phi0"),
            offsets=offsets,
            ev_tau=cat("ev_tau"),
            ev_theta_before=cat("ev_theta_before"),
            ev_phi_before=cat("ev_phi_before"),
            ev_theta_after=cat("ev_theta_after"),
            ev_phi_after=cat("ev_phi_after"),
            backend=backend,
        )


def simulate_ensemble(
    n_paths: int,
    table: RateTable,
    tau_end: float,
    master_seed: int,
    threads: int = 1,
    backend: str | None = None,
    initial: SpinDirection | None = None,
    first_index: int = 0,
    chunk_size: int = 1024,
) -> PathBatch:
    """Simulate paths ``first_index .. first_index + n_paths - 1``.

    Chunks are distributed over ``threads`` workers; each path depends only on
    ``(master_seed, path_index)`` so the result is independent of ``threads``.
    """
    from . import _backend

    if n_paths <= 0:
        raise ValueError("n_paths must be positive")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    name = _backend.resolve(backend)
    run = _backend.chunk_runner(name)
    cfg = PathConfig(float(tau_end), initial)
    indices = np.arange(first_index, first_index + n_paths, dtype=np.int64)
    chunks = [indices[i:i + chunk_size] for i in range(0, n_paths, chunk_size)]

    def job(idx):
        return run(idx, int(master_seed), cfg, table)

    if threads == 1:
        parts = [job(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, chunks))
    return PathBatch.concatenate(parts, cfg.tau_end, name)
