"""Experiment orchestration and output files."""
from __future__ import annotations

import csv
import json
import logging
import math
import platform
import time
from pathlib import Path as FsPath

import numpy as np

from . import __version__, _backend
from .config import RunConfig
from .engine import PathBatch, simulate_ensemble
from .rates import build_rate_table, dos_rho_bar
from .stats import (
    coherence_series,
    decile_counts,
    mixedness_check,
    snapshot,
    write_coherence_csv,
    write_histogram_csv,
)

log = logging.getLogger(__name__)

__all__ = [
    "run_experiment",
    "run_sweep",
    "write_dos_csv",
    "write_event_log_csv",
    "histogram_filename",
    "DOS_HEADER",
    "EVENT_LOG_HEADER",
    "N_SAMPLE_PATHS",
    "DOS_TAUS",
]

DOS_HEADER = ("tau", "theta", "rho_bar")
EVENT_LOG_HEADER = ("path_index", "event_index", "tau_lab", "theta_before", "theta_after", "phi_after")
N_SAMPLE_PATHS = 8
DOS_TAUS = tuple(k * math.pi for k in range(1, 11))


def histogram_filename(t_over_tc: float) -> str:
    return f"hist_{t_over_tc:g}.csv"


def write_dos_csv(path, taus=DOS_TAUS, n_theta: int = 181) -> None:
    """Density-of-states curves rho_bar(theta, tau) for each tau."""
    theta = np.linspace(0.0, math.pi, n_theta)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DOS_HEADER)
        for tau in taus:
            rho = dos_rho_bar(theta, tau)
            for th, r in zip(theta, rho):
                w.writerow([repr(float(tau)), repr(float(th)), repr(float(r))])


def write_event_log_csv(batch: PathBatch, path, n_paths: int | None = None) -> None:
    """Per-path event log; ``event_index`` 0 is the initial state at tau_lab = 0."""
    n = len(batch) if n_paths is None else min(n_paths, len(batch))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_LOG_HEADER)
        for i in range(n):
            pid = int(batch.path_index[i])
            th0, ph0 = float(batch.theta0[i]), float(batch.phi0[i])
            w.writerow([pid, 0, repr(0.0), repr(th0), repr(th0), repr(ph0)])
            for j, k in enumerate(range(batch.offsets[i], batch.offsets[i + 1]), start=1):
                w.writerow([
                    pid, j, repr(float(batch.ev_tau[k])),
                    repr(float(batch.ev_theta_before[k])),
                    repr(float(batch.ev_theta_after[k])),
                    repr(float(batch.ev_phi_after[k])),
                ])


def run_experiment(config: RunConfig, threads: int = 1, backend: str | None = None) -> dict:
    """Build the rate table, simulate the ensemble and write every output file.

    Returns the manifest that is also written to ``manifest.json``.
    """
    config.check()
    t_start = time.perf_counter()
    out = FsPath(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    tau_c = config.tau_c
    tau_end = config.tau_end * tau_c
    backend = _backend.resolve(backend)

    table = build_rate_table(
        tau_c,
        n_theta=config.n_theta_grid,
        n_tau=config.n_tau_grid,
        tau_max=max(4.0, config.tau_end) * tau_c,
    )
    log.info("rate table: tau_c=%g, tau_max=%g", tau_c, table.tau_max)
    batch = simulate_ensemble(
        config.n_paths, table, tau_end, config.master_seed, threads=threads, backend=backend
    )
    log.info("simulated %d paths, %d events", len(batch), batch.ev_tau.size)

    files = []
    write_dos_csv(out / "dos_curves.csv")
    files.append("dos_curves.csv")
    write_event_log_csv(batch, out / "sample_paths.csv", N_SAMPLE_PATHS)
    files.append("sample_paths.csv")

    snaps = []
    for t in config.snapshot_times:
        s = snapshot(batch, t * tau_c, config.n_theta_bins)
        name = histogram_filename(t)
        write_histogram_csv(s, out / name)
        files.append(name)
        dc = decile_counts(s.theta)
        snaps.append({
            "t_over_tc": t,
            "file": name,
            "coherence_mag": s.coherence_mag,
            "coherence_stderr": s.coherence_stderr,
            "complex_coherence": [s.complex_coherence.real, s.complex_coherence.imag],
            "mixedness": mixedness_check(s),
            "decile_low": dc.low,
            "decile_high": dc.high,
            "decile_central": dc.central,
            "edge_central_ratio": dc.ratio,
        })
    series = coherence_series(batch, [t * tau_c for t in config.snapshot_times])
    write_coherence_csv(series, tau_c, out / "coherence.csv")
    files.append("coherence.csv")

    manifest = {
        "config": config.to_dict(),
        "master_seed": config.master_seed,
        "threads": threads,
        "versions": {
            "spinquant": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "backend": backend,
        },
        "wall_time_s": time.perf_counter() - t_start,
        "summary": {
            "tau_c": tau_c,
            "tau_end": tau_end,
            "table_tau_max": table.tau_max,
            "n_events": int(batch.ev_tau.size),
            "mean_events_per_path": float(batch.ev_tau.size / len(batch)),
            "snapshots": snaps,
        },
        "outputs": files + ["manifest.json"],
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def run_sweep(config: RunConfig, ratios, threads: int = 1, backend: str | None = None) -> list[dict]:
    """One experiment per t_c/(2 pi/omega) value, each in ``<output_dir>/ratio_<r>``."""
    base = FsPath(config.output_dir)
    manifests = []
    for r in ratios:
        cfg = RunConfig(**{**config.to_dict(), "tau_c_over_period": float(r),
                           "output_dir": str(base / f"ratio_{r:g}")})
        manifests.append(run_experiment(cfg, threads=threads, backend=backend))
    base.mkdir(parents=True, exist_ok=True)
    with open(base / "sweep.json", "w") as fh:
        json.dump({"ratios": [float(r) for r in ratios],
                   "runs": [m["config"]["output_dir"] for m in manifests]}, fh, indent=2)
        fh.write("\n")
    return manifests
