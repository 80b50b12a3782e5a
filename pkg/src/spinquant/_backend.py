"""Kernel selection: compiled extension when importable, pure Python otherwise.

``SPINQUANT_BACKEND=python`` (or ``native``) overrides the automatic choice.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

__all__ = ["available", "resolve", "chunk_runner", "default_backend"]


def available() -> list[str]:
    return (["native"] if _ckernels is not None else []) + ["python"]


def default_backend() -> str:
    return resolve(None)


def resolve(name: str | None) -> str:
    name = name or os.environ.get("SPINQUANT_BACKEND") or "auto"
    if name == "auto":
        return "native" if _ckernels is not None else "python"
    if name == "native" and _ckernels is None:
        raise RuntimeError("compiled kernel spinquant._ckernels is not built")
    if name not in ("native", "python"):
        raise ValueError(f"unknown backend {name!r}")
    return name


def _native_chunk(path_indices, master_seed, config, table):
    from .engine import PathBatch

    g = table.grid
    init = None
    if config.initial is not None:
        init = (config.initial.theta, config.initial.phi)
    idx = np.ascontiguousarray(path_indices, dtype=np.int64)
    th0, ph0, counts, tau, thb, phb, tha, pha = _ckernels.simulate_chunk_arrays(
        idx, master_seed & 0xFFFFFFFFFFFFFFFF, config.tau_end,
        table.tau_grid, table.cum_plus, table.cum_minus,
        g.theta, g.sin, g.sin2, g.cos2, g.step, init,
    )
    return PathBatch(
        tau_end=config.tau_end,
        path_index=idx,
        theta0=th0,
        phi0=ph0,
        offsets=np.concatenate([[0], np.cumsum(counts)]).astype(np.int64),
        ev_tau=tau,
        ev_theta_before=thb,
        ev_phi_before=phb,
        ev_theta_after=tha,
        ev_phi_after=pha,
        backend="native",
    )


def chunk_runner(name: str):
    if name == "native":
        return _native_chunk
    return _pykernels.simulate_chunk


def sample_theta_prime_batch(name: str, theta_from, tau_f, table, u) -> np.ndarray:
    if name == "native":
        g = table.grid
        return _ckernels.sample_theta_prime_batch(
            np.ascontiguousarray(theta_from, dtype=float), np.ascontiguousarray(tau_f, dtype=float),
            g.theta, g.sin, g.sin2, g.cos2, g.step, np.ascontiguousarray(u, dtype=float),
        )
    return _pykernels.sample_theta_prime_batch(theta_from, tau_f, table, u)


def philox_raw(name: str, master_seed: int, path_index: int, n: int) -> np.ndarray:
    if name == "native":
        return _ckernels.philox_raw(master_seed, path_index, n)
    return _pykernels.philox_raw(master_seed, path_index, n)
