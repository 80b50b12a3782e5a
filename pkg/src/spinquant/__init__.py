"""Spin reorientation by coherence-broadened inelastic scattering.

A spin precessing about a uniform field builds up a density of states that
narrows around the two field eigendirections; scattering sampled against
that density drives an initially isotropic ensemble toward theta = 0 and pi.
"""
from .engine import (
    NO_SCATTER,
    DegenerateWeightError,
    Path,
    PathBatch,
    PathConfig,
    PathEvent,
    direction_at,
    sample_final_direction,
    sample_flight_time,
    sample_initial,
    simulate_ensemble,
    simulate_path,
)
from .rates import (
    QuadratureError,
    RateTable,
    broadened_delta,
    build_rate_table,
    constant_rate_table,
    differential_rate,
    dos_rho_bar,
    total_rate,
    transition_dos,
)
from .rng import RngStream
from .spin import SpinDirection, Spinor, coherence_term, energy, make_spinor, precess, projector

__version__ = "0.1.0"
