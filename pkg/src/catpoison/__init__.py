"""n-gas catalytic surface model on a 1-D lattice, with simulation, drift
certificates for the spread of gas 1 and coupled two-system dynamics."""
__version__ = "0.1.0"

from .lattice import (INFINITE, LEFT_FIRST, RIGHT_FIRST, Boundary, Configuration, Kind,
                      ModelSpec, apply_arrival, is_absorbing, weight)
from .rng import MIXER_ID, derive_stream
from .simulate import empirical_drift, estimate_absorption, run, sweep
from .scores import (ScoreTable, drift, enumerate_blocks, fixed_point_solve, table1,
                     threshold_search, verify_certificate, worst_case_drift, SolverConfig)
from .coupling import JointArrivalLaw, coupled_arrival, monotonicity_check, replay, violation_frequency
