"""Compressed push-pull gradient tracking over directed networks."""

from .algorithms import (
    AlgoParams,
    AlgoState,
    BcppState,
    CppState,
    bcpp_step,
    cpp_step,
    init_state,
    pushpull_step,
    run,
)
from .compression import CompressedVector, CompressorSpec, bit_cost, c2_of, compress
from .harness import ExperimentConfig, parse_config, run_experiment, write_csv
from .kernels import BACKEND
from .metrics import IterationRecord, consensus_error, weighted_average
from .objectives import LogisticModel, QuadraticModel, constants_mu_L, local_gradient, solve_centralized
from .topology import (
    DirectedGraph,
    MixingMatrices,
    build_mixing_matrices,
    build_ring_plus_random,
    check_assumption2,
    is_strongly_connected,
    perron_vectors,
)

__version__ = "0.1.0"
