"""Key rates, worst-case channel maps, simulation and estimation for
single-quadrature Gaussian-modulated coherent-state CVQKD."""

__version__ = "0.1.0"

from .entropy import (condition_on_heterodyne, condition_on_homodyne, g,
                      symplectic_spectrum, von_neumann_entropy)
from .errors import (CalibrationError, CVQKDError, DummySolveError,
                     EstimationError, NoSolutionError, SpectrumError,
                     UnphysicalEnvironmentError, UnphysicalStateError)
from .estimate import (ChannelEstimate, end_to_end_rate_from_data,
                       estimate_channel, estimate_excess_noise,
                       estimate_mutual_info, estimate_preparation_noise,
                       estimate_transmission, mutual_info_from_moments)
from .gaussian import (apply_beamsplitter, apply_squeeze, epr_covariance,
                       is_physical, omega, partial_state)
from .protocol import (ChannelParams, DummyParams, KeyRateResult,
                       ProtocolConfig, SourceParams, build_prepared_state,
                       dual_quadrature_key_rate, holevo_bound, key_rate,
                       mutual_information, propagate_channel,
                       solve_dummy_params)
from .region import (OptimizeResult, RegionMap, SweepPoint, WorstCaseResult,
                     loss_db_to_transmission, map_region, optimize_kappa_p,
                     optimize_mu, physical_t_q_interval, sweep_loss,
                     worst_case_rate, zero_crossing_db)
from .scenario import Scenario, load_scenario
from .simulate import SimConfig, expected_moments, read_records, simulate, write_records

__all__ = [
    "CVQKDError", "CalibrationError", "ChannelEstimate", "ChannelParams",
    "DummyParams", "DummySolveError", "EstimationError", "KeyRateResult",
    "NoSolutionError", "OptimizeResult", "ProtocolConfig", "RegionMap",
    "Scenario", "SimConfig", "SourceParams", "SpectrumError", "SweepPoint",
    "UnphysicalEnvironmentError", "UnphysicalStateError", "WorstCaseResult",
    "apply_beamsplitter", "apply_squeeze", "build_prepared_state",
    "condition_on_heterodyne", "condition_on_homodyne",
    "dual_quadrature_key_rate", "end_to_end_rate_from_data", "epr_covariance",
    "estimate_channel", "estimate_excess_noise", "estimate_mutual_info",
    "estimate_preparation_noise", "estimate_transmission", "expected_moments",
    "g", "holevo_bound", "is_physical", "key_rate", "load_scenario",
    "loss_db_to_transmission", "map_region", "mutual_info_from_moments",
    "mutual_information", "omega", "optimize_kappa_p", "optimize_mu",
    "partial_state", "physical_t_q_interval", "propagate_channel",
    "read_records", "simulate", "solve_dummy_params", "sweep_loss",
    "symplectic_spectrum", "von_neumann_entropy", "worst_case_rate",
    "write_records", "zero_crossing_db",
]
