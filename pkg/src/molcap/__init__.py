"""Capacity of ligand-receptor molecular communication channels."""

from .bounds import (
    BoundParams,
    MacBoundParams,
    RatePoint,
    kl_upper_bound,
    lemma2_individual_capacities,
    lemma3_equal_rate_point,
    lemma3_noise_inner,
    lemma8_smsr_inner,
    lower_bound_binary,
    symmetrized_kl_covariance,
)
from .capacity import (
    CapacityResult,
    InputConstraint,
    blahut_arimoto,
    exhaustive_binary_capacity,
    mac_total_capacity,
    mutual_information,
    scenario_capacity,
)
from .channels import DiscreteChannel, InputGrid, ScenarioSpec, build_bic, build_channel
from .errors import ConfigError, ConvergenceError, DomainError, UnsupportedError
from .kinetics import (
    ConcentrationVector,
    Kinetics,
    binding_probability,
    blocking_steady_state,
    labeling_steady_state,
    smsr_binding,
)
from .simulate import ChainModel, OccupancyEstimate, gillespie_occupancy

__version__ = "0.1.0"
