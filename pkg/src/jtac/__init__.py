"""Capacity bounds and numerical capacity for joint time-and-concentration molecular channels."""

from .bounds import (
    BoundConfig,
    BoundReport,
    ConstraintSet,
    Rate,
    evaluate_bounds,
    lower_bound_1,
    lower_bound_2,
    lower_bound_3,
    solve_mu,
    solve_phi,
    timing_rate_given_x,
    upper_bound,
)
from .capacity import (
    CapacityResult,
    DiscreteChannel,
    blahut_arimoto,
    discretize_cb,
    discretize_jtac,
    mutual_information,
    tb_rate,
)
from .channel import (
    ArrivalMatrix,
    ChannelGeometry,
    ChannelParams,
    arrival_matrix,
    arrival_prob,
    c_from_geometry,
    c_table_relation,
)
from .errors import (
    AlphabetSizeError,
    ConfigError,
    ConvergenceError,
    DegenerateVarianceError,
    DomainError,
    InfeasibleConstraintError,
    JTACError,
    NumericalInstabilityError,
    RootNotBracketedError,
)
from .mixture import mixture_entropy_lower

__version__ = "0.1.0"
