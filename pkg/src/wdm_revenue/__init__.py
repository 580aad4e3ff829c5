"""Revenue-maximising wavelength assignment and visit-time allocation.

An optical router node with ``K`` wavelengths serves ``N`` input stations in
frames of length ``C``. Each wavelength cycles through its stations, paying a
switchover before each visit; packets arriving outside a visit wait in a
fiber delay loop where they are retried or dropped. This package evaluates
the expected revenue per frame, assigns stations to wavelengths and splits the
frame into visit times, and ships the exact and Monte Carlo oracles used to
check both.
"""

from .allocator import AllocationProblem, AllocationResult, allocate, inner_allocation_at
from .exact import (
    BaselineStats,
    EnumerationReport,
    EnumerationTooLarge,
    brute_force_solve,
    enumerate_assignments,
    random_baseline,
    sweep_wavelengths,
)
from .heuristic import (
    Assignment,
    InfeasibleInstanceError,
    SolveResult,
    VisitPlan,
    heuristic_solve,
    lpt_assign,
    partition,
    solve_one,
    solve_two,
)
from .instances import InstanceParseError, dump_instance, instance_digest, load_instance, load_table
from .model import (
    ConcavityWarning,
    ExponentialModel,
    Instance,
    ProbabilityModel,
    StationParams,
    TrafficClass,
    drop_prob,
    leave_prob,
    net_revenue,
    retrial_prob,
    revenue_derivative,
    station_revenue,
)
from .simulate import SimConfig, SimReport, eventual_service_prob, simulate_station

__version__ = "0.1.0"
