"""Simulation and numerics for GRAND customer-to-server packing policies."""

__version__ = "0.1.0"

from .analysis import (
    SteadyStateEstimate,
    compare_sim_fluid,
    conjecture_experiment,
    steady_state,
    type_moments,
)
from .fluid import (
    FluidIntegrationError,
    FluidSystem,
    drift,
    integrate,
    lyapunov,
    lyapunov_derivative,
    lyapunov_derivative_pairwise,
)
from .linprog import SolverError
from .optimal import (
    OperatingPoint,
    a_sweep,
    distance_to_optimal,
    solve_entropy,
    solve_fixed_point,
    solve_lp,
)
from .packing import ConfigSet, build_from_maximal, build_vector_packing, edges
from .policies import GrandAZ, GrandConst, GrandPower, placement_distribution, zero_servers
from .scenario import Scenario, ScenarioError, load_scenario
from .simulator import EventRNG, SimState, SystemSpec, initial_state, replicate, run, step
from .trajectory import Trajectory
