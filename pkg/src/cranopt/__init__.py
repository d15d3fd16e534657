"""Joint wireless power control and fronthaul rate allocation for uplink OFDMA C-RAN."""

from .benchmarks import BenchmarkScheme, run_benchmark
from .harness import ScenarioTemplate, generate_scenario, preset, run_sweep
from .model import (
    FronthaulAllocation,
    PowerAllocation,
    QuantModel,
    Scenario,
    ScenarioError,
    SolveReport,
    check_feasible,
    gaussian_sum_rate,
    uniform_sum_rate,
)
from .multi import algorithm_three, solve_p2_multi
from .quantizer import QuantizerSpec, monte_carlo_noise_power
from .single_link import (
    algorithm_one,
    cutset_bound,
    gap_reference_solutions,
    solve_p2_noint_single,
    solve_p2_single,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkScheme",
    "FronthaulAllocation",
    "PowerAllocation",
    "QuantModel",
    "QuantizerSpec",
    "Scenario",
    "ScenarioError",
    "ScenarioTemplate",
    "SolveReport",
    "algorithm_one",
    "algorithm_three",
    "check_feasible",
    "cutset_bound",
    "gap_reference_solutions",
    "gaussian_sum_rate",
    "generate_scenario",
    "monte_carlo_noise_power",
    "preset",
    "run_benchmark",
    "run_sweep",
    "solve_p2_multi",
    "solve_p2_noint_single",
    "solve_p2_single",
    "uniform_sum_rate",
]
