"""Scheduling engine for flexible manufacturing systems.

Colored-timed Petri net core, benchmark instance generator, decision-point
environment, solver suite (dispatching heuristics, symbiotic-organisms
search, masked actor-critic policy gradient, brute force) and a benchmark
CLI with validation, Gantt export and figure rendering.
"""

from .builder import MODE_AGV, MODE_TOOLS, FmsNet, build
from .environment import EnvConfig, FmsEnv, StepResult
from .instances import (BENCHMARK_GROUPS, BENCHMARK_SEEDS, Instance,
                        LcgStream, Operation, SeedSet, generate_benchmark,
                        generate_group, generate_instance, instance_digest,
                        lcg_next, lcg_stream, lcg_uniform_int, load_instance,
                        pad_instance, parse_instance, split_jobs,
                        write_instance)
from .petri import (Color, ContractViolation, CTPNet, LivelockError, Place,
                    StructuralError, Token, Transition)
from .trace import (ScheduleTrace, TraceRecord, Violation, export_gantt,
                    parse_gantt, validate)

__version__ = "0.1.0"

__all__ = [
    "MODE_AGV", "MODE_TOOLS", "FmsNet", "build",
    "EnvConfig", "FmsEnv", "StepResult",
    "BENCHMARK_GROUPS", "BENCHMARK_SEEDS", "Instance", "LcgStream",
    "Operation", "SeedSet", "generate_benchmark", "generate_group",
    "generate_instance", "instance_digest", "lcg_next", "lcg_stream",
    "lcg_uniform_int", "load_instance", "pad_instance", "parse_instance",
    "split_jobs", "write_instance",
    "Color", "ContractViolation", "CTPNet", "LivelockError", "Place",
    "StructuralError", "Token", "Transition",
    "ScheduleTrace", "TraceRecord", "Violation", "export_gantt",
    "parse_gantt", "validate",
    "__version__",
]
