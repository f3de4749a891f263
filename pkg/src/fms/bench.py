"""Benchmark orchestration: solver runs, reports, scenarios, ablations.

Everything here is CLI-independent so experiments are scriptable; the CLI
is a thin wrapper.  Wall-clock numbers come from `time.monotonic`; fully
reproducible runs use the evaluation-count budget of the search solvers
instead of wall time.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Optional

from .environment import EnvConfig, FmsEnv
from .instances import Instance, split_jobs
from .solvers import (PpoPolicy, RandomPolicy, SosConfig, heuristic_policy,
                      run_policy, sos_optimize)
from .solvers.ppo import ActorCritic


@dataclass
class RunReport:
    instance: str
    solver: str
    makespan: int
    seconds: float
    config_hash: str
    extra: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        return {"instance": self.instance, "solver": self.solver,
                "makespan": self.makespan, "seconds": round(self.seconds, 4),
                "config_hash": self.config_hash}


def config_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def make_policy(spec: str, seed: int = 0):
    """Parse a solver spec: `fifo+faa`, `random`, or `ppo:<checkpoint>`."""
    if spec.startswith("ppo:"):
        model = ActorCritic.load(spec.split(":", 1)[1])
        return PpoPolicy(model)
    if spec == "random":
        return RandomPolicy(seed=seed)
    if "+" in spec:
        job_rule, agv_rule = spec.split("+", 1)
        return heuristic_policy(job_rule, agv_rule)
    return heuristic_policy(spec)


def run(instance: Instance, solver: str, env_config: EnvConfig,
        seed: int = 0, sos_config: Optional[SosConfig] = None):
    """Drive one solver to terminality; returns (RunReport, trace)."""
    env = FmsEnv(instance, env_config)
    chash = config_hash({"solver": solver, "seed": seed,
                         "env": vars(env_config),
                         "sos": vars(sos_config) if sos_config else None})
    t0 = time.monotonic()
    if solver == "sos":
        cfg = sos_config or SosConfig()
        result = sos_optimize(env, cfg)
        seconds = time.monotonic() - t0
        report = RunReport(instance.name, "sos", result.makespan, seconds,
                           chash, {"evals": result.evals,
                                   "iterations": result.iterations})
    else:
        policy = make_policy(solver, seed)
        makespan, steps = run_policy(env, policy)
        seconds = time.monotonic() - t0
        report = RunReport(instance.name, getattr(policy, "name", solver),
                           makespan, seconds, chash, {"steps": steps})
    return report, env.trace()


def gap(sos_makespan: int, rl_makespan: int) -> float:
    """Improvement of the policy over the search baseline."""
    if sos_makespan == 0:
        return 0.0
    return (sos_makespan - rl_makespan) / sos_makespan


def compare(reports: list) -> list[dict]:
    """Report rows plus a gap column when a ppo/sos pair is present."""
    rows = [r.as_row() for r in reports]
    by_solver = {r.solver: r for r in reports}
    if "ppo" in by_solver and "sos" in by_solver:
        g = gap(by_solver["sos"].makespan, by_solver["ppo"].makespan)
        for row in rows:
            row["gap_vs_sos"] = round(g, 4)
    return rows


def dynamic_scenario(partitions: list[Instance], env_config: EnvConfig,
                     policy, sos_config: SosConfig):
    """Feed job batches sequentially; search restarts, the policy does not.

    Returns {solver: [(partition_index, cum_makespan, cum_seconds), ...]}.
    A single partition degenerates to one plain run per solver.
    """
    if not partitions:
        raise ValueError("at least one partition is required")
    out = {"ppo": [], "sos": []}
    cum_mk = {"ppo": 0, "sos": 0}
    cum_s = {"ppo": 0.0, "sos": 0.0}
    for idx, part in enumerate(partitions, start=1):
        env = FmsEnv(part, env_config)
        t0 = time.monotonic()
        mk, _ = run_policy(env, policy)
        cum_s["ppo"] += time.monotonic() - t0
        cum_mk["ppo"] += mk
        out["ppo"].append((idx, cum_mk["ppo"], cum_s["ppo"]))

        env = FmsEnv(part, env_config)
        t0 = time.monotonic()
        result = sos_optimize(env, sos_config)
        cum_s["sos"] += time.monotonic() - t0
        cum_mk["sos"] += result.makespan
        out["sos"].append((idx, cum_mk["sos"], cum_s["sos"]))
    return out


def split_for_dynamic(instance: Instance, partitions: int) -> list[Instance]:
    return split_jobs(instance, partitions)


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    keys = list(rows[0].keys())
    for row in rows[1:]:
        for k in row:
            if k not in keys:
                keys.append(k)
    lines = [",".join(keys)]
    for row in rows:
        lines.append(",".join(str(row.get(k, "")) for k in keys))
    return "\n".join(lines) + "\n"
