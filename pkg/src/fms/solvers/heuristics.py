"""Dispatching rules: twelve job-selection heuristics, two AGV rules.

A heuristic policy is a pure function of the decision-point state: when a
vehicle assignment is pending it applies the AGV rule to the staged head
token, otherwise it scores the mask-enabled jobs and picks the extremum.
Ties always break toward the lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass


def _job_stats(env, i):
    """(next_duration, remaining_ops, remaining_work) for job i."""
    queue = env.net.places[env.layout.job_queue[i]].tokens
    nxt = queue[0].process_time if queue else 0
    return nxt, len(queue), sum(t.process_time for t in queue)


def _totals(env, i):
    ops = env.instance.jobs[i]
    return len(ops), sum(op.duration for op in ops)


# each rule maps (env, job) -> score; the policy picks the minimum score,
# so "longest/most" rules negate
JOB_RULES = {
    "fifo": lambda env, i: (0, i),  # earliest entry; all jobs enter at 0
    "sps": lambda env, i: _totals(env, i)[0],
    "lps": lambda env, i: -_totals(env, i)[0],
    "sptn": lambda env, i: _job_stats(env, i)[0],
    "lptn": lambda env, i: -_job_stats(env, i)[0],
    "mtwr": lambda env, i: -_job_stats(env, i)[2],
    "ltwr": lambda env, i: _job_stats(env, i)[2],
    "lwt": lambda env, i: env.fms.ctx.ready_since[i] - env.net.clock,
    "spt": lambda env, i: _totals(env, i)[1],
    "lpt": lambda env, i: -_totals(env, i)[1],
    "spsr": lambda env, i: _job_stats(env, i)[1],
    "lpsr": lambda env, i: -_job_stats(env, i)[1],
}

AGV_RULES = ("faa", "lwd")  # first available / least work done


def _pick_agv(env, rule: str) -> int:
    lay = env.layout
    if rule == "faa":
        ranked = []
        for k in range(lay.q):
            idle = bool(env.net.places[lay.agv_idle[k]].tokens)
            queued = len(env.net.places[lay.agv_buffer[k]].tokens)
            ranked.append((0 if idle and queued == 0 else 1, queued, k))
        return min(ranked)[2]
    busy = env.fms.ctx.agv_busy
    return min(range(lay.q), key=lambda k: (busy[k], k))


@dataclass(frozen=True)
class HeuristicPolicy:
    job_rule: str
    agv_rule: str = "faa"
    deterministic: bool = True

    @property
    def name(self) -> str:
        return f"{self.job_rule}+{self.agv_rule}"

    def decide(self, env) -> int:
        mask = env.net.action_mask()
        n_jobs = env.layout.n_jobs
        if any(mask[n_jobs:]):
            return n_jobs + _pick_agv(env, self.agv_rule)
        score = JOB_RULES[self.job_rule]
        enabled = [i for i in range(n_jobs) if mask[i]]
        if not enabled:
            raise RuntimeError("no enabled action at decision point")
        return min(enabled, key=lambda i: (score(env, i), i))


def heuristic_policy(job_rule: str, agv_rule: str = "faa") -> HeuristicPolicy:
    if job_rule not in JOB_RULES:
        raise ValueError(f"unknown job rule {job_rule!r}; "
                         f"expected one of {sorted(JOB_RULES)}")
    if agv_rule not in AGV_RULES:
        raise ValueError(f"unknown AGV rule {agv_rule!r}; "
                         f"expected one of {AGV_RULES}")
    return HeuristicPolicy(job_rule, agv_rule)


def run_policy(env, policy, step_limit: int = 10 ** 6):
    """Drive a fresh episode with a policy; returns (makespan, steps)."""
    env.reset()
    if getattr(env.config, "lookahead", False):
        env.attach_policy(policy)
    steps = 0
    while not env.terminal:
        env.step(policy.decide(env))
        steps += 1
        if steps > step_limit:
            raise RuntimeError("policy exceeded the step limit")
    return env.makespan(), steps
