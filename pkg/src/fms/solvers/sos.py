"""Symbiotic organisms search over priority-key schedules.

An organism is a real vector in [0, 1]: one sequencing key per operation
(the enabled job whose current operation carries the smallest key goes
first) concatenated with one vehicle-preference key per operation (scaled
to an AGV index).  Fitness is the makespan of decoding the organism in the
environment.  The three classic phases run until a wall-clock or an
evaluation budget expires; an optional target makespan stops the search
early once reached.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class SosConfig:
    pop_size: int = 24
    time_budget_s: Optional[float] = None
    max_evals: Optional[int] = 20_000
    seed: int = 0
    target: Optional[int] = None   # stop early at this makespan

    def __post_init__(self):
        if self.pop_size < 3:
            raise ValueError("population needs at least 3 organisms")
        if self.time_budget_s is None and self.max_evals is None:
            raise ValueError("set a time or an evaluation budget")


@dataclass
class SosResult:
    makespan: int
    keys: np.ndarray
    evals: int
    iterations: int
    history: list = field(default_factory=list)  # best-so-far per iteration


class _KeyPolicy:
    """Decode one organism: smallest-key enabled job, keyed AGV choice."""

    deterministic = True
    name = "sos-organism"

    def __init__(self, keys: np.ndarray, offsets, q: int):
        self.keys = keys
        self.offsets = offsets   # job -> first key index of its operations
        self.q = q
        self.n_op_keys = offsets[-1]

    def decide(self, env) -> int:
        mask = env.net.action_mask()
        n_jobs = env.layout.n_jobs
        if any(mask[n_jobs:]):
            head = env.net.places[env.layout.staging].head()
            slot = self._slot(head.color.job, head.order_index)
            key = self.keys[self.n_op_keys + slot]
            agv = min(int(key * self.q), self.q - 1)
            return n_jobs + agv
        best, best_key = None, None
        for i in range(n_jobs):
            if not mask[i]:
                continue
            slot = self._slot(i, env.fms.ctx.selected_count[i])
            key = self.keys[slot]
            if best is None or key < best_key:
                best, best_key = i, key
        if best is None:
            raise RuntimeError("no enabled action to decode")
        return best

    def _slot(self, job: int, op_index: int) -> int:
        return self.offsets[job] + op_index


def _offsets(instance):
    offsets = [0]
    for ops in instance.jobs:
        offsets.append(offsets[-1] + len(ops))
    return offsets


def decode(env, keys: np.ndarray) -> int:
    """Makespan of one organism; the env is reset and driven to the end."""
    offsets = _offsets(env.instance)
    policy = _KeyPolicy(keys, offsets, env.layout.q)
    env.reset()
    if env.config.lookahead:
        env.attach_policy(policy)
    while not env.terminal:
        env.step(policy.decide(env))
    return env.makespan()


def sos_optimize(env, config: SosConfig) -> SosResult:
    """Run the search; deterministic under a fixed seed and eval budget."""
    rng = np.random.default_rng(config.seed)
    offsets = _offsets(env.instance)
    dim = 2 * offsets[-1]
    if dim == 0:
        return SosResult(0, np.zeros(0), 0, 0, [0])
    deadline = (None if config.time_budget_s is None
                else time.monotonic() + config.time_budget_s)
    evals = 0

    def out_of_budget():
        if config.max_evals is not None and evals >= config.max_evals:
            return True
        return deadline is not None and time.monotonic() >= deadline

    def fitness(keys):
        nonlocal evals
        evals += 1
        return decode(env, keys)

    pop = rng.random((config.pop_size, dim))
    fit = np.array([fitness(pop[i]) for i in range(config.pop_size)],
                   dtype=float)
    history = [int(fit.min())]
    iterations = 0
    hit_target = (config.target is not None
                  and history[0] <= config.target)
    while not out_of_budget() and not hit_target:
        iterations += 1
        for i in range(config.pop_size):
            if out_of_budget() or hit_target:
                break
            best = pop[int(np.argmin(fit))]
            # mutualism: i and a partner drift toward the best solution
            j = _other(rng, config.pop_size, i)
            mutual = (pop[i] + pop[j]) / 2.0
            bf1 = int(rng.integers(1, 3))
            bf2 = int(rng.integers(1, 3))
            cand_i = np.clip(pop[i] + rng.random(dim) * (best - mutual * bf1),
                             0.0, 1.0)
            cand_j = np.clip(pop[j] + rng.random(dim) * (best - mutual * bf2),
                             0.0, 1.0)
            f_i = fitness(cand_i)
            if f_i < fit[i]:
                pop[i], fit[i] = cand_i, f_i
            f_j = fitness(cand_j)
            if f_j < fit[j]:
                pop[j], fit[j] = cand_j, f_j
            if out_of_budget():
                break
            # commensalism: i moves along the best-vs-partner direction
            j = _other(rng, config.pop_size, i)
            step = rng.random(dim) * 2.0 - 1.0
            cand = np.clip(pop[i] + step * (best - pop[j]), 0.0, 1.0)
            f_c = fitness(cand)
            if f_c < fit[i]:
                pop[i], fit[i] = cand, f_c
            if out_of_budget():
                break
            # parasitism: a mutated copy of i challenges a random victim
            j = _other(rng, config.pop_size, i)
            parasite = pop[i].copy()
            n_dims = int(rng.integers(1, dim + 1))
            dims = rng.permutation(dim)[:n_dims]
            parasite[dims] = rng.random(n_dims)
            f_p = fitness(parasite)
            if f_p < fit[j]:
                pop[j], fit[j] = parasite, f_p
            if config.target is not None and fit.min() <= config.target:
                hit_target = True
        history.append(int(fit.min()))
    best_idx = int(np.argmin(fit))
    # re-decode so the env's trace matches the reported organism
    makespan = decode(env, pop[best_idx])
    return SosResult(makespan, pop[best_idx].copy(), evals, iterations,
                     history)


def _other(rng, n: int, i: int) -> int:
    j = int(rng.integers(0, n - 1))
    return j if j < i else j + 1
