"""Decision policies: dispatching rules, population search, policy
gradient, random play, and an exhaustive oracle for tiny instances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .brute import SearchBudgetExceeded, brute_force_optimal
from .heuristics import (AGV_RULES, JOB_RULES, HeuristicPolicy,
                         heuristic_policy, run_policy)
from .ppo import (ActorCritic, PpoConfig, PpoPolicy, TrainLog, compute_gae,
                  masked_log_softmax, masked_softmax, ppo_act,
                  ppo_loss_and_grads, ppo_train)
from .sos import SosConfig, SosResult, decode, sos_optimize

__all__ = [
    "AGV_RULES", "JOB_RULES", "HeuristicPolicy", "heuristic_policy",
    "run_policy", "ActorCritic", "PpoConfig", "PpoPolicy", "TrainLog",
    "compute_gae", "masked_log_softmax", "masked_softmax", "ppo_act",
    "ppo_loss_and_grads", "ppo_train", "SosConfig", "SosResult", "decode",
    "sos_optimize", "SearchBudgetExceeded", "brute_force_optimal",
    "RandomPolicy",
]


@dataclass
class RandomPolicy:
    """Uniform choice over mask-enabled actions; seeded and replayable."""
    seed: int = 0
    deterministic: bool = False
    name: str = "random"

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)

    def decide(self, env) -> int:
        mask = env.action_mask()
        enabled = np.flatnonzero(mask)
        if len(enabled) == 0:
            raise RuntimeError("no enabled action at decision point")
        return int(self.rng.choice(enabled))
