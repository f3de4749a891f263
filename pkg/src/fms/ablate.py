"""Component ablations: action masking, lookahead, reward shaping.

Each experiment isolates one mechanism and reports paired results so the
contribution of the component is directly visible.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

import numpy as np

from .environment import (REWARD_IDLE, REWARD_SPARSE, EnvConfig, FmsEnv)
from .solvers import PpoConfig, PpoPolicy, ppo_train, run_policy
from .solvers.heuristics import heuristic_policy


def masking_ablation(instance, env_config: EnvConfig, ppo_config: PpoConfig,
                     unmasked_episode_cap: Optional[int] = None):
    """Train with and without invalid-action masking; returns both logs.

    The unmasked run samples from the full action set: invalid choices
    cost the configured penalty and leave the state unchanged, so episodes
    are capped to keep them finite.
    """
    masked_cfg = replace(env_config, masking=True)
    cap = unmasked_episode_cap
    if cap is None:
        cap = 40 * (2 * instance.total_ops + 2)
    unmasked_cfg = replace(env_config, masking=False, max_episode_steps=cap)

    _, masked_log = ppo_train(lambda: FmsEnv(instance, masked_cfg),
                              replace(ppo_config, masking=True))
    _, unmasked_log = ppo_train(lambda: FmsEnv(instance, unmasked_cfg),
                                replace(ppo_config, masking=False))
    return masked_log, unmasked_log


def decile_means(values) -> list[float]:
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return []
    chunks = np.array_split(values, 10)
    return [float(np.mean(c)) if len(c) else float("nan") for c in chunks]


def lookahead_ablation(instances, env_config: EnvConfig, policy=None):
    """Run a deterministic policy with lookahead vs the max fallback.

    Returns [(instance, makespan_with, makespan_without), ...].
    """
    if policy is None:
        policy = heuristic_policy("fifo", "faa")
    pairs = []
    for inst in instances:
        with_cfg = replace(env_config, lookahead=True)
        without_cfg = replace(env_config, lookahead=False)
        env = FmsEnv(inst, with_cfg)
        env.attach_policy(policy)
        mk_with, _ = run_policy(env, policy)
        mk_without, _ = run_policy(FmsEnv(inst, without_cfg), policy)
        pairs.append((inst.name, mk_with, mk_without))
    return pairs


def reward_shaping_ablation(train_instance, eval_instances,
                            env_config: EnvConfig, ppo_config: PpoConfig):
    """Idle-penalty training vs sparse-makespan training.

    Both agents train on the same instance and are then scored greedily on
    the evaluation set; returns [(instance, shaped, sparse), ...].
    """
    shaped_cfg = replace(env_config, reward_mode=REWARD_IDLE)
    sparse_cfg = replace(env_config, reward_mode=REWARD_SPARSE)
    shaped_model, _ = ppo_train(lambda: FmsEnv(train_instance, shaped_cfg),
                                ppo_config)
    sparse_model, _ = ppo_train(lambda: FmsEnv(train_instance, sparse_cfg),
                                ppo_config)
    pairs = []
    for inst in eval_instances:
        mk_shaped, _ = run_policy(FmsEnv(inst, shaped_cfg),
                                  PpoPolicy(shaped_model))
        mk_sparse, _ = run_policy(FmsEnv(inst, sparse_cfg),
                                  PpoPolicy(sparse_model))
        pairs.append((inst.name, mk_shaped, mk_sparse))
    return pairs
