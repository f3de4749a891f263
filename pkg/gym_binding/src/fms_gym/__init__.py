"""Gym-compatible binding for the fms scheduling environment.

Exposes the native reset/step/mask API behind the conventional gym
surface: `reset() -> observation`, `step(action) -> (obs, reward,
terminated, truncated, info)` and `action_masks()` for maskable trainers.
Spaces are small standalone stand-ins with the usual attributes, so no
gym installation is required.  Every call delegates to the native
environment; trajectories are bit-identical to driving it directly.

    import fms_gym
    env = fms_gym.make("path/to/sl00.txt", {"mode": "agv_only"})
    obs = env.reset()
    obs, reward, terminated, truncated, info = env.step(action)
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from fms import (BENCHMARK_SEEDS, EnvConfig, FmsEnv, SeedSet,
                 generate_group, generate_instance, load_instance)

__version__ = "0.1.0"

__all__ = ["Box", "Discrete", "WrappedEnv", "make", "__version__"]


@dataclass(frozen=True)
class Discrete:
    """Discrete action space stand-in: integers in [0, n)."""
    n: int

    @property
    def shape(self):
        return ()

    dtype = np.int64

    def contains(self, x) -> bool:
        return 0 <= int(x) < self.n

    def sample(self, rng: Optional[np.random.Generator] = None) -> int:
        rng = rng or np.random.default_rng()
        return int(rng.integers(0, self.n))


@dataclass(frozen=True)
class Box:
    """Box observation space stand-in with a fixed float32 layout."""
    low: float
    high: float
    shape: tuple

    dtype = np.float32

    def contains(self, x) -> bool:
        arr = np.asarray(x)
        return (arr.shape == self.shape
                and bool((arr >= self.low).all())
                and bool((arr <= self.high).all()))


class WrappedEnv:
    """Stateless delegation onto one native environment."""

    metadata = {"render_modes": []}

    def __init__(self, env: FmsEnv):
        self.env = env
        obs = env.reset()
        self.observation_space = Box(low=-np.inf, high=np.inf,
                                     shape=obs.shape)
        self.action_space = Discrete(len(env.action_mask()))

    def reset(self) -> np.ndarray:
        return self.env.reset()

    def step(self, action: int):
        result = self.env.step(int(action))
        truncated = bool(result.info.get("truncated", False))
        return (result.observation, result.reward, result.terminal,
                truncated, result.info)

    def action_masks(self) -> np.ndarray:
        return self.env.action_mask()

    @property
    def unwrapped(self) -> FmsEnv:
        return self.env

    def render(self):  # pragma: no cover - no display target
        return None

    def close(self):
        return None


def _instance_from_spec(spec):
    if isinstance(spec, (str, Path)):
        return load_instance(spec)
    if not isinstance(spec, dict):
        raise TypeError("spec must be an instance path or a dict")
    spec = dict(spec)
    if "group" in spec:
        group = generate_group(spec["group"])
        return group[spec.get("index", 0)]
    seeds = spec.get("seeds", BENCHMARK_SEEDS)
    if isinstance(seeds, (list, tuple)):
        seeds = SeedSet(*seeds)
    return generate_instance(
        spec["n_jobs"], spec["n_machines"],
        spec.get("n_tools", spec["n_machines"]), seeds,
        name=spec.get("name", "generated"),
        n_agvs=spec.get("n_agvs", 2), n_tts=spec.get("n_tts", 1))


def make(spec: Union[str, Path, dict],
         config: Optional[dict] = None) -> WrappedEnv:
    """Build a wrapped environment from an instance file or generator spec.

    `config` takes the native configuration fields (reward_mode, mode,
    masking, lookahead, shell, n_agvs, n_tts, ...).
    """
    instance = _instance_from_spec(spec)
    env_config = EnvConfig(**(config or {}))
    return WrappedEnv(FmsEnv(instance, env_config))
