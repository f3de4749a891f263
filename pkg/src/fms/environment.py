"""Reset/step/mask facade over the manufacturing net.

One environment drives one net from build to completion.  `step` fires the
chosen controlled transition and runs the autonomous behaviour up to the
next decision point, returning an observation, a reward and bookkeeping
info.  The observation layout is fixed by the shell size so one policy can
serve differently filled instances; empty slots are null-padded.

Rewards: `idle_penalty` charges the idle-machine fraction at every
decision point, `sparse_makespan` pays the scaled negative makespan once
at the end.  With masking disabled, invalid actions cost a fixed penalty
and leave the state untouched.

The relocation fallback for empty AGV buffers can be replaced by a
lookahead: a twin of the environment rolls the attached deterministic
policy forward until the buffer receives a token, and the vehicle heads
for that token's pickup location instead of charging the matrix maximum.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import builder
from .builder import MODE_AGV, MODE_TOOLS, FmsNet
from .instances import Instance, pad_instance
from .petri import ContractViolation, Token
from .trace import ScheduleTrace

REWARD_IDLE = "idle_penalty"
REWARD_SPARSE = "sparse_makespan"

MAX_DURATION = 99  # generator draws processing times from U[1, 99]
_NULL_SLOT = (0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass
class EnvConfig:
    reward_mode: str = REWARD_IDLE
    lookahead: bool = False
    masking: bool = True
    shell: Optional[tuple] = None       # (max_jobs, max_machines)
    mode: str = MODE_AGV
    n_agvs: Optional[int] = None
    n_tts: Optional[int] = None
    invalid_action_penalty: float = -1.0
    sparse_scale: Optional[float] = None  # default: total processing work
    max_episode_steps: Optional[int] = None
    lookahead_budget_factor: int = 10
    # twins can price other vehicles' relocations by nested lookahead up
    # to this depth; beyond it they fall back to the matrix maximum.
    # depth 1 (no nesting) measures best with untrained policies.
    lookahead_depth: int = 1

    def __post_init__(self):
        if self.reward_mode not in (REWARD_IDLE, REWARD_SPARSE):
            raise ValueError(f"unknown reward mode {self.reward_mode!r}")
        if self.mode not in (MODE_AGV, MODE_TOOLS):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    terminal: bool
    info: dict = field(default_factory=dict)


class FmsEnv:
    """Decision-point environment over a single instance."""

    def __init__(self, instance: Instance, config: EnvConfig = None):
        self.config = config or EnvConfig()
        self.base_instance = instance
        if self.config.shell is not None:
            instance = pad_instance(instance, *self.config.shell)
        self.instance = instance
        self._work_scale = max(1.0, float(instance.total_work))
        self.fms: Optional[FmsNet] = None
        self.steps = 0
        self._policy = None          # deterministic policy for lookahead
        self._la_depth = 0           # 0 in the real env, +1 per twin level
        self._last_obs = None
        self._mask_cache = None
        self.reset()

    # -- lifecycle -----------------------------------------------------------

    def reset(self) -> np.ndarray:
        cfg = self.config
        self.fms = builder.build(self.instance, q=cfg.n_agvs, s=cfg.n_tts,
                                 mode=cfg.mode)
        if cfg.lookahead:
            self.fms.ctx.lookahead_fn = self._predict_pickup
        self._slots = self._slot_places()
        self.steps = 0
        self._terminal = False
        result = self.net.advance()
        self._terminal = result.terminal
        self._last_obs = self._observe()
        self._mask_cache = None
        return self._last_obs

    @property
    def net(self):
        return self.fms.net

    @property
    def layout(self):
        return self.fms.layout

    def attach_policy(self, policy):
        """Deterministic policy consulted by the lookahead twin."""
        self._policy = policy

    def clone(self, keep_lookahead: bool = False) -> "FmsEnv":
        dup = copy.copy(self)
        dup.config = self.config
        dup.fms = self.fms.clone()
        if keep_lookahead and self.config.lookahead:
            dup.fms.ctx.lookahead_fn = dup._predict_pickup
        dup._last_obs = self._last_obs
        return dup

    # -- stepping ------------------------------------------------------------

    def action_mask(self) -> np.ndarray:
        if self._mask_cache is None:
            self._mask_cache = np.asarray(self.net.action_mask(), dtype=bool)
        return self._mask_cache

    def step(self, action: int) -> StepResult:
        if self._terminal:
            raise ContractViolation("episode already terminal")
        n_actions = len(self.net.controllable_ids)
        if not 0 <= action < n_actions:
            raise ContractViolation(
                f"action {action} outside [0, {n_actions})")
        self.steps += 1
        self._mask_cache = None
        tid = self.net.controllable_ids[action]
        if not self.net.guard(tid):
            if self.config.masking:
                raise ContractViolation(
                    f"action {action} is masked at this decision point")
            truncated = (self.config.max_episode_steps is not None
                         and self.steps >= self.config.max_episode_steps)
            return StepResult(self._last_obs,
                              self.config.invalid_action_penalty,
                              False,
                              {"makespan": self.net.clock, "elapsed": 0,
                               "fired": [], "invalid_action": True,
                               "truncated": truncated})
        self.net.fire(tid, external=True)
        result = self.net.advance()
        self._terminal = result.terminal
        obs = self._observe()
        self._last_obs = obs
        reward = self._reward(result.terminal)
        info = {
            "makespan": self.net.clock,
            "elapsed": result.elapsed,
            "fired": list(result.fired),
            "completed": self.fms.ctx.completed,
            "truncated": (self.config.max_episode_steps is not None
                          and self.steps >= self.config.max_episode_steps
                          and not result.terminal),
        }
        if result.terminal and not self.fms.is_complete():
            info["deadlock"] = True
        return StepResult(obs, reward, result.terminal, info)

    @property
    def terminal(self) -> bool:
        return self._terminal

    def trace(self) -> ScheduleTrace:
        return self.fms.ctx.trace

    def makespan(self) -> int:
        return self.net.clock

    # -- reward ---------------------------------------------------------------

    def idle_fraction(self) -> float:
        """Idle machines over total machines, on the real instance."""
        n = self.base_instance.n_machines
        busy = sum(
            1 for m in range(n)
            if self.net.places[self.layout.machine_processing[m]].tokens)
        return (n - busy) / n

    def _reward(self, terminal: bool) -> float:
        if self.config.reward_mode == REWARD_IDLE:
            return -self.idle_fraction()
        if not terminal:
            return 0.0
        scale = self.config.sparse_scale
        if scale is None:
            scale = self._work_scale
        return -self.net.clock / scale

    # -- observation ------------------------------------------------------------

    def observation_size(self) -> int:
        return len(self._last_obs)

    def _slot_places(self):
        lay = self.layout
        slots = [lay.staging]
        slots += list(lay.job_queue)
        slots += list(lay.machine_buffer)
        slots += list(lay.agv_buffer)
        if lay.mode == MODE_TOOLS:
            slots.append(lay.tt_queue)
        return slots

    def _observe(self) -> np.ndarray:
        net = self.net
        lay = self.layout
        places = net.places
        values = [len(p.tokens) * 0.1 for p in places]
        j_div = max(1, lay.n_jobs)
        m_div = max(1, lay.n_machines)
        t_div = max(1, lay.n_tools)
        extend = values.extend
        for pid in self._slots:
            tokens = places[pid].tokens
            if not tokens:
                extend(_NULL_SLOT)
            else:
                head = tokens[0]
                c = head.color
                extend((
                    1.0,
                    head.process_time / MAX_DURATION,
                    -1.0 if c.job is None else (c.job + 1) / j_div,
                    -1.0 if c.machine is None else (c.machine + 1) / m_div,
                    -1.0 if c.tool is None else (c.tool + 1) / t_div,
                ))
        values.append(net.clock / self._work_scale)
        return np.asarray(values, dtype=np.float32)

    # -- lookahead ------------------------------------------------------------

    def transport_time_or_fallback(self, agv: int) -> int:
        """Relocation delay the engine would charge AGV `agv` right now."""
        probe = Token()
        return builder._relocation_delay(self.net, agv, probe)

    def _predict_pickup(self, net, agv: int) -> Optional[int]:
        """Predict the pickup of the next token this vehicle will carry.

        A twin of the environment rolls the attached deterministic policy
        forward until the buffer receives a token.  The relocation being
        priced also exists in the twin, and its duration feeds back into
        the trajectory, so the prediction is iterated to a fixpoint: the
        twin re-runs with the candidate target pinned until the outcome
        confirms it (or the iteration cap is hit).
        """
        if self._policy is None or self._la_depth >= self.config.lookahead_depth:
            return None
        candidate = None
        rounds = 3 if self._la_depth == 0 else 1
        for _ in range(rounds):
            found = self._twin_rollout(agv, candidate)
            if found is None or found == candidate:
                return found
            candidate = found
        return candidate

    def _twin_rollout(self, agv: int, pinned: Optional[int]):
        """One twin run; the pending relocation takes the pinned target."""
        twin = self.clone(keep_lookahead=False)
        twin._la_depth = self._la_depth + 1
        if twin._la_depth < self.config.lookahead_depth:
            twin._policy = self._policy
            twin.fms.ctx.lookahead_fn = twin._predict_pickup
        else:
            twin._policy = None
        if pinned is not None:
            twin.fms.ctx.forced_target[agv] = pinned
        buffer_id = self.layout.agv_buffer[agv]
        staging_id = self.layout.staging
        assign_action = self.layout.n_jobs + agv
        remaining = twin.fms.ctx.total_ops - twin.fms.ctx.completed
        budget = self.config.lookahead_budget_factor * max(1, remaining)
        result = twin.net.advance()
        twin._terminal = result.terminal
        twin._last_obs = twin._observe()
        for _ in range(budget):
            head = twin.net.places[buffer_id].head()
            if head is not None:
                return head.pickup
            if twin.terminal:
                return None
            action = self._policy.decide(twin)
            if action == assign_action:
                staged = twin.net.places[staging_id].head()
                if staged is not None:
                    return staged.pickup
            twin.step(action)
        return None
