"""Colored-timed Petri net engine.

Places hold FIFO queues of colored tokens, transitions move them.  Four
transition kinds: controlled (needs an external trigger), automatic,
colored (automatic with a color filter on the payload token) and timed
(payload must have sojourned long enough in its place).  `advance` is the
discrete-event driver: it exhausts zero-delay firings, jumps the clock to
the next timed event, and stops at decision points (some controlled
transition enabled) or when nothing can ever fire again.

Everything is integer-timed and deterministic: automatic firings at one
clock instant happen in ascending transition id, tokens leave places in
FIFO order unless a color filter or a custom selector picks another one.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Optional

# transition kinds
CONTROLLED = 0
AUTOMATIC = 1
TIMED = 2
COLORED = 3

KIND_NAMES = {CONTROLLED: "controlled", AUTOMATIC: "automatic",
              TIMED: "timed", COLORED: "colored"}

# place roles (single-occupancy is enforced for the *_idle roles)
ROLES = frozenset({
    "job_queue", "agv_buffer", "agv_idle", "agv_transport", "agv_relocation",
    "machine_buffer", "machine_idle", "machine_processing",
    "tool_request", "tool_transporter_buffer", "tool_transporter_idle",
    "tool_transporter_transport", "tool_store", "delivered", "done",
})
SINGLE_OCCUPANCY_ROLES = frozenset(
    {"machine_idle", "agv_idle", "tool_transporter_idle"})


class StructuralError(Exception):
    """Malformed net: bad ids, non-bipartite arcs, invalid roles."""


class ContractViolation(Exception):
    """Firing a transition whose guard does not hold."""


class LivelockError(Exception):
    """Zero-delay firing cycle exceeded the configured bound."""


@dataclass(frozen=True)
class Color:
    """Token color: (job, machine, tool) triplet, any field may be unset."""
    job: Optional[int] = None
    machine: Optional[int] = None
    tool: Optional[int] = None

    def matches(self, other: "Color") -> bool:
        """True when every field set on self equals the other's field."""
        return ((self.job is None or self.job == other.job)
                and (self.machine is None or self.machine == other.machine)
                and (self.tool is None or self.tool == other.tool))


class Token:
    """One colored unit flowing through the net.

    `process_time` and `transport_time` are fixed at creation;
    `entered_at` is stamped with the clock on every deposit.
    `pickup`/`dropoff` are location indices used by transport legs,
    `required_wait` caches the sojourn a timed consumer demands.
    """

    __slots__ = ("color", "process_time", "transport_time", "entered_at",
                 "order_index", "trace_id", "pickup", "dropoff",
                 "required_wait")

    def __init__(self, color: Color = Color(), process_time: int = 0,
                 transport_time: int = 0, order_index: int = 0,
                 trace_id: int = 0, pickup: Optional[int] = None,
                 dropoff: Optional[int] = None):
        if process_time < 0 or transport_time < 0:
            raise ValueError("token times must be nonnegative")
        self.color = color
        self.process_time = process_time
        self.transport_time = transport_time
        self.entered_at = 0
        self.order_index = order_index
        self.trace_id = trace_id
        self.pickup = pickup
        self.dropoff = dropoff
        self.required_wait: Optional[int] = None

    def clone(self) -> "Token":
        t = Token.__new__(Token)
        t.color = self.color
        t.process_time = self.process_time
        t.transport_time = self.transport_time
        t.entered_at = self.entered_at
        t.order_index = self.order_index
        t.trace_id = self.trace_id
        t.pickup = self.pickup
        t.dropoff = self.dropoff
        t.required_wait = self.required_wait
        return t

    def __repr__(self):
        return (f"Token(job={self.color.job}, machine={self.color.machine}, "
                f"tool={self.color.tool}, op={self.order_index}, "
                f"id={self.trace_id})")


class Place:
    __slots__ = ("id", "name", "role", "tokens")

    def __init__(self, pid: int, name: str, role: str):
        if role not in ROLES:
            raise StructuralError(f"unknown place role {role!r}")
        self.id = pid
        self.name = name
        self.role = role
        self.tokens: list[Token] = []

    def __len__(self):
        return len(self.tokens)

    def head(self) -> Optional[Token]:
        return self.tokens[0] if self.tokens else None


# emit rules: what a firing deposits into each downstream place
EMIT_PAYLOAD = "payload"    # the moving data token itself
EMIT_MARKER = "marker"      # a fresh anonymous resource marker
EMIT_COPY = "copy"          # a duplicate of the payload (tool requests)
# ("companion", place_id) re-emits the token consumed from that upstream place


class Transition:
    """Immutable after the net is built; shared across net clones.

    `upstream[0]` is the payload source; other upstream places supply
    companion tokens that are consumed alongside.  Hooks receive the net so
    transitions stay shareable: `extra_guard(net, payload)`,
    `delay_source(net, token)`, `on_fire(net, transition, payload,
    companions)`, `payload_select(net, place)`.
    """

    __slots__ = ("id", "name", "kind", "upstream", "downstream", "emit",
                 "color_match", "companion_match", "extra_guard",
                 "delay_source", "on_fire", "payload_select", "watches")

    def __init__(self, tid: int, name: str, kind: int,
                 upstream: list[int], downstream: list[int],
                 emit: Optional[dict] = None,
                 color_match: Optional[Color] = None,
                 companion_match: Optional[dict] = None,
                 extra_guard: Optional[Callable] = None,
                 delay_source: Optional[Callable] = None,
                 on_fire: Optional[Callable] = None,
                 payload_select: Optional[Callable] = None,
                 watches: tuple = ()):
        if kind not in KIND_NAMES:
            raise StructuralError(f"unknown transition kind {kind}")
        if not upstream:
            raise StructuralError(f"transition {name} has no upstream place")
        if color_match is not None and kind != COLORED:
            raise StructuralError("color_match is only valid on colored kind")
        if kind == COLORED and color_match is None:
            raise StructuralError("colored transition needs a color_match")
        self.id = tid
        self.name = name
        self.kind = kind
        self.upstream = list(upstream)
        self.downstream = list(downstream)
        if emit is None:
            emit = {pid: EMIT_PAYLOAD for pid in downstream}
        self.emit = emit
        self.color_match = color_match
        self.companion_match = companion_match or {}
        self.extra_guard = extra_guard
        self.delay_source = delay_source
        self.on_fire = on_fire
        self.payload_select = payload_select
        self.watches = tuple(watches)


@dataclass
class AdvanceResult:
    elapsed: int
    fired: list[int] = field(default_factory=list)
    terminal: bool = False


class CTPNet:
    """Marking + event clock over a fixed place/transition structure.

    Mutable state is the token queues, the clock and the attached `ctx`
    (domain bookkeeping object with a ``clone()`` method); the structure
    itself is shared between clones.
    """

    def __init__(self, places: list[Place], transitions: list[Transition],
                 controllable_ids: Optional[list[int]] = None, ctx=None):
        self.places = places
        self.transitions = transitions
        self.clock = 0
        self.ctx = ctx
        if controllable_ids is None:
            controllable_ids = [t.id for t in transitions
                                if t.kind == CONTROLLED]
        self.controllable_ids = list(controllable_ids)
        self._trace_counter = 0
        self._validate_structure()
        # place id -> non-controlled transitions whose enablement may change
        # when that place changes (arcs plus declared watches)
        self._consumers: list[list[int]] = [[] for _ in places]
        for t in transitions:
            if t.kind == CONTROLLED:
                continue
            for pid in set(t.upstream) | set(t.watches) | set(t.downstream):
                self._consumers[pid].append(t.id)
        self._timed_ids = [t.id for t in transitions if t.kind == TIMED]
        # lazy min-heap of non-controlled transitions to re-examine,
        # deduplicated through _queued: ascending id keeps firing order
        # deterministic
        self._heap: list[int] = [t.id for t in transitions
                                 if t.kind != CONTROLLED]
        heapq.heapify(self._heap)
        self._queued: set[int] = set(self._heap)
        # places whose content can flip a controlled guard; touching one
        # forces advance() to re-examine decision availability
        self._controlled_places = set()
        for tid in self.controllable_ids:
            t = self.transitions[tid]
            self._controlled_places.update(t.upstream)
            self._controlled_places.update(t.watches)
        self._controlled_maybe = True

    def _validate_structure(self):
        n = len(self.places)
        for i, p in enumerate(self.places):
            if p.id != i:
                raise StructuralError("place ids must be dense and ordered")
        for i, t in enumerate(self.transitions):
            if t.id != i:
                raise StructuralError("transition ids must be dense")
            if len(set(t.upstream)) != len(t.upstream):
                raise StructuralError(
                    f"transition {t.name} lists an upstream place twice")
            for pid in t.upstream + t.downstream + list(t.watches):
                if not 0 <= pid < n:
                    raise StructuralError(
                        f"transition {t.name} references place {pid}")
            for pid in t.downstream:
                if t.emit.get(pid) is None:
                    raise StructuralError(
                        f"transition {t.name} lacks emit rule for {pid}")

    # -- token plumbing ----------------------------------------------------

    def new_token(self, **kw) -> Token:
        tok = Token(**kw)
        tok.trace_id = self._trace_counter
        self._trace_counter += 1
        return tok

    def seed(self, place_id: int, token: Token):
        """Place a token as part of the initial marking."""
        token.entered_at = self.clock
        self.places[place_id].tokens.append(token)
        self._touch(place_id)

    def _touch(self, place_id: int):
        if place_id in self._controlled_places:
            self._controlled_maybe = True
        queued = self._queued
        for tid in self._consumers[place_id]:
            if tid not in queued:
                queued.add(tid)
                heapq.heappush(self._heap, tid)

    # -- guards ------------------------------------------------------------

    def _select_payload(self, t: Transition) -> Optional[int]:
        place = self.places[t.upstream[0]]
        if not place.tokens:
            return None
        if t.payload_select is not None:
            return t.payload_select(self, place)
        if t.color_match is not None:
            for i, tok in enumerate(place.tokens):
                if t.color_match.matches(tok.color):
                    return i
            return None
        return 0

    def _select_companion(self, t: Transition, pid: int,
                          payload: Token) -> Optional[int]:
        place = self.places[pid]
        match = t.companion_match.get(pid)
        if match is None:
            return 0 if place.tokens else None
        for i, tok in enumerate(place.tokens):
            if match(payload, tok):
                return i
        return None

    def _required_wait(self, t: Transition, token: Token) -> int:
        if token.required_wait is None:
            if t.delay_source is None:
                token.required_wait = 0
            else:
                token.required_wait = int(t.delay_source(self, token))
        return token.required_wait

    def _bind(self, t: Transition, check_time: bool = True):
        """Resolve the token binding for a firing, or None if disabled."""
        pi = self._select_payload(t)
        if pi is None:
            return None
        payload = self.places[t.upstream[0]].tokens[pi]
        companions = {}
        for pid in t.upstream[1:]:
            ci = self._select_companion(t, pid, payload)
            if ci is None:
                return None
            companions[pid] = ci
        for pid in t.downstream:
            place = self.places[pid]
            if (place.role in SINGLE_OCCUPANCY_ROLES and place.tokens
                    and pid not in t.upstream):
                return None
        if t.kind == TIMED and check_time:
            need = self._required_wait(t, payload)
            if self.clock - payload.entered_at < need:
                return None
        if t.extra_guard is not None and not t.extra_guard(self, payload):
            return None
        return pi, companions

    def guard(self, transition_id: int) -> bool:
        """Enabling condition: eligible token in every upstream place."""
        if not 0 <= transition_id < len(self.transitions):
            raise StructuralError(f"unknown transition id {transition_id}")
        return self._bind(self.transitions[transition_id]) is not None

    def action_mask(self) -> list[bool]:
        """guard() over the controllable transitions, in declared order."""
        return [self.guard(tid) for tid in self.controllable_ids]

    # -- firing ------------------------------------------------------------

    def fire(self, transition_id: int, external: bool = False) -> list[int]:
        """Fire one transition; raises ContractViolation when disabled.

        Returns the list of downstream place ids that received a token.
        """
        if not 0 <= transition_id < len(self.transitions):
            raise StructuralError(f"unknown transition id {transition_id}")
        t = self.transitions[transition_id]
        if t.kind == CONTROLLED and not external:
            raise ContractViolation(
                f"controlled transition {t.name} needs an external trigger")
        binding = self._bind(t)
        if binding is None:
            raise ContractViolation(f"transition {t.name} is not enabled")
        pi, companions = binding
        src = self.places[t.upstream[0]]
        payload = src.tokens.pop(pi)
        taken = {}
        for pid, ci in companions.items():
            taken[pid] = self.places[pid].tokens.pop(ci)
        if t.on_fire is not None:
            t.on_fire(self, t, payload, taken)
        for pid in t.downstream:
            rule = t.emit[pid]
            if rule == EMIT_PAYLOAD:
                tok = payload
            elif rule == EMIT_MARKER:
                tok = self.new_token()
            elif rule == EMIT_COPY:
                tok = payload.clone()
                tok.trace_id = self._trace_counter
                self._trace_counter += 1
            else:  # ("companion", src_place_id)
                tok = taken[rule[1]]
            place = self.places[pid]
            if (place.role in SINGLE_OCCUPANCY_ROLES and place.tokens):
                raise ContractViolation(
                    f"place {place.name} admits a single token")
            tok.entered_at = self.clock
            tok.required_wait = None
            place.tokens.append(tok)
        for pid in t.upstream:
            self._touch(pid)
        for pid in t.downstream:
            self._touch(pid)
        return list(t.downstream)

    # -- discrete-event driver ----------------------------------------------

    def _next_enabled_noncontrolled(self) -> Optional[int]:
        heap = self._heap
        while heap:
            tid = heapq.heappop(heap)
            self._queued.discard(tid)
            if self._bind(self.transitions[tid]) is not None:
                return tid
        return None

    def _controlled_enabled(self) -> bool:
        # reversed: vehicle selects sit at the tail and their guard (a
        # non-empty staging place) is the cheapest and likeliest hit
        return any(self.guard(tid) for tid in reversed(self.controllable_ids))

    def _next_timed_ready(self) -> Optional[int]:
        """Earliest instant a timed transition is (or was) fireable."""
        best = None
        for tid in self._timed_ids:
            t = self.transitions[tid]
            binding = self._bind(t, check_time=False)
            if binding is None:
                continue
            payload = self.places[t.upstream[0]].tokens[binding[0]]
            ready = payload.entered_at + self._required_wait(t, payload)
            if best is None or ready < best:
                best = ready
        return best

    def advance(self, livelock_bound: int = 10 ** 6) -> AdvanceResult:
        """Run autonomous behaviour until a decision point or terminality."""
        fired: list[int] = []
        start = self.clock
        instant_count = 0
        while True:
            tid = self._next_enabled_noncontrolled()
            if tid is not None:
                self.fire(tid)
                fired.append(tid)
                instant_count += 1
                if instant_count > livelock_bound:
                    raise LivelockError(
                        f"{instant_count} zero-delay firings at clock "
                        f"{self.clock}; last transition "
                        f"{self.transitions[tid].name}")
                continue
            if self._controlled_maybe:
                if self._controlled_enabled():
                    return AdvanceResult(self.clock - start, fired, False)
                self._controlled_maybe = False
            ready = self._next_timed_ready()
            if ready is None:
                return AdvanceResult(self.clock - start, fired, True)
            if ready > self.clock:
                self.clock = ready
                instant_count = 0
            for tid in self._timed_ids:
                if tid not in self._queued:
                    self._queued.add(tid)
                    heapq.heappush(self._heap, tid)

    # -- bookkeeping ---------------------------------------------------------

    def marking(self) -> list[int]:
        return [len(p.tokens) for p in self.places]

    def total_tokens(self) -> int:
        return sum(len(p.tokens) for p in self.places)

    def state_digest(self) -> int:
        """Order-sensitive hash of clock + full token state."""
        acc = hash(self.clock)
        for p in self.places:
            acc = hash((acc, p.id, len(p.tokens)))
            for tok in p.tokens:
                acc = hash((acc, tok.color, tok.entered_at, tok.order_index,
                            tok.pickup, tok.dropoff, tok.required_wait))
        return acc

    def clone(self) -> "CTPNet":
        dup = CTPNet.__new__(CTPNet)
        dup.places = []
        for p in self.places:
            q = Place(p.id, p.name, p.role)
            q.tokens = [tok.clone() for tok in p.tokens]
            dup.places.append(q)
        dup.transitions = self.transitions      # immutable, shared
        dup.clock = self.clock
        dup.controllable_ids = self.controllable_ids
        dup.ctx = self.ctx.clone() if self.ctx is not None else None
        dup._trace_counter = self._trace_counter
        dup._consumers = self._consumers
        dup._timed_ids = self._timed_ids
        dup._heap = list(self._heap)
        dup._queued = set(self._queued)
        dup._controlled_places = self._controlled_places
        dup._controlled_maybe = self._controlled_maybe
        return dup
