"""Build the manufacturing-cell net from an instance.

Three blocks in AGV-only mode: job management (one queue and one
controlled select per job), the AGV block (agent-controlled vehicle
assignment, automatic load, timed travel, timed post-unload relocation),
and the machine block (color routing to the owning machine, automatic
allocation while idle, timed processing).  Tool-sharing mode adds a fourth
block: job selection duplicates the operation token into a tool request,
requests are sorted by tool type, each single-entity tool is granted
in place or carried over by a tool transporter.

The agent's actions are exactly the job selects followed by the AGV
selects; everything else is autonomous.  Mutable run state (vehicle
positions, per-job progress, the schedule trace) lives in a context object
on the net so nets clone cheaply and hooks stay shareable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .instances import Instance
from .petri import (AUTOMATIC, COLORED, CONTROLLED, TIMED,
                    Color, CTPNet, EMIT_COPY, EMIT_MARKER, EMIT_PAYLOAD,
                    Place, Token, Transition)
from .trace import (KIND_AGV, KIND_MACHINE, KIND_TT, LEG_DEADHEAD,
                    LEG_LOADED, LEG_PROCESS, LEG_TOOL_MOVE, ScheduleTrace)

MODE_AGV = "agv_only"
MODE_TOOLS = "agv_and_tools"

UNKNOWN = -1  # vehicle position after a max-fallback relocation


class BuildError(Exception):
    pass


@dataclass(frozen=True)
class FmsLayout:
    """Immutable id map of the generated net, shared across clones."""
    mode: str
    n_jobs: int
    n_machines: int
    n_tools: int
    q: int
    s: int
    job_queue: tuple
    staging: int
    agv_buffer: tuple
    agv_idle: tuple
    agv_transport: tuple
    agv_relocation: tuple
    delivered: int
    machine_buffer: tuple
    machine_idle: tuple
    machine_processing: tuple
    done: int
    # tools-mode ids, empty tuples otherwise
    request_hub: int = -1
    tool_request: tuple = ()
    tool_store: tuple = ()
    tool_ready: tuple = ()
    tool_in_use: tuple = ()
    tt_queue: int = -1
    tt_idle: tuple = ()
    tt_fetch: tuple = ()
    tt_carry: tuple = ()
    tool_delivered: int = -1


class FmsContext:
    """Mutable bookkeeping attached to the net as ``net.ctx``."""

    __slots__ = ("layout", "d_agv", "d_tt", "max_agv", "agv_pos", "tt_pos",
                 "inflight", "selected_count", "ready_since", "agv_busy",
                 "completed", "total_ops", "trace", "lookahead_fn",
                 "forced_target")

    def __init__(self, layout: FmsLayout, d_agv, d_tt, total_ops: int):
        self.layout = layout
        self.d_agv = d_agv
        self.d_tt = d_tt
        self.max_agv = max(max(row) for row in d_agv)
        self.agv_pos = [0] * layout.q
        self.tt_pos = [0] * layout.s
        self.inflight = [False] * layout.n_jobs
        self.selected_count = [0] * layout.n_jobs
        self.ready_since = [0] * layout.n_jobs
        self.agv_busy = [0] * layout.q
        self.completed = 0
        self.total_ops = total_ops
        self.trace = ScheduleTrace()
        self.lookahead_fn = None     # set by the environment, never cloned
        self.forced_target = {}      # agv -> pinned relocation target (twin)

    def clone(self) -> "FmsContext":
        dup = FmsContext.__new__(FmsContext)
        dup.layout = self.layout
        dup.d_agv = self.d_agv
        dup.d_tt = self.d_tt
        dup.max_agv = self.max_agv
        dup.agv_pos = list(self.agv_pos)
        dup.tt_pos = list(self.tt_pos)
        dup.inflight = list(self.inflight)
        dup.selected_count = list(self.selected_count)
        dup.ready_since = list(self.ready_since)
        dup.agv_busy = list(self.agv_busy)
        dup.completed = self.completed
        dup.total_ops = self.total_ops
        dup.trace = self.trace.clone()
        dup.lookahead_fn = None
        dup.forced_target = {}
        return dup


class FmsNet:
    """The built net plus the instance it encodes."""

    def __init__(self, net: CTPNet, instance: Instance, layout: FmsLayout):
        self.net = net
        self.instance = instance
        self.layout = layout

    @property
    def ctx(self) -> FmsContext:
        return self.net.ctx

    @property
    def mode(self) -> str:
        return self.layout.mode

    @property
    def positions(self) -> dict:
        return {"agv": list(self.ctx.agv_pos), "tt": list(self.ctx.tt_pos)}

    def clone(self) -> "FmsNet":
        return FmsNet(self.net.clone(), self.instance, self.layout)

    def is_complete(self) -> bool:
        return self.ctx.completed == self.ctx.total_ops


def transport_delay(fms: FmsNet, agv: int, origin: int, dest: int) -> int:
    """AGV travel time between two locations (0 = load/unload station)."""
    side = len(fms.ctx.d_agv)
    if not (0 <= origin < side and 0 <= dest < side):
        raise ValueError(f"locations must be in [0, {side})")
    return fms.ctx.d_agv[origin][dest]


def relocation_target(fms: FmsNet, agv: int) -> Optional[int]:
    """Pickup location of the AGV's next buffered token, None if unknown."""
    head = fms.net.places[fms.layout.agv_buffer[agv]].head()
    return None if head is None else head.pickup


def _has_pending_transport(net: CTPNet) -> bool:
    lay = net.ctx.layout
    if net.places[lay.staging].tokens:
        return True
    return any(net.places[p].tokens for p in lay.job_queue)


def _relocation_delay(net: CTPNet, k: int, marker: Token) -> int:
    """Delay of the post-unload (or corrective) relocation of AGV k.

    Fixed the moment the vehicle enters the relocation place: exact travel
    to the next buffered pickup, zero when no transport can ever be needed
    again, a lookahead prediction when available, and otherwise the matrix
    maximum (worst case, charged so empty buffers stay expensive).
    """
    ctx = net.ctx
    pos = ctx.agv_pos[k]
    marker.pickup = pos
    head = net.places[ctx.layout.agv_buffer[k]].head()
    if head is not None:
        marker.dropoff = head.pickup
        return ctx.d_agv[pos][head.pickup]
    if not _has_pending_transport(net):
        marker.dropoff = pos
        return 0
    if k in ctx.forced_target:
        # lookahead twin: the parent pins the relocation it is pricing
        target = ctx.forced_target.pop(k)
        marker.dropoff = target
        return ctx.d_agv[pos][target]
    if ctx.lookahead_fn is not None:
        target = ctx.lookahead_fn(net, k)
        if target is not None:
            marker.dropoff = target
            return ctx.d_agv[pos][target]
    marker.dropoff = UNKNOWN
    return ctx.max_agv


def build(instance: Instance, q: Optional[int] = None,
          s: Optional[int] = None, mode: str = MODE_AGV) -> FmsNet:
    """Wire the full net for an instance and seed its initial marking."""
    if mode not in (MODE_AGV, MODE_TOOLS):
        raise BuildError(f"unknown mode {mode!r}")
    q = instance.n_agvs if q is None else q
    s = instance.n_tts if s is None else s
    if q < 1:
        raise BuildError("at least one AGV is required")
    tools = mode == MODE_TOOLS
    if tools:
        if s < 1:
            raise BuildError("tools mode needs at least one tool transporter")
        if instance.d_tt is None:
            raise BuildError(
                f"instance {instance.name} carries no tool data")
        for ops in instance.jobs:
            for op in ops:
                if op.tool is None:
                    raise BuildError(
                        f"instance {instance.name} has tool-less operations")

    J, M, T = instance.n_jobs, instance.n_machines, instance.n_tools
    places: list[Place] = []

    def add_place(name, role):
        p = Place(len(places), name, role)
        places.append(p)
        return p.id

    job_queue = tuple(add_place(f"job_queue[{i}]", "job_queue")
                      for i in range(J))
    staging = add_place("staging", "agv_buffer")
    agv_buffer = tuple(add_place(f"agv_buffer[{k}]", "agv_buffer")
                       for k in range(q))
    agv_idle = tuple(add_place(f"agv_idle[{k}]", "agv_idle")
                     for k in range(q))
    agv_transport = tuple(add_place(f"agv_transport[{k}]", "agv_transport")
                          for k in range(q))
    agv_relocation = tuple(add_place(f"agv_relocation[{k}]",
                                     "agv_relocation") for k in range(q))
    delivered = add_place("delivered", "delivered")
    machine_buffer = tuple(add_place(f"machine_buffer[{m}]", "machine_buffer")
                           for m in range(M))
    machine_idle = tuple(add_place(f"machine_idle[{m}]", "machine_idle")
                         for m in range(M))
    machine_processing = tuple(
        add_place(f"machine_processing[{m}]", "machine_processing")
        for m in range(M))
    done = add_place("done", "done")

    if tools:
        request_hub = add_place("tool_request_hub", "tool_request")
        tool_request = tuple(add_place(f"tool_request[{t}]", "tool_request")
                             for t in range(T))
        tool_store = tuple(add_place(f"tool_store[{u}]", "tool_store")
                           for u in range(M + 1))
        tool_ready = tuple(add_place(f"tool_ready[{m}]", "tool_store")
                           for m in range(M))
        tool_in_use = tuple(add_place(f"tool_in_use[{m}]", "tool_store")
                            for m in range(M))
        tt_queue = add_place("tt_queue", "tool_transporter_buffer")
        tt_idle = tuple(add_place(f"tt_idle[{u}]", "tool_transporter_idle")
                        for u in range(s))
        tt_fetch = tuple(add_place(f"tt_fetch[{u}]",
                                   "tool_transporter_transport")
                         for u in range(s))
        tt_carry = tuple(add_place(f"tt_carry[{u}]",
                                   "tool_transporter_transport")
                         for u in range(s))
        tool_delivered = add_place("tool_delivered", "delivered")
    else:
        request_hub = tt_queue = tool_delivered = -1
        tool_request = tool_store = tool_ready = tool_in_use = ()
        tt_idle = tt_fetch = tt_carry = ()

    layout = FmsLayout(
        mode=mode, n_jobs=J, n_machines=M, n_tools=T, q=q, s=s,
        job_queue=job_queue, staging=staging, agv_buffer=agv_buffer,
        agv_idle=agv_idle, agv_transport=agv_transport,
        agv_relocation=agv_relocation, delivered=delivered,
        machine_buffer=machine_buffer, machine_idle=machine_idle,
        machine_processing=machine_processing, done=done,
        request_hub=request_hub, tool_request=tool_request,
        tool_store=tool_store, tool_ready=tool_ready,
        tool_in_use=tool_in_use, tt_queue=tt_queue, tt_idle=tt_idle,
        tt_fetch=tt_fetch, tt_carry=tt_carry,
        tool_delivered=tool_delivered)

    transitions: list[Transition] = []

    def add(name, kind, upstream, downstream, **kw):
        t = Transition(len(transitions), name, kind, upstream, downstream,
                       **kw)
        transitions.append(t)
        return t.id

    d_agv, d_tt = instance.d_agv, instance.d_tt

    # -- jobs block: one controlled select per job -------------------------
    def job_guard(i):
        def guard(net, payload):
            return not net.ctx.inflight[i]
        return guard

    def job_fired(i):
        def hook(net, t, payload, companions):
            net.ctx.inflight[i] = True
            net.ctx.selected_count[i] += 1
        return hook

    for i in range(J):
        if tools:
            down = [staging, request_hub]
            emit = {staging: EMIT_PAYLOAD, request_hub: EMIT_COPY}
        else:
            down = [staging]
            emit = {staging: EMIT_PAYLOAD}
        # watches `done`: completing an operation clears the in-flight
        # latch and may re-enable this select
        add(f"job_select[{i}]", CONTROLLED, [job_queue[i]], down, emit=emit,
            extra_guard=job_guard(i), on_fire=job_fired(i),
            watches=(done,))

    # -- AGV block: controlled assignment, then autonomous travel ----------
    for k in range(q):
        add(f"agv_select[{k}]", CONTROLLED, [staging], [agv_buffer[k]])

    for k in range(q):
        def fetch_guard(k=k):
            def guard(net, marker):
                head = net.places[agv_buffer[k]].head()
                if head is None:
                    return False
                pos = net.ctx.agv_pos[k]
                return pos != UNKNOWN and pos != head.pickup
            return guard

        add(f"agv_go_fetch[{k}]", AUTOMATIC, [agv_idle[k]],
            [agv_relocation[k]], extra_guard=fetch_guard(),
            watches=(agv_buffer[k],))

        def load_guard(k=k):
            def guard(net, payload):
                pos = net.ctx.agv_pos[k]
                return pos == UNKNOWN or pos == payload.pickup
            return guard

        def load_fired(k=k):
            def hook(net, t, payload, companions):
                if net.ctx.agv_pos[k] == UNKNOWN:
                    net.ctx.agv_pos[k] = payload.pickup
            return hook

        add(f"agv_load[{k}]", AUTOMATIC, [agv_buffer[k], agv_idle[k]],
            [agv_transport[k]], extra_guard=load_guard(),
            on_fire=load_fired())

        def unload_fired(k=k):
            def hook(net, t, payload, companions):
                ctx = net.ctx
                ctx.trace.add(KIND_AGV, k, payload.color.job,
                              payload.order_index, payload.entered_at,
                              net.clock, LEG_LOADED)
                ctx.agv_busy[k] += net.clock - payload.entered_at
                ctx.agv_pos[k] = payload.dropoff
            return hook

        add(f"agv_unload[{k}]", TIMED, [agv_transport[k]],
            [delivered, agv_relocation[k]],
            emit={delivered: EMIT_PAYLOAD, agv_relocation[k]: EMIT_MARKER},
            delay_source=lambda net, tok: tok.transport_time,
            on_fire=unload_fired())

        def reloc_delay(k=k):
            def delay(net, marker):
                return _relocation_delay(net, k, marker)
            return delay

        def reloc_fired(k=k):
            def hook(net, t, marker, companions):
                ctx = net.ctx
                target = marker.dropoff
                if target == UNKNOWN:
                    head = net.places[agv_buffer[k]].head()
                    target = UNKNOWN if head is None else head.pickup
                ctx.agv_pos[k] = target
                if net.clock > marker.entered_at:
                    ctx.trace.add(KIND_AGV, k, -1, -1, marker.entered_at,
                                  net.clock, LEG_DEADHEAD)
                    ctx.agv_busy[k] += net.clock - marker.entered_at
            return hook

        add(f"agv_relocate_done[{k}]", TIMED, [agv_relocation[k]],
            [agv_idle[k]], delay_source=reloc_delay(),
            on_fire=reloc_fired())

    # -- machine block ------------------------------------------------------
    for m in range(M):
        add(f"route_to_machine[{m}]", COLORED, [delivered],
            [machine_buffer[m]], color_match=Color(machine=m))

    for m in range(M):
        if tools:
            def startable(m=m):
                def select(net, place):
                    ready = {tok.color.tool
                             for tok in net.places[tool_ready[m]].tokens}
                    for i, tok in enumerate(place.tokens):
                        if tok.color.tool in ready:
                            return i
                    return None
                return select

            add(f"machine_start[{m}]", AUTOMATIC,
                [machine_buffer[m], machine_idle[m], tool_ready[m]],
                [machine_processing[m], tool_in_use[m]],
                emit={machine_processing[m]: EMIT_PAYLOAD,
                      tool_in_use[m]: ("companion", tool_ready[m])},
                payload_select=startable(),
                companion_match={tool_ready[m]:
                                 lambda p, t: t.color.tool == p.color.tool})
        else:
            add(f"machine_start[{m}]", AUTOMATIC,
                [machine_buffer[m], machine_idle[m]],
                [machine_processing[m]])

    for m in range(M):
        def done_fired(m=m):
            def hook(net, t, payload, companions):
                ctx = net.ctx
                job = payload.color.job
                ctx.trace.add(KIND_MACHINE, m, job, payload.order_index,
                              payload.entered_at, net.clock, LEG_PROCESS)
                ctx.inflight[job] = False
                ctx.ready_since[job] = net.clock
                ctx.completed += 1
            return hook

        if tools:
            add(f"machine_done[{m}]", TIMED,
                [machine_processing[m], tool_in_use[m]],
                [done, machine_idle[m], tool_store[m + 1]],
                emit={done: EMIT_PAYLOAD, machine_idle[m]: EMIT_MARKER,
                      tool_store[m + 1]: ("companion", tool_in_use[m])},
                delay_source=lambda net, tok: tok.process_time,
                on_fire=done_fired())
        else:
            add(f"machine_done[{m}]", TIMED, [machine_processing[m]],
                [done, machine_idle[m]],
                emit={done: EMIT_PAYLOAD, machine_idle[m]: EMIT_MARKER},
                delay_source=lambda net, tok: tok.process_time,
                on_fire=done_fired())

    # -- tool-sharing block --------------------------------------------------
    if tools:
        for t in range(T):
            add(f"sort_tool_request[{t}]", COLORED, [request_hub],
                [tool_request[t]], color_match=Color(tool=t))

        for t in range(T):
            def tool_of(t=t):
                return lambda payload, tok: tok.color.tool == t

            for m in range(M):
                def local_guard(m=m):
                    def guard(net, payload):
                        return payload.color.machine == m
                    return guard

                add(f"tool_grant_local[{t},{m}]", AUTOMATIC,
                    [tool_request[t], tool_store[m + 1]],
                    [tool_ready[m]],
                    emit={tool_ready[m]: ("companion", tool_store[m + 1])},
                    companion_match={tool_store[m + 1]: tool_of()},
                    extra_guard=local_guard())

            for u in range(M + 1):
                def move_guard(u=u):
                    def guard(net, payload):
                        return payload.color.machine + 1 != u
                    return guard

                def move_fired(u=u, t=t, store=tool_store[u]):
                    def hook(net, tr, payload, companions):
                        tool_tok = companions[store]
                        tool_tok.pickup = u
                        tool_tok.dropoff = payload.color.machine + 1
                        tool_tok.color = Color(job=payload.color.job,
                                               machine=payload.color.machine,
                                               tool=t)
                        tool_tok.order_index = payload.order_index
                    return hook

                add(f"tool_dispatch[{t},{u}]", AUTOMATIC,
                    [tool_request[t], tool_store[u]],
                    [tt_queue],
                    emit={tt_queue: ("companion", tool_store[u])},
                    companion_match={tool_store[u]: tool_of()},
                    extra_guard=move_guard(), on_fire=move_fired())

        for u in range(s):
            add(f"tt_select[{u}]", AUTOMATIC, [tt_queue, tt_idle[u]],
                [tt_fetch[u]])

            def fetch_delay(u=u):
                def delay(net, tok):
                    return net.ctx.d_tt[net.ctx.tt_pos[u]][tok.pickup]
                return delay

            def fetch_fired(u=u):
                def hook(net, t, payload, companions):
                    ctx = net.ctx
                    if net.clock > payload.entered_at:
                        ctx.trace.add(KIND_TT, u, -1, -1, payload.entered_at,
                                      net.clock, LEG_DEADHEAD)
                    ctx.tt_pos[u] = payload.pickup
                return hook

            add(f"tt_fetch_done[{u}]", TIMED, [tt_fetch[u]], [tt_carry[u]],
                delay_source=fetch_delay(), on_fire=fetch_fired())

            def deliver_delay(u=u):
                def delay(net, tok):
                    return net.ctx.d_tt[tok.pickup][tok.dropoff]
                return delay

            def deliver_fired(u=u):
                def hook(net, t, payload, companions):
                    ctx = net.ctx
                    ctx.trace.add(KIND_TT, u, payload.color.job,
                                  payload.order_index, payload.entered_at,
                                  net.clock, LEG_TOOL_MOVE)
                    ctx.tt_pos[u] = payload.dropoff
                return hook

            add(f"tt_deliver[{u}]", TIMED, [tt_carry[u]],
                [tool_delivered, tt_idle[u]],
                emit={tool_delivered: EMIT_PAYLOAD, tt_idle[u]: EMIT_MARKER},
                delay_source=deliver_delay(), on_fire=deliver_fired())

        for m in range(M):
            add(f"tool_arrive[{m}]", COLORED, [tool_delivered],
                [tool_ready[m]], color_match=Color(machine=m))

    controllable = list(range(J + q))  # job selects, then AGV selects
    ctx = FmsContext(layout, d_agv, d_tt, instance.total_ops)
    net = CTPNet(places, transitions, controllable_ids=controllable, ctx=ctx)

    # initial marking: operations queued per job, vehicles idle at the
    # station, tools in the magazine
    for i, ops in enumerate(instance.jobs):
        prev_loc = 0
        for j, op in enumerate(ops):
            dest = op.machine + 1
            tok = net.new_token(
                color=Color(job=i, machine=op.machine, tool=op.tool),
                process_time=op.duration,
                transport_time=d_agv[prev_loc][dest],
                order_index=j, pickup=prev_loc, dropoff=dest)
            net.seed(job_queue[i], tok)
            prev_loc = dest
    for k in range(q):
        net.seed(agv_idle[k], net.new_token())
    for m in range(M):
        net.seed(machine_idle[m], net.new_token())
    if tools:
        for t in range(T):
            net.seed(tool_store[0], net.new_token(color=Color(tool=t)))
        for u in range(s):
            net.seed(tt_idle[u], net.new_token())
    return FmsNet(net, instance, layout)
