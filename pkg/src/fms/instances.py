"""Instance model and the seeded benchmark generator.

Instances are jobs x operations with (machine, tool, duration) triples plus
two symmetric travel-time matrices: D_AGV (row/col 0 is the load/unload
station) and D_TT (row/col 0 is the tool magazine).  The generator uses a
Lehmer LCG evaluated with the Schrage decomposition so the whole benchmark
regenerates bit-identically from five 31-bit seeds.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

try:
    import numba
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

LCG_A = 16807
LCG_B = 127773
LCG_C = 2836
LCG_M = 2 ** 31 - 1

# transport matrix entries are drawn from this range (processing times are
# U[1,99]; travel comparable but not dominating)
TRAVEL_LO = 2
TRAVEL_HI = 20


def lcg_next(state: int) -> int:
    """Advance the Lehmer generator once (Schrage decomposition).

    Equivalent to (16807 * state) mod (2^31 - 1) without 64-bit overflow.
    """
    if not 0 < state < LCG_M:
        raise ValueError(f"LCG state {state} outside (0, 2^31-1)")
    q, r = divmod(state, LCG_B)
    nxt = LCG_A * r - q * LCG_C
    if nxt < 0:
        nxt += LCG_M
    return nxt


if _HAVE_NUMBA:
    @numba.njit("uint64[:](uint64, int64)", cache=True)
    def _stream_jit(state, n):  # pragma: no cover - exercised via lcg_stream
        out = np.empty(n, dtype=np.uint64)
        a = numba.uint64(LCG_A)
        b = numba.uint64(LCG_B)
        c = numba.uint64(LCG_C)
        m = numba.uint64(LCG_M)
        x = state
        for i in range(n):
            q = x // b
            r = x - q * b
            hi = a * r
            lo = q * c
            if hi >= lo:
                x = hi - lo
            else:
                x = hi - lo + m
            out[i] = x
        return out


def lcg_stream(state: int, n: int) -> np.ndarray:
    """The next n states as uint64, same Schrage recurrence as lcg_next."""
    if not 0 < state < LCG_M:
        raise ValueError(f"LCG state {state} outside (0, 2^31-1)")
    if _HAVE_NUMBA:
        return _stream_jit(np.uint64(state), n)
    out = np.empty(n, dtype=np.uint64)
    x = state
    for i in range(n):
        x = lcg_next(x)
        out[i] = x
    return out


def lcg_uniform_int(state: int, lo: int, hi: int) -> tuple[int, int]:
    """Draw an integer in [lo, hi]; returns (value, next_state)."""
    if lo > hi:
        raise ValueError(f"empty range [{lo}, {hi}]")
    state = lcg_next(state)
    u = state / LCG_M
    value = int(lo + u * (hi - lo + 1))
    if value > hi:  # u -> 1 edge
        value = hi
    return value, state


class LcgStream:
    """Stateful wrapper so one seed can feed several instances in a row."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        if not 0 < seed < LCG_M:
            raise ValueError(f"seed {seed} outside (0, 2^31-1)")
        self.state = seed

    def uniform_int(self, lo: int, hi: int) -> int:
        value, self.state = lcg_uniform_int(self.state, lo, hi)
        return value


@dataclass(frozen=True)
class SeedSet:
    machine_alloc: int
    tool_alloc: int
    proc_times: int
    tt_times: int
    agv_times: int

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not 0 < value < LCG_M:
                raise ValueError(f"seed {name}={value} outside (0, 2^31-1)")


# seeds of the published 80-instance benchmark
BENCHMARK_SEEDS = SeedSet(
    machine_alloc=398197754,
    tool_alloc=170719940,
    proc_times=840612802,
    tt_times=280219920,
    agv_times=180119550,
)

# 8 size groups (jobs, machines, tools); names sl<g>0 .. sl<g>9
BENCHMARK_GROUPS = {
    "sl0": (15, 15, 15),
    "sl1": (20, 15, 15),
    "sl2": (20, 20, 20),
    "sl3": (30, 15, 15),
    "sl4": (30, 20, 20),
    "sl5": (50, 15, 15),
    "sl6": (50, 20, 20),
    "sl7": (100, 20, 20),
}
# vehicle fleet shipped with generated instances
BENCHMARK_AGVS = 10
BENCHMARK_TTS = 5


@dataclass(frozen=True)
class Operation:
    machine: int            # 0-based machine index
    tool: Optional[int]     # 0-based tool index, None in AGV-only data
    duration: int           # integer processing time >= 1

    def __post_init__(self):
        if self.duration < 1:
            raise ValueError("operation duration must be >= 1")
        if self.machine < 0:
            raise ValueError("negative machine index")
        if self.tool is not None and self.tool < 0:
            raise ValueError("negative tool index")


@dataclass(frozen=True)
class Instance:
    name: str
    n_jobs: int
    n_machines: int
    n_tools: int
    n_agvs: int
    n_tts: int
    jobs: tuple            # tuple of tuples of Operation
    d_agv: tuple           # (m+1) x (m+1), row/col 0 = load/unload station
    d_tt: Optional[tuple]  # (m+1) x (m+1), row/col 0 = tool magazine

    def __post_init__(self):
        side = self.n_machines + 1
        _check_matrix(self.d_agv, side, "D_AGV")
        if self.d_tt is not None:
            _check_matrix(self.d_tt, side, "D_TT")
        for ops in self.jobs:
            for op in ops:
                if op.machine >= self.n_machines:
                    raise ValueError(
                        f"machine {op.machine} out of range in {self.name}")
                if op.tool is not None and op.tool >= self.n_tools:
                    raise ValueError(
                        f"tool {op.tool} out of range in {self.name}")

    @property
    def has_tools(self) -> bool:
        return self.d_tt is not None

    @property
    def total_ops(self) -> int:
        return sum(len(ops) for ops in self.jobs)

    @property
    def total_work(self) -> int:
        return sum(op.duration for ops in self.jobs for op in ops)

    def max_agv_travel(self) -> int:
        return max(max(row) for row in self.d_agv)


def _check_matrix(mat, side: int, label: str):
    if len(mat) != side or any(len(row) != side for row in mat):
        raise ValueError(f"{label} must be {side}x{side}")
    for u in range(side):
        if mat[u][u] != 0:
            raise ValueError(f"{label} diagonal must be zero")
        for v in range(side):
            if mat[u][v] < 0:
                raise ValueError(f"{label} entries must be nonnegative")


def _symmetric_matrix(side: int, stream: LcgStream) -> tuple:
    """Zero-diagonal symmetric matrix, upper triangle drawn row-major."""
    mat = [[0] * side for _ in range(side)]
    for u in range(side):
        for v in range(u + 1, side):
            d = stream.uniform_int(TRAVEL_LO, TRAVEL_HI)
            mat[u][v] = d
            mat[v][u] = d
    return tuple(tuple(row) for row in mat)


def _generate_one(name: str, n_jobs: int, n_machines: int, n_tools: int,
                  streams: dict, n_agvs: int, n_tts: int) -> Instance:
    durations = [[streams["proc"].uniform_int(1, 99)
                  for _ in range(n_machines)] for _ in range(n_jobs)]
    jobs = []
    for i in range(n_jobs):
        seq = list(range(1, n_machines + 1))
        for j in range(1, n_machines + 1):
            k = streams["machine"].uniform_int(j, n_machines)
            seq[j - 1], seq[k - 1] = seq[k - 1], seq[j - 1]
        tools = [streams["tool"].uniform_int(1, n_tools)
                 for _ in range(n_machines)]
        jobs.append(tuple(
            Operation(machine=seq[j] - 1, tool=tools[j] - 1,
                      duration=durations[i][j])
            for j in range(n_machines)))
    d_agv = _symmetric_matrix(n_machines + 1, streams["agv"])
    d_tt = _symmetric_matrix(n_machines + 1, streams["tt"])
    return Instance(name=name, n_jobs=n_jobs, n_machines=n_machines,
                    n_tools=n_tools, n_agvs=n_agvs, n_tts=n_tts,
                    jobs=tuple(jobs), d_agv=d_agv, d_tt=d_tt)


def _streams(seeds: SeedSet) -> dict:
    return {
        "machine": LcgStream(seeds.machine_alloc),
        "tool": LcgStream(seeds.tool_alloc),
        "proc": LcgStream(seeds.proc_times),
        "tt": LcgStream(seeds.tt_times),
        "agv": LcgStream(seeds.agv_times),
    }


def generate_instance(n_jobs: int, n_machines: int, n_tools: int,
                      seeds: SeedSet, name: str = "generated",
                      n_agvs: int = BENCHMARK_AGVS,
                      n_tts: int = BENCHMARK_TTS) -> Instance:
    """One instance from fresh streams; deterministic in all arguments."""
    if min(n_jobs, n_machines, n_tools) < 1:
        raise ValueError("all counts must be >= 1")
    return _generate_one(name, n_jobs, n_machines, n_tools,
                         _streams(seeds), n_agvs, n_tts)


def generate_group(group: str,
                   seeds: SeedSet = BENCHMARK_SEEDS) -> list[Instance]:
    """The ten instances of one size group.

    Streams start from the seed set and run on across the group, so
    instance k depends on the k instances before it.
    """
    if group not in BENCHMARK_GROUPS:
        raise ValueError(f"unknown group {group!r}; "
                         f"expected one of {sorted(BENCHMARK_GROUPS)}")
    n_jobs, n_machines, n_tools = BENCHMARK_GROUPS[group]
    streams = _streams(seeds)
    return [
        _generate_one(f"{group}{k}", n_jobs, n_machines, n_tools, streams,
                      BENCHMARK_AGVS, BENCHMARK_TTS)
        for k in range(10)
    ]


def generate_benchmark(seeds: SeedSet = BENCHMARK_SEEDS) -> list[Instance]:
    out = []
    for group in BENCHMARK_GROUPS:
        out.extend(generate_group(group, seeds))
    return out


# -- text format ------------------------------------------------------------
#
#   # comments start with '#'
#   n_jobs n_machines n_tools n_agvs n_tts
#   <n_jobs lines of `machine tool duration` triples; blank line = no ops>
#   <(m+1) lines of (m+1) ints: D_AGV>
#   <(m+1) lines of (m+1) ints: D_TT; omitted when n_tools == 0>


class ParseError(Exception):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def write_instance(inst: Instance) -> str:
    lines = [f"# name: {inst.name}"]
    n_tools = inst.n_tools if inst.has_tools else 0
    lines.append(f"{inst.n_jobs} {inst.n_machines} {n_tools} "
                 f"{inst.n_agvs} {inst.n_tts}")
    for ops in inst.jobs:
        fields = []
        for op in ops:
            tool = -1 if op.tool is None else op.tool
            fields += [str(op.machine), str(tool), str(op.duration)]
        lines.append(" ".join(fields))
    for row in inst.d_agv:
        lines.append(" ".join(str(x) for x in row))
    if inst.has_tools:
        for row in inst.d_tt:
            lines.append(" ".join(str(x) for x in row))
    return "\n".join(lines) + "\n"


def parse_instance(text: str, name: str = "instance") -> Instance:
    rows = []          # (line_no, payload) with comments/blanks preserved
    for no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].rstrip()
        if raw.lstrip().startswith("# name:"):
            name = raw.split(":", 1)[1].strip()
            continue
        if raw.strip().startswith("#"):
            continue
        rows.append((no, stripped))
    # drop leading/trailing fully blank rows but keep interior ones (a blank
    # job line means a job with no operations)
    while rows and not rows[0][1].strip():
        rows.pop(0)
    while rows and not rows[-1][1].strip():
        rows.pop()
    if not rows:
        raise ParseError(0, "empty instance file")

    def ints(entry, expect=None, label=""):
        no, payload = entry
        parts = payload.split()
        try:
            values = [int(p) for p in parts]
        except ValueError:
            raise ParseError(no, f"non-integer value in {label}") from None
        if expect is not None and len(values) != expect:
            raise ParseError(no, f"{label}: expected {expect} values, "
                                 f"got {len(values)}")
        return no, values

    idx = 0
    no, header = ints(rows[idx], 5, "header")
    idx += 1
    n_jobs, n_machines, n_tools, n_agvs, n_tts = header
    if n_jobs < 0 or n_machines < 1:
        raise ParseError(no, "bad header counts")
    jobs = []
    for i in range(n_jobs):
        if idx >= len(rows):
            raise ParseError(rows[-1][0], f"missing job line {i}")
        no, values = ints(rows[idx], None, f"job {i}")
        idx += 1
        if len(values) % 3 != 0:
            raise ParseError(no, f"job {i}: triples of "
                                 "`machine tool duration` expected")
        ops = []
        for k in range(0, len(values), 3):
            m, tool, dur = values[k], values[k + 1], values[k + 2]
            if not 0 <= m < n_machines:
                raise ParseError(no, f"job {i}: machine {m} out of range")
            if tool == -1:
                tool = None
            elif not 0 <= tool < max(n_tools, 1):
                raise ParseError(no, f"job {i}: tool {tool} out of range")
            if dur < 1:
                raise ParseError(no, f"job {i}: duration {dur} must be >= 1")
            ops.append(Operation(machine=m, tool=tool, duration=dur))
        jobs.append(tuple(ops))

    def matrix(label):
        nonlocal idx
        side = n_machines + 1
        mat = []
        for r in range(side):
            if idx >= len(rows):
                raise ParseError(rows[-1][0], f"{label}: missing row {r}")
            no, values = ints(rows[idx], side, f"{label} row {r}")
            idx += 1
            mat.append(tuple(values))
        return tuple(mat)

    d_agv = matrix("D_AGV")
    d_tt = matrix("D_TT") if n_tools > 0 else None
    if idx < len(rows) and rows[idx][1].strip():
        raise ParseError(rows[idx][0], "unexpected trailing data")
    try:
        return Instance(name=name, n_jobs=n_jobs, n_machines=n_machines,
                        n_tools=n_tools, n_agvs=n_agvs, n_tts=n_tts,
                        jobs=tuple(jobs), d_agv=d_agv, d_tt=d_tt)
    except ValueError as exc:
        raise ParseError(no, str(exc)) from None


def load_instance(path) -> Instance:
    from pathlib import Path
    p = Path(path)
    return parse_instance(p.read_text(), name=p.stem)


def instance_digest(inst: Instance) -> str:
    return hashlib.sha256(write_instance(inst).encode()).hexdigest()


def pad_instance(inst: Instance, target_jobs: int,
                 target_machines: int) -> Instance:
    """Embed an instance in a larger shell; extra slots stay empty.

    Extra jobs get no operations (their select transitions stay masked)
    and extra matrix rows/cols are filled with the max entry: they belong
    to machines that are never visited.
    """
    if target_jobs < inst.n_jobs or target_machines < inst.n_machines:
        raise ValueError("padding cannot shrink an instance")
    if target_jobs == inst.n_jobs and target_machines == inst.n_machines:
        return inst

    def embed(mat):
        side_old = inst.n_machines + 1
        side = target_machines + 1
        filler = max(max(row) for row in mat)
        out = [[filler] * side for _ in range(side)]
        for u in range(side):
            out[u][u] = 0
        for u in range(side_old):
            for v in range(side_old):
                out[u][v] = mat[u][v]
        return tuple(tuple(row) for row in out)

    jobs = list(inst.jobs) + [()] * (target_jobs - inst.n_jobs)
    return replace(
        inst,
        name=f"{inst.name}@{target_jobs}x{target_machines}",
        n_jobs=target_jobs,
        n_machines=target_machines,
        jobs=tuple(jobs),
        d_agv=embed(inst.d_agv),
        d_tt=embed(inst.d_tt) if inst.has_tools else None,
    )


def split_jobs(inst: Instance, partitions: int) -> list[Instance]:
    """Contiguous job batches for the sequential-injection scenario."""
    if partitions < 1 or partitions > inst.n_jobs:
        raise ValueError("partitions must be in [1, n_jobs]")
    base, extra = divmod(inst.n_jobs, partitions)
    out = []
    start = 0
    for k in range(partitions):
        size = base + (1 if k < extra else 0)
        chunk = inst.jobs[start:start + size]
        start += size
        out.append(replace(inst, name=f"{inst.name}.p{k + 1}",
                           n_jobs=len(chunk), jobs=chunk))
    return out
