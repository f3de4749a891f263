"""Shared fixtures: hand-built micro instances and generated small ones."""

from __future__ import annotations

import pytest

from fms import BENCHMARK_SEEDS, Instance, Operation, SeedSet, \
    generate_instance


def make_instance(jobs, d_agv, d_tt=None, n_machines=None, n_tools=None,
                  name="micro", n_agvs=1, n_tts=1) -> Instance:
    """Instance from op triples: jobs = [[(machine, tool, duration), ...]]."""
    ops = tuple(
        tuple(Operation(machine=m, tool=t, duration=d) for m, t, d in job)
        for job in jobs)
    machines = n_machines
    if machines is None:
        machines = 1 + max((op.machine for job in ops for op in job),
                           default=0)
    tools = n_tools
    if tools is None:
        tools = 1 + max((op.tool for job in ops for op in job
                         if op.tool is not None), default=0)
    return Instance(name=name, n_jobs=len(ops), n_machines=machines,
                    n_tools=max(tools, 1), n_agvs=n_agvs, n_tts=n_tts,
                    jobs=ops, d_agv=d_agv, d_tt=d_tt)


D2 = ((0, 4, 6), (4, 0, 3), (6, 3, 0))          # station + 2 machines
D2B = ((0, 2, 5), (2, 0, 7), (5, 7, 0))
D1 = ((0, 5), (5, 0))                           # station + 1 machine


def micro_instances():
    """Micro cases (<=2 jobs, <=2 machines, 1 AGV) with varied shapes.

    Returns [(instance, mode), ...]; tools-mode entries carry D_TT.
    """
    cases = []

    def agv(name, jobs, d_agv, **kw):
        cases.append((make_instance(jobs, d_agv, name=name, **kw),
                      "agv_only"))

    def tool(name, jobs, d_agv, d_tt, **kw):
        cases.append((make_instance(jobs, d_agv, d_tt, name=name, **kw),
                      "agv_and_tools"))

    agv("m01", [[(0, 0, 7)]], D1)
    agv("m02", [[(0, 0, 3)]], ((0, 9), (9, 0)))
    agv("m03", [[(0, 0, 5), (1, 0, 4)]], D2)
    agv("m04", [[(1, 0, 6), (0, 0, 2)]], D2B)
    agv("m05", [[(0, 0, 4)], [(0, 0, 9)]], D1)
    agv("m06", [[(0, 0, 8)], [(1, 0, 3)]], D2)
    agv("m07", [[(0, 0, 5)], [(1, 0, 5)]], D2B)
    agv("m08", [[(0, 0, 2), (1, 0, 9)], [(1, 0, 4)]], D2)
    agv("m09", [[(1, 0, 7), (0, 0, 1)], [(0, 0, 6)]], D2B)
    agv("m10", [[(0, 0, 3), (1, 0, 3)], [(1, 0, 3), (0, 0, 3)]], D2)
    agv("m11", [[(0, 0, 9), (1, 0, 2)], [(0, 0, 5), (1, 0, 8)]], D2B)
    agv("m12", [[(1, 0, 1), (0, 0, 1)], [(1, 0, 1), (0, 0, 1)]], D2)
    agv("m13", [[(0, 0, 12)], [(0, 0, 1)]], ((0, 3), (3, 0)))
    agv("m14", [[(1, 0, 5), (0, 0, 5)], [(0, 0, 7)]], D2)
    agv("m15", [[(0, 0, 6), (1, 0, 6)], [(1, 0, 2), (0, 0, 2)]], D2B)
    tool("m16", [[(0, 0, 5)]], D1, ((0, 4), (4, 0)))
    tool("m17", [[(0, 0, 4), (1, 1, 6)]], D2, D2B)
    tool("m18", [[(0, 0, 7)], [(1, 0, 3)]], D2, D2)
    tool("m19", [[(0, 1, 2), (1, 0, 8)], [(1, 1, 5)]], D2B, D2)
    tool("m20", [[(0, 0, 3)], [(0, 0, 6)]], D1, ((0, 8), (8, 0)))
    tool("m21", [[(1, 0, 4), (0, 1, 4)], [(0, 0, 9), (1, 1, 1)]], D2, D2B)
    agv("m22", [[(0, 0, 1), (1, 0, 99)], [(1, 0, 50)]], D2B)
    agv("m23", [[(0, 0, 4)], [(0, 0, 9)]], ((0, 0), (0, 0)))
    # job revisits a machine: the second leg has pickup == dropoff
    agv("m24", [[(0, 0, 5), (0, 0, 3)], [(1, 0, 4)]], D2)
    return cases


@pytest.fixture(scope="session")
def micros():
    return micro_instances()


@pytest.fixture(scope="session")
def small_instance():
    """EX-style 5 jobs x 4 machines layout, two AGVs."""
    seeds = SeedSet(machine_alloc=11, tool_alloc=22, proc_times=33,
                    tt_times=44, agv_times=55)
    return generate_instance(5, 4, 4, seeds, name="ex54", n_agvs=2, n_tts=1)


@pytest.fixture(scope="session")
def bench_instance():
    return generate_instance(4, 3, 3, BENCHMARK_SEEDS, name="g43",
                             n_agvs=2, n_tts=2)
