"""Gantt export round trips and validator detection power."""

import pytest

from fms import MODE_AGV, MODE_TOOLS
from fms.environment import EnvConfig, FmsEnv
from fms.solvers import RandomPolicy
from fms.solvers.heuristics import run_policy
from fms.trace import (GANTT_HEADER, ScheduleTrace, TraceRecord,
                       export_gantt, parse_gantt, validate)


def solved(instance, mode, q=2, s=2, seed=0):
    env = FmsEnv(instance, EnvConfig(mode=mode, n_agvs=q, n_tts=s))
    run_policy(env, RandomPolicy(seed=seed))
    return env


class TestExport:
    def test_empty_trace_header_only(self):
        assert export_gantt(ScheduleTrace()) == GANTT_HEADER + "\n"

    def test_round_trip(self, bench_instance):
        env = solved(bench_instance, MODE_TOOLS)
        text = export_gantt(env.trace())
        assert parse_gantt(text) == env.trace()

    def test_round_trip_preserves_makespan(self, bench_instance):
        env = solved(bench_instance, MODE_AGV)
        assert parse_gantt(export_gantt(env.trace())).makespan \
            == env.makespan()

    def test_record_count_accounts_all_legs(self, bench_instance):
        env = solved(bench_instance, MODE_AGV)
        recs = env.trace().records
        process = [r for r in recs if r.leg == "process"]
        loaded = [r for r in recs if r.leg == "loaded"]
        assert len(process) == bench_instance.total_ops
        assert len(loaded) == bench_instance.total_ops
        assert len(recs) >= 2 * bench_instance.total_ops

    def test_bad_header_rejected(self):
        with pytest.raises(ValueError):
            parse_gantt("nope\n")

    def test_bad_leg_rejected(self):
        with pytest.raises(ValueError):
            parse_gantt(GANTT_HEADER + "\nmachine,0,0,0,0,5,flying\n")


class TestValidator:
    def test_engine_traces_clean(self, bench_instance):
        for mode in (MODE_AGV, MODE_TOOLS):
            for seed in range(4):
                env = solved(bench_instance, mode, seed=seed)
                assert validate(env.trace(), bench_instance, mode=mode) == []

    def test_machine_overlap_detected(self, bench_instance):
        env = solved(bench_instance, MODE_AGV)
        trace = env.trace()
        first = next(r for r in trace.records if r.leg == "process")
        trace.records.append(TraceRecord("machine", first.rid, 0, 0,
                                         first.start, first.end + 3,
                                         "process"))
        codes = {v.code for v in validate(trace, bench_instance,
                                          mode=MODE_AGV)}
        assert "machine exclusivity" in codes

    def test_wrong_leg_duration_detected(self, bench_instance):
        env = solved(bench_instance, MODE_AGV)
        trace = env.trace()
        idx, victim = next(
            (i, r) for i, r in enumerate(trace.records)
            if r.leg == "loaded")
        trace.records[idx] = TraceRecord(victim.kind, victim.rid,
                                         victim.job, victim.op,
                                         victim.start, victim.end + 1,
                                         victim.leg)
        codes = {v.code for v in validate(trace, bench_instance,
                                          mode=MODE_AGV)}
        assert "transport time" in codes

    def test_missing_tool_move_detected(self, bench_instance):
        env = solved(bench_instance, MODE_TOOLS)
        trace = env.trace()
        moves = [i for i, r in enumerate(trace.records)
                 if r.leg == "tool_move"]
        assert moves
        del trace.records[moves[0]]
        codes = {v.code for v in validate(trace, bench_instance,
                                          mode=MODE_TOOLS)}
        assert "tool availability" in codes or "tool transport time" in codes

    def test_precedence_violation_detected(self, bench_instance):
        env = solved(bench_instance, MODE_AGV)
        trace = env.trace()
        # pull a second operation's start before its predecessor's end
        idx, victim = next(
            (i, r) for i, r in enumerate(trace.records)
            if r.leg == "process" and r.op == 1)
        trace.records[idx] = TraceRecord(victim.kind, victim.rid,
                                         victim.job, victim.op, 0,
                                         victim.end - victim.start, "process")
        codes = {v.code for v in validate(trace, bench_instance,
                                          mode=MODE_AGV)}
        assert codes & {"job precedence", "material availability",
                        "machine exclusivity"}

    def test_tool_conflict_detected(self, bench_instance):
        # two machines claiming the same tool at once
        env = solved(bench_instance, MODE_TOOLS)
        trace = env.trace()
        proc = [r for r in trace.records if r.leg == "process"]
        ops = {(r.job, r.op): r for r in proc}
        by_tool = {}
        for (j, k), r in ops.items():
            tool = bench_instance.jobs[j][k].tool
            by_tool.setdefault(tool, []).append(r)
        tool, recs = next((t, rs) for t, rs in by_tool.items()
                          if len(rs) >= 2)
        a, b = recs[0], recs[1]
        idx = trace.records.index(b)
        trace.records[idx] = TraceRecord(b.kind, b.rid, b.job, b.op,
                                         a.start, a.start + (b.end - b.start),
                                         "process")
        issues = validate(trace, bench_instance, mode=MODE_TOOLS)
        assert issues  # shifted processing breaks at least one constraint
