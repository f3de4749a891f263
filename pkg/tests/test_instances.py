"""Generator exactness, file format round trips, padding."""

import json
from pathlib import Path

import pytest

from fms.instances import (BENCHMARK_SEEDS, LCG_M, Instance, Operation,
                           ParseError, SeedSet, generate_group,
                           generate_instance, instance_digest, lcg_next,
                           lcg_stream, lcg_uniform_int, pad_instance,
                           parse_instance, split_jobs, write_instance)

GOLDEN = Path(__file__).parent / "golden" / "benchmark_checksums.json"


def oracle_next(state: int) -> int:
    return (16807 * state) % LCG_M


class TestLcg:
    def test_first_value(self):
        assert lcg_next(1) == 16807

    def test_schrage_negative_branch(self):
        # state 127773 has zero remainder, forcing the +m correction
        assert lcg_next(127773) == 2147480811
        assert lcg_next(127773) == oracle_next(127773)

    def test_matches_oracle_prefix(self):
        for seed in (1, 42, 398197754, LCG_M - 1):
            x = seed
            for _ in range(2000):
                x = lcg_next(x)
                assert 0 < x < LCG_M
            y = seed
            for _ in range(2000):
                y = oracle_next(y)
            assert x == y

    def test_stream_matches_scalar(self):
        seq = lcg_stream(BENCHMARK_SEEDS.proc_times, 5000)
        x = BENCHMARK_SEEDS.proc_times
        for i in range(5000):
            x = lcg_next(x)
            assert int(seq[i]) == x

    def test_stream_pure_python_fallback(self, monkeypatch):
        import fms.instances as mod
        monkeypatch.setattr(mod, "_HAVE_NUMBA", False)
        fallback = mod.lcg_stream(BENCHMARK_SEEDS.agv_times, 400)
        monkeypatch.undo()
        fast = lcg_stream(BENCHMARK_SEEDS.agv_times, 400)
        assert (fallback == fast).all()

    def test_state_range_checked(self):
        for bad in (0, -3, LCG_M, LCG_M + 5):
            with pytest.raises(ValueError):
                lcg_next(bad)

    def test_uniform_degenerate_range(self):
        value, nxt = lcg_uniform_int(12345, 5, 5)
        assert value == 5 and 0 < nxt < LCG_M

    def test_uniform_bounds_hold(self):
        state = 987654321
        low = high = None
        for _ in range(20000):
            value, state = lcg_uniform_int(state, 1, 99)
            assert 1 <= value <= 99
            low = value if low is None else min(low, value)
            high = value if high is None else max(high, value)
        assert low == 1 and high == 99

    def test_uniform_rejects_empty_range(self):
        with pytest.raises(ValueError):
            lcg_uniform_int(1, 9, 3)


class TestSeedSet:
    def test_benchmark_seeds(self):
        assert BENCHMARK_SEEDS.machine_alloc == 398197754
        assert BENCHMARK_SEEDS.tool_alloc == 170719940
        assert BENCHMARK_SEEDS.proc_times == 840612802
        assert BENCHMARK_SEEDS.tt_times == 280219920
        assert BENCHMARK_SEEDS.agv_times == 180119550

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            SeedSet(0, 1, 1, 1, 1)
        with pytest.raises(ValueError):
            SeedSet(1, 1, LCG_M, 1, 1)


class TestGenerator:
    def test_deterministic(self):
        a = generate_instance(6, 5, 5, BENCHMARK_SEEDS, name="a")
        b = generate_instance(6, 5, 5, BENCHMARK_SEEDS, name="a")
        assert a == b

    def test_first_duration_frozen(self):
        # first processing-time draw from the published seed set
        inst = generate_instance(15, 15, 15, BENCHMARK_SEEDS, name="sl00")
        assert inst.jobs[0][0].duration == 94

    def test_machine_sequence_is_permutation(self):
        inst = generate_instance(8, 7, 7, BENCHMARK_SEEDS)
        for ops in inst.jobs:
            machines = sorted(op.machine for op in ops)
            assert machines == list(range(7))

    def test_swap_shuffle_identity(self):
        # a stream that always returns j leaves the sequence untouched
        seq = list(range(1, 6))
        for j in range(1, 6):
            k = j
            seq[j - 1], seq[k - 1] = seq[k - 1], seq[j - 1]
        assert seq == [1, 2, 3, 4, 5]

    def test_matrices_symmetric_zero_diagonal(self):
        inst = generate_instance(4, 6, 6, BENCHMARK_SEEDS)
        for mat in (inst.d_agv, inst.d_tt):
            side = len(mat)
            for u in range(side):
                assert mat[u][u] == 0
                for v in range(side):
                    assert mat[u][v] == mat[v][u]
                    assert mat[u][v] >= 0

    def test_group_streams_continue(self):
        group = generate_group("sl0")
        assert [i.name for i in group] == [f"sl0{k}" for k in range(10)]
        assert group[0] != group[1]
        # first instance of the group equals a fresh single generation
        solo = generate_instance(15, 15, 15, BENCHMARK_SEEDS, name="sl00")
        assert solo == group[0]

    def test_group_checksums_frozen(self):
        golden = json.loads(GOLDEN.read_text())
        for inst in generate_group("sl3"):
            assert instance_digest(inst) == golden[inst.name]

    def test_counts_validated(self):
        with pytest.raises(ValueError):
            generate_instance(0, 3, 3, BENCHMARK_SEEDS)


class TestFileFormat:
    def test_round_trip(self):
        inst = generate_instance(5, 4, 4, BENCHMARK_SEEDS, name="rt")
        assert parse_instance(write_instance(inst)) == inst

    def test_round_trip_all_groups_sample(self):
        for group in ("sl0", "sl7"):
            inst = generate_group(group)[0]
            assert parse_instance(write_instance(inst)) == inst

    def test_agv_only_file_omits_tool_matrix(self):
        inst = make_agv_only()
        text = write_instance(inst)
        parsed = parse_instance(text)
        assert parsed == inst
        assert parsed.d_tt is None
        assert all(op.tool is None for ops in parsed.jobs for op in ops)

    def test_empty_job_line(self):
        inst = generate_instance(3, 3, 3, BENCHMARK_SEEDS, name="pademp")
        padded = pad_instance(inst, 5, 3)
        assert parse_instance(write_instance(padded)) == padded

    def test_wrong_row_length_names_row(self):
        inst = generate_instance(3, 3, 3, BENCHMARK_SEEDS, name="x")
        lines = write_instance(inst).splitlines()
        # first D_AGV row sits right after the header and 3 job lines
        row_idx = next(i for i, ln in enumerate(lines)
                       if i > 1 and not ln.startswith("#"))
        row_idx += 3  # skip job lines
        lines[row_idx] = lines[row_idx] + " 7"
        with pytest.raises(ParseError, match="expected 4 values"):
            parse_instance("\n".join(lines))

    def test_negative_duration_rejected(self):
        text = "1 1 0 1 1\n0 -1 -4\n0 0\n0 0\n"
        with pytest.raises(ParseError, match="duration"):
            parse_instance(text)

    def test_index_out_of_range_rejected(self):
        text = "1 2 0 1 1\n5 -1 4\n0 1 1\n1 0 1\n1 1 0\n"
        with pytest.raises(ParseError, match="machine"):
            parse_instance(text)


def make_agv_only() -> Instance:
    ops = ((Operation(0, None, 5), Operation(1, None, 3)),
           (Operation(1, None, 2),))
    d = ((0, 4, 6), (4, 0, 3), (6, 3, 0))
    return Instance(name="plainagv", n_jobs=2, n_machines=2, n_tools=0,
                    n_agvs=2, n_tts=0, jobs=ops, d_agv=d, d_tt=None)


class TestPadding:
    def test_pad_identity(self):
        inst = generate_instance(4, 3, 3, BENCHMARK_SEEDS)
        assert pad_instance(inst, 4, 3) is inst

    def test_pad_shapes(self):
        inst = generate_instance(4, 3, 3, BENCHMARK_SEEDS, name="p")
        padded = pad_instance(inst, 10, 6)
        assert padded.n_jobs == 10 and padded.n_machines == 6
        assert all(len(ops) == 0 for ops in padded.jobs[4:])
        assert len(padded.d_agv) == 7
        filler = max(max(row) for row in inst.d_agv)
        assert padded.d_agv[6][1] == filler
        assert padded.d_agv[6][6] == 0
        # original block preserved
        for u in range(4):
            for v in range(4):
                assert padded.d_agv[u][v] == inst.d_agv[u][v]

    def test_pad_shrink_rejected(self):
        inst = generate_instance(4, 3, 3, BENCHMARK_SEEDS)
        with pytest.raises(ValueError):
            pad_instance(inst, 3, 3)


class TestSplit:
    def test_partition_sizes(self):
        inst = generate_instance(10, 3, 3, BENCHMARK_SEEDS, name="s")
        parts = split_jobs(inst, 4)
        assert [p.n_jobs for p in parts] == [3, 3, 2, 2]
        assert sum(p.total_ops for p in parts) == inst.total_ops

    def test_single_partition_is_whole(self):
        inst = generate_instance(4, 3, 3, BENCHMARK_SEEDS, name="s")
        parts = split_jobs(inst, 1)
        assert parts[0].jobs == inst.jobs
