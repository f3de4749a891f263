"""Exhaustive search contracts and closed-form micro cases."""

import pytest

from fms import MODE_AGV, MODE_TOOLS
from fms.environment import EnvConfig, FmsEnv
from fms.solvers import RandomPolicy, brute_force_optimal
from fms.solvers.brute import SearchBudgetExceeded
from fms.solvers.heuristics import run_policy

from conftest import make_instance


def test_single_operation_closed_form():
    # one job, one op: station -> machine travel plus processing
    inst = make_instance([[(0, 0, 7)]], ((0, 5), (5, 0)), name="single")
    env = FmsEnv(inst, EnvConfig(mode=MODE_AGV, n_agvs=1))
    assert brute_force_optimal(env) == 5 + 7


def test_single_operation_with_tool_leg():
    # machine start waits for both the piece and the tool
    inst = make_instance([[(0, 0, 7)]], ((0, 5), (5, 0)),
                         d_tt=((0, 9), (9, 0)), name="singletool")
    env = FmsEnv(inst, EnvConfig(mode=MODE_TOOLS, n_agvs=1, n_tts=1))
    assert brute_force_optimal(env) == max(5, 9) + 7


def test_two_jobs_one_machine_zero_transport():
    # order-independent serial processing: sum of durations
    inst = make_instance([[(0, 0, 4)], [(0, 0, 9)]], ((0, 0), (0, 0)),
                         name="zerotravel")
    env = FmsEnv(inst, EnvConfig(mode=MODE_AGV, n_agvs=1))
    assert brute_force_optimal(env) == 4 + 9


def test_random_policy_never_beats_optimum():
    inst = make_instance([[(0, 0, 3), (1, 0, 5)], [(1, 0, 2)]],
                         ((0, 4, 6), (4, 0, 3), (6, 3, 0)), name="rb")
    optimum = brute_force_optimal(FmsEnv(inst, EnvConfig(mode=MODE_AGV,
                                                         n_agvs=1)))
    for seed in range(10):
        env = FmsEnv(inst, EnvConfig(mode=MODE_AGV, n_agvs=1))
        mk, _ = run_policy(env, RandomPolicy(seed=seed))
        assert mk >= optimum


def test_budget_refusal():
    from fms.instances import BENCHMARK_SEEDS, generate_instance
    big = generate_instance(8, 6, 6, BENCHMARK_SEEDS, name="big",
                            n_agvs=2, n_tts=1)
    env = FmsEnv(big, EnvConfig(mode=MODE_AGV, n_agvs=2))
    with pytest.raises(SearchBudgetExceeded):
        brute_force_optimal(env, node_limit=200)
