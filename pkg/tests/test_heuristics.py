"""Dispatching-rule behaviour and mask discipline."""

import pytest

from fms import MODE_AGV
from fms.environment import EnvConfig, FmsEnv
from fms.solvers import RandomPolicy
from fms.solvers.heuristics import (AGV_RULES, JOB_RULES, heuristic_policy,
                                    run_policy)

from conftest import D2, make_instance


def fresh_env(inst, q=1):
    return FmsEnv(inst, EnvConfig(mode=MODE_AGV, n_agvs=q))


class TestJobRules:
    def test_fifo_lowest_index_on_tie(self):
        inst = make_instance([[(0, 0, 5)], [(0, 0, 5)], [(0, 0, 5)]],
                             D2, n_machines=2, name="tie")
        env = fresh_env(inst)
        assert heuristic_policy("fifo").decide(env) == 0

    def test_spt_prefers_short_total(self):
        inst = make_instance([[(0, 0, 10)], [(0, 0, 30)]], D2,
                             n_machines=2, name="spt")
        env = fresh_env(inst)
        assert heuristic_policy("spt").decide(env) == 0
        assert heuristic_policy("lpt").decide(env) == 1

    def test_sptn_uses_next_operation(self):
        # job 0 next op is long but total is short; SPTN checks the head
        inst = make_instance([[(0, 0, 40), (1, 0, 1)],
                              [(0, 0, 10), (1, 0, 50)]], D2, name="sptn")
        env = fresh_env(inst)
        assert heuristic_policy("sptn").decide(env) == 1
        assert heuristic_policy("lptn").decide(env) == 0

    def test_mtwr_vs_ltwr_disagree(self):
        inst = make_instance([[(0, 0, 40), (1, 0, 30)], [(0, 0, 10)]],
                             D2, name="twr")
        env = fresh_env(inst)
        a = heuristic_policy("mtwr").decide(env)
        b = heuristic_policy("ltwr").decide(env)
        assert a == 0 and b == 1

    def test_sps_vs_lps(self):
        inst = make_instance([[(0, 0, 9), (1, 0, 9)], [(0, 0, 9)]],
                             D2, name="sps")
        env = fresh_env(inst)
        assert heuristic_policy("sps").decide(env) == 1
        assert heuristic_policy("lps").decide(env) == 0

    def test_unknown_rules_rejected(self):
        with pytest.raises(ValueError):
            heuristic_policy("zzz")
        with pytest.raises(ValueError):
            heuristic_policy("fifo", "zzz")


class TestAgvRules:
    def test_agv_decision_taken_first(self, small_instance):
        env = FmsEnv(small_instance, EnvConfig(mode=MODE_AGV, n_agvs=2))
        policy = heuristic_policy("fifo", "faa")
        env.step(policy.decide(env))  # job select
        action = policy.decide(env)
        assert action >= small_instance.n_jobs  # drain staging next

    def test_faa_prefers_free_agv(self, small_instance):
        env = FmsEnv(small_instance, EnvConfig(mode=MODE_AGV, n_agvs=2))
        policy = heuristic_policy("fifo", "faa")
        env.step(0)
        first = policy.decide(env) - small_instance.n_jobs
        assert first == 0  # both idle and empty: lowest index

    def test_lwd_balances_work(self, small_instance):
        env = FmsEnv(small_instance, EnvConfig(mode=MODE_AGV, n_agvs=2))
        mk, _ = run_policy(env, heuristic_policy("fifo", "lwd"))
        busy = env.fms.ctx.agv_busy
        assert all(b > 0 for b in busy)  # both vehicles saw work


class TestPolicyContract:
    @pytest.mark.parametrize("job_rule", sorted(JOB_RULES))
    @pytest.mark.parametrize("agv_rule", AGV_RULES)
    def test_all_rules_complete_and_respect_mask(self, small_instance,
                                                 job_rule, agv_rule):
        env = FmsEnv(small_instance, EnvConfig(mode=MODE_AGV, n_agvs=2))
        policy = heuristic_policy(job_rule, agv_rule)
        env.reset()
        steps = 0
        while not env.terminal:
            action = policy.decide(env)
            assert env.action_mask()[action]
            env.step(action)
            steps += 1
        assert steps == 2 * small_instance.total_ops

    def test_deterministic(self, small_instance):
        results = set()
        for _ in range(3):
            env = FmsEnv(small_instance, EnvConfig(mode=MODE_AGV, n_agvs=2))
            results.add(run_policy(env, heuristic_policy("lwt", "lwd"))[0])
        assert len(results) == 1

    def test_random_policy_respects_mask(self, small_instance):
        env = FmsEnv(small_instance, EnvConfig(mode=MODE_AGV, n_agvs=2))
        policy = RandomPolicy(seed=7)
        env.reset()
        while not env.terminal:
            action = policy.decide(env)
            assert env.action_mask()[action]
            env.step(action)
