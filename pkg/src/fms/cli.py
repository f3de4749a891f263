"""Benchmark command line.

Subcommands: gen, run, train, validate, gantt, dynamic, ablate.  Report
paths get both the delimited data and a rendered figure.  Exit codes:
0 ok, 1 validation violations, 2 usage errors.  The data directory for
bare instance names comes from --data-dir or $FMS_DATA_DIR.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import report as figs
from .ablate import (decile_means, lookahead_ablation, masking_ablation,
                     reward_shaping_ablation)
from .bench import (compare, dynamic_scenario, rows_to_csv, run,
                    split_for_dynamic)
from .builder import MODE_AGV, MODE_TOOLS
from .environment import EnvConfig, FmsEnv
from .instances import (BENCHMARK_GROUPS, generate_group, instance_digest,
                        load_instance, write_instance)
from .solvers import PpoConfig, PpoPolicy, SosConfig, ppo_train
from .solvers.ppo import ActorCritic
from .trace import export_gantt, parse_gantt, validate

MODES = {"agv": MODE_AGV, "tools": MODE_TOOLS}


def _resolve_instance(name_or_path: str, data_dir: str):
    p = Path(name_or_path)
    if p.exists():
        return load_instance(p)
    base = Path(data_dir or os.environ.get("FMS_DATA_DIR", "."))
    candidate = base / f"{name_or_path}.txt"
    if candidate.exists():
        return load_instance(candidate)
    raise click.UsageError(f"no instance file {name_or_path!r} "
                           f"(searched {candidate})")


def _env_config(mode, shell, lookahead, agvs, tts, reward="idle_penalty",
                masking=True):
    return EnvConfig(reward_mode=reward, lookahead=lookahead,
                     masking=masking, shell=shell, mode=MODES[mode],
                     n_agvs=agvs, n_tts=tts)


@click.group()
def main():
    """Scheduling benchmark tool for AGV- and tool-constrained job shops."""


@main.command()
@click.option("--group", "groups", multiple=True,
              type=click.Choice(sorted(BENCHMARK_GROUPS) + ["all"]),
              default=("all",), show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--checksums", is_flag=True,
              help="also write sha256 digests per instance")
def gen(groups, out, checksums):
    """Regenerate benchmark instance files."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = sorted(BENCHMARK_GROUPS) if "all" in groups else sorted(groups)
    digests = {}
    for group in names:
        for inst in generate_group(group):
            (out_dir / f"{inst.name}.txt").write_text(write_instance(inst))
            digests[inst.name] = instance_digest(inst)
            click.echo(f"wrote {inst.name}.txt")
    if checksums:
        (out_dir / "checksums.json").write_text(
            json.dumps(digests, indent=2, sort_keys=True) + "\n")


@main.command(name="run")
@click.option("--instance", "instance_name", required=True)
@click.option("--solver", "solvers", multiple=True, required=True,
              help="fifo+faa style rule, 'random', 'sos', or ppo:<ckpt>")
@click.option("--mode", type=click.Choice(sorted(MODES)), default="agv",
              show_default=True)
@click.option("--agvs", type=int, default=None)
@click.option("--tts", type=int, default=None)
@click.option("--shell", type=(int, int), default=None,
              help="pad into a (jobs, machines) shell")
@click.option("--lookahead", is_flag=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--sos-budget-s", type=float, default=None)
@click.option("--sos-evals", type=int, default=20000, show_default=True)
@click.option("--sos-pop", type=int, default=24, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="write report.csv, traces and a gantt figure here")
@click.option("--data-dir", default=None)
def run_cmd(instance_name, solvers, mode, agvs, tts, shell, lookahead, seed,
            sos_budget_s, sos_evals, sos_pop, out, data_dir):
    """Run solvers on an instance and report makespans."""
    inst = _resolve_instance(instance_name, data_dir)
    env_config = _env_config(mode, shell, lookahead, agvs, tts)
    sos_config = SosConfig(pop_size=sos_pop, time_budget_s=sos_budget_s,
                           max_evals=None if sos_budget_s else sos_evals,
                           seed=seed)
    reports, traces = [], {}
    for solver in solvers:
        rep, trace = run(inst, solver, env_config, seed=seed,
                         sos_config=sos_config)
        reports.append(rep)
        traces[rep.solver] = trace
        click.echo(f"{rep.solver:>12}  makespan={rep.makespan:<8} "
                   f"time={rep.seconds:.2f}s")
    rows = compare(reports)
    if "gap_vs_sos" in rows[0]:
        click.echo(f"gap vs sos: {rows[0]['gap_vs_sos']:.1%}")
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.csv").write_text(rows_to_csv(rows))
        for solver, trace in traces.items():
            stem = solver.replace(":", "_").replace("/", "_")
            (out_dir / f"trace_{stem}.csv").write_text(export_gantt(trace))
            figs.render_gantt(trace, out_dir / f"gantt_{stem}.png",
                              title=f"{inst.name} - {solver}")
        click.echo(f"report written to {out_dir}")


@main.command()
@click.option("--instance", "instance_name", required=True)
@click.option("--steps", type=int, default=300_000, show_default=True)
@click.option("--mode", type=click.Choice(sorted(MODES)), default="agv")
@click.option("--agvs", type=int, default=None)
@click.option("--tts", type=int, default=None)
@click.option("--shell", type=(int, int), default=None)
@click.option("--reward", type=click.Choice(["idle_penalty",
                                             "sparse_makespan"]),
              default="idle_penalty", show_default=True)
@click.option("--masking/--no-masking", default=True, show_default=True)
@click.option("--lookahead", is_flag=True)
@click.option("--lr", type=float, default=3e-4, show_default=True)
@click.option("--optimizer", type=click.Choice(["sgd", "adam"]),
              default="adam", show_default=True)
@click.option("--hidden", type=int, default=256, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--data-dir", default=None)
def train(instance_name, steps, mode, agvs, tts, shell, reward, masking,
          lookahead, lr, optimizer, hidden, seed, out, data_dir):
    """Train a policy; writes model.npz, metrics.csv and the curves."""
    inst = _resolve_instance(instance_name, data_dir)
    env_config = _env_config(mode, shell, lookahead, agvs, tts,
                             reward=reward, masking=masking)
    if not masking:
        env_config.max_episode_steps = 40 * (2 * inst.total_ops + 2)
    ppo_config = PpoConfig(steps=steps, lr=lr, optimizer=optimizer,
                           hidden=hidden, seed=seed, masking=masking)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def progress(done, log):
        click.echo(f"steps {done}/{steps} "
                   f"mean_reward={log.mean_reward[-1]:.3f} "
                   f"loss={log.loss[-1]:.4f}")

    model, log = ppo_train(lambda: FmsEnv(inst, env_config), ppo_config,
                           progress=progress)
    model.save(out_dir / "model.npz")
    data = log.as_dict()
    rows = [{k: data[k][i] for k in ("timesteps", "loss", "mean_reward",
                                     "approx_kl", "entropy", "value_loss",
                                     "policy_loss")}
            for i in range(len(data["timesteps"]))]
    (out_dir / "metrics.csv").write_text(rows_to_csv(rows))
    figs.render_training(log, out_dir / "training.png",
                         title=f"{inst.name} ({steps} steps)")
    click.echo(f"model and curves written to {out_dir}")


@main.command(name="validate")
@click.option("--instance", "instance_name", required=True)
@click.option("--trace", "trace_path", type=click.Path(exists=True),
              required=True)
@click.option("--mode", type=click.Choice(sorted(MODES)), default="agv")
@click.option("--data-dir", default=None)
def validate_cmd(instance_name, trace_path, mode, data_dir):
    """Check a trace against the instance constraints."""
    inst = _resolve_instance(instance_name, data_dir)
    trace = parse_gantt(Path(trace_path).read_text())
    violations = validate(trace, inst, mode=MODES[mode])
    if violations:
        for v in violations:
            click.echo(str(v))
        click.echo(f"{len(violations)} violation(s)")
        sys.exit(1)
    click.echo(f"ok: {len(trace)} records, makespan {trace.makespan}")


@main.command()
@click.option("--trace", "trace_path", type=click.Path(exists=True),
              required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--title", default="")
def gantt(trace_path, out, title):
    """Render a trace csv to a Gantt figure."""
    trace = parse_gantt(Path(trace_path).read_text())
    figs.render_gantt(trace, out, title=title)
    click.echo(f"figure written to {out}")


@main.command()
@click.option("--instance", "instance_name", required=True)
@click.option("--partitions", type=int, default=10, show_default=True)
@click.option("--ckpt", required=True, help="trained policy checkpoint")
@click.option("--mode", type=click.Choice(sorted(MODES)), default="agv")
@click.option("--agvs", type=int, default=None)
@click.option("--tts", type=int, default=None)
@click.option("--sos-budget-s", type=float, default=60.0, show_default=True)
@click.option("--sos-pop", type=int, default=24, show_default=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--data-dir", default=None)
def dynamic(instance_name, partitions, ckpt, mode, agvs, tts, sos_budget_s,
            sos_pop, seed, out, data_dir):
    """Sequential batch injection: policy reuse vs search restarts."""
    inst = _resolve_instance(instance_name, data_dir)
    parts = split_for_dynamic(inst, partitions)
    env_config = _env_config(mode, None, False, agvs, tts)
    policy = PpoPolicy(ActorCritic.load(ckpt))
    sos_config = SosConfig(pop_size=sos_pop, time_budget_s=sos_budget_s,
                           max_evals=None, seed=seed)
    checkpoints = dynamic_scenario(parts, env_config, policy, sos_config)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for solver, entries in checkpoints.items():
        for part, mk, secs in entries:
            rows.append({"solver": solver, "partition": part,
                         "cum_makespan": mk, "cum_seconds": round(secs, 3)})
    (out_dir / "dynamic.csv").write_text(rows_to_csv(rows))
    figs.render_dynamic(checkpoints, out_dir / "dynamic.png",
                        title=f"{inst.name}: {partitions} partitions")
    for solver, entries in checkpoints.items():
        click.echo(f"{solver}: cumulative time "
                   f"{entries[-1][2]:.2f}s, makespan {entries[-1][1]}")


@main.command()
@click.option("--which", type=click.Choice(["masking", "lookahead",
                                            "reward"]), required=True)
@click.option("--instance", "instance_name", required=True)
@click.option("--eval-instances", "eval_names", multiple=True,
              help="extra instances scored in the reward ablation")
@click.option("--steps", type=int, default=100_000, show_default=True)
@click.option("--mode", type=click.Choice(sorted(MODES)), default="agv")
@click.option("--agvs", type=int, default=None)
@click.option("--tts", type=int, default=None)
@click.option("--optimizer", type=click.Choice(["sgd", "adam"]),
              default="adam")
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--data-dir", default=None)
def ablate(which, instance_name, eval_names, steps, mode, agvs, tts,
           optimizer, seed, out, data_dir):
    """Toggle one framework component and report the paired results."""
    inst = _resolve_instance(instance_name, data_dir)
    env_config = _env_config(mode, None, False, agvs, tts)
    ppo_config = PpoConfig(steps=steps, optimizer=optimizer, seed=seed)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if which == "masking":
        masked_log, unmasked_log = masking_ablation(inst, env_config,
                                                    ppo_config)
        deciles = {"masked": decile_means(masked_log.episode_rewards),
                   "unmasked": decile_means(unmasked_log.episode_rewards)}
        (out_dir / "masking.json").write_text(json.dumps(deciles, indent=2))
        figs.render_training(masked_log, out_dir / "masked_training.png",
                             title="with masking")
        figs.render_training(unmasked_log, out_dir / "unmasked_training.png",
                             title="without masking")
        click.echo(f"final decile reward masked={deciles['masked'][-1]:.3f} "
                   f"unmasked={deciles['unmasked'][-1]:.3f}")
    elif which == "lookahead":
        extra = [_resolve_instance(n, data_dir) for n in eval_names]
        pairs = lookahead_ablation([inst] + extra, env_config)
        rows = [{"instance": n, "with_lookahead": w, "without": wo}
                for n, w, wo in pairs]
        (out_dir / "lookahead.csv").write_text(rows_to_csv(rows))
        figs.render_ablation(pairs, out_dir / "lookahead.png",
                             "with lookahead", "max fallback")
        mean_with = sum(p[1] for p in pairs) / len(pairs)
        mean_without = sum(p[2] for p in pairs) / len(pairs)
        click.echo(f"mean makespan with={mean_with:.1f} "
                   f"without={mean_without:.1f}")
    else:
        extra = [_resolve_instance(n, data_dir) for n in eval_names]
        pairs = reward_shaping_ablation(inst, [inst] + extra, env_config,
                                        ppo_config)
        rows = [{"instance": n, "idle_penalty": a, "sparse_makespan": b}
                for n, a, b in pairs]
        (out_dir / "reward.csv").write_text(rows_to_csv(rows))
        figs.render_ablation(pairs, out_dir / "reward.png",
                             "idle penalty", "sparse makespan")
        mean_shaped = sum(p[1] for p in pairs) / len(pairs)
        mean_sparse = sum(p[2] for p in pairs) / len(pairs)
        click.echo(f"mean makespan shaped={mean_shaped:.1f} "
                   f"sparse={mean_sparse:.1f}")


if __name__ == "__main__":
    main()
