"""Experiment harness: generate, attack, repair, learn, evaluate, report.

One pipeline cell is a (kind, eta, gamma, m) tuple under a run seed.  Cells
run in a fixed deterministic order and write delimited rows incrementally,
so a rerun with the same configuration produces byte-identical files and an
interrupted run can resume from its manifest.  Outputs:

- ``table.csv``      per-cell decisions and pre/post-repair returns
- ``h1_rewards.csv`` pre-repair returns per attack cell (decision-free)
- ``ablation_override.csv`` / ``ablation_options.csv`` ablation results
- ``manifest.txt``   completed cells plus run configuration
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

from trajrepair.attacks import AttackKind, AttackSpec, apply_attack
from trajrepair.bench import (
    ALL_KINDS,
    DEFAULT_EPS_P,
    DEFAULT_N_DEMO,
    clean_clone_value,
    demo_set,
    eval_starts,
    reference_set,
    stable_seed,
    trained_classifiers,
)
from trajrepair.classifier import Decision
from trajrepair.env import GridLanderEnv, load_env_config
from trajrepair.imitation import clone_from_trajectories, evaluate
from trajrepair.repair import (
    RepairReport,
    default_eps_chain,
    evaluate_options,
    part_decisions,
    repair_options,
)

TABLE_FIELDS = [
    "seed", "loc", "eta", "gamma", "m", "full_dec",
    "part1", "part2", "part3",
    "pre_mean", "pre_median", "post_mean", "post_median",
    "demo_steps_used", "demo_steps_discarded",
]
H1_FIELDS = ["seed", "loc", "eta", "gamma", "mean_return", "median_return", "episodes"]
OVERRIDE_FIELDS = [
    "seed", "loc", "eta", "gamma", "m",
    "decisions_changed", "flip_fraction", "post_mean_with", "post_mean_without",
    "delta",
]
OPTIONS_FIELDS = [
    "seed", "loc", "eta", "gamma", "m",
    "mono_pre_mean", "options_pre_mean", "delta_pre",
    "mono_post_mean", "options_post_mean", "delta_post",
    "mono_pre_median", "options_pre_median",
]


@dataclass(frozen=True)
class ExperimentConfig:
    out_dir: str
    env_config: str | None = None
    n_demo: int = DEFAULT_N_DEMO
    kinds: tuple[AttackKind, ...] = ALL_KINDS
    etas: tuple[float, ...] = (0.3, 0.6, 0.9)
    gammas: tuple[float, ...] = (0.3, 0.6, 0.9)
    parts: tuple[int, ...] = (1, 2, 3)
    eps_p: float = DEFAULT_EPS_P
    eps_chain: float | None = None
    seeds: tuple[int, ...] = (0,)
    use_override: bool = True
    use_options: bool = True
    render_plots: bool = True
    resume: bool = False

    def __post_init__(self) -> None:
        if not self.kinds or not self.etas or not self.gammas or not self.parts:
            raise ValueError("attack grid must be non-empty")
        if not all(0.0 <= v <= 1.0 for v in self.etas + self.gammas):
            raise ValueError("eta and gamma values must lie in [0, 1]")
        if not 0.0 <= self.eps_p < 1.0:
            raise ValueError("eps_p must lie in [0, 1)")
        if self.n_demo < 1 or not self.seeds:
            raise ValueError("need at least one demonstration and one seed")

    def effective_parts(self) -> tuple[int, ...]:
        return self.parts if self.use_options else (1,)

    def environment(self) -> GridLanderEnv:
        if self.env_config is None:
            return GridLanderEnv()
        return load_env_config(self.env_config)


def _decision_text(rep: RepairReport, index: int) -> str:
    decision, asterisk = rep.aggregate_decision(index)
    text = "Acc" if decision == Decision.ACCEPT else "Rej"
    return text + ("*" if asterisk else "")


def _fmt(x: float) -> str:
    return f"{x:.6f}"


class _RowWriter:
    """Appends CSV rows, creating the file with a header when absent."""

    def __init__(self, path: Path, fields: list[str], resume: bool) -> None:
        self.path = path
        self.fields = fields
        if not resume or not path.exists():
            with open(path, "w", newline="") as fh:
                csv.writer(fh).writerow(fields)

    def write(self, row: list) -> None:
        with open(self.path, "a", newline="") as fh:
            csv.writer(fh).writerow(row)


class _Manifest:
    def __init__(self, path: Path, resume: bool) -> None:
        self.path = path
        self.done: set[str] = set()
        if resume and path.exists():
            self.done = {
                line.split(" ", 1)[1].strip()
                for line in path.read_text().splitlines()
                if line.startswith("done ")
            }
        else:
            path.write_text("")

    def completed(self, key: str) -> bool:
        return key in self.done

    def mark(self, key: str) -> None:
        with open(self.path, "a") as fh:
            fh.write(f"done {key}\n")

    def finish(self, note: str) -> None:
        with open(self.path, "a") as fh:
            fh.write(f"complete {note}\n")


def _cells(cfg: ExperimentConfig):
    for seed in cfg.seeds:
        for kind in cfg.kinds:
            for eta in cfg.etas:
                for gamma in cfg.gammas:
                    yield seed, kind, eta, gamma


def run_experiment(cfg: ExperimentConfig) -> dict[str, Path]:
    """Full pipeline over the attack grid; returns the output file paths."""
    env = cfg.environment()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    starts = eval_starts(env)
    t_max = 4 * env.height
    eps_chain = cfg.eps_chain if cfg.eps_chain is not None else default_eps_chain(env)
    ref = reference_set(env)

    table = _RowWriter(out / "table.csv", TABLE_FIELDS, cfg.resume)
    h1 = _RowWriter(out / "h1_rewards.csv", H1_FIELDS, cfg.resume)
    manifest = _Manifest(out / "manifest.txt", cfg.resume)

    summary_lines = []
    for seed in cfg.seeds:
        value = clean_clone_value(env, cfg.n_demo, seed)
        summary_lines.append(
            f"seed {seed}: clean_clone_mean {_fmt(value.mean_return)} "
            f"clean_clone_median {_fmt(value.median_return)}"
        )

    for seed, kind, eta, gamma in _cells(cfg):
        key = f"{seed}:{kind.value}:{eta}:{gamma}"
        if manifest.completed(key):
            continue
        classifiers = trained_classifiers(env, seed, cfg.eps_p)
        demo_base = demo_set(env, cfg.n_demo, seed)
        spec = AttackSpec(kind, eta, gamma, stable_seed(seed, kind.value, eta, gamma))
        demo = apply_attack(demo_base, spec, env)

        pre = evaluate(clone_from_trajectories(demo.trajectories, env), env, starts, t_max)
        h1.write(
            [seed, kind.value, eta, gamma, _fmt(pre.mean_return),
             _fmt(pre.median_return), pre.episodes]
        )

        full_rep = part_decisions(
            env, ref, demo, 1, [classifiers[1]], cfg.eps_p, cfg.use_override
        )
        full_dec = _decision_text(full_rep, 0)

        for m in cfg.effective_parts():
            options, chain, rep = repair_options(
                env, ref, demo, m, [classifiers[m]] * m, cfg.eps_p, cfg.use_override
            )
            post = evaluate_options(options, chain, env, starts, eps_chain, t_max)
            parts_text = [_decision_text(rep, i) for i in range(m)] + [""] * (3 - m)
            table.write(
                [seed, kind.value, eta, gamma, m, full_dec, *parts_text[:3],
                 _fmt(pre.mean_return), _fmt(pre.median_return),
                 _fmt(post.mean_return), _fmt(post.median_return),
                 rep.demo_steps_used, rep.demo_steps_discarded]
            )
        manifest.mark(key)

    (out / "summary.txt").write_text("\n".join(summary_lines) + "\n")
    manifest.finish("run_experiment")
    paths = {
        "table": out / "table.csv",
        "h1_rewards": out / "h1_rewards.csv",
        "manifest": out / "manifest.txt",
        "summary": out / "summary.txt",
    }
    if cfg.render_plots:
        from trajrepair import plots

        paths.update(plots.render_experiment(env, out, seed=cfg.seeds[0]))
    return paths


def run_ablation_reward_ratio(cfg: ExperimentConfig) -> dict[str, Path]:
    """Decision flips and return deltas when the override is disabled."""
    env = cfg.environment()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    starts = eval_starts(env)
    t_max = 4 * env.height
    eps_chain = cfg.eps_chain if cfg.eps_chain is not None else default_eps_chain(env)
    ref = reference_set(env)
    writer = _RowWriter(out / "ablation_override.csv", OVERRIDE_FIELDS, cfg.resume)
    manifest = _Manifest(out / "manifest_override.txt", cfg.resume)

    for seed, kind, eta, gamma in _cells(cfg):
        key = f"{seed}:{kind.value}:{eta}:{gamma}"
        if manifest.completed(key):
            continue
        classifiers = trained_classifiers(env, seed, cfg.eps_p)
        demo = apply_attack(
            demo_set(env, cfg.n_demo, seed),
            AttackSpec(kind, eta, gamma, stable_seed(seed, kind.value, eta, gamma)),
            env,
        )
        for m in cfg.effective_parts():
            chi = [classifiers[m]] * m
            rep_on = part_decisions(env, ref, demo, m, chi, cfg.eps_p, True)
            flips = sum(1 for i in range(m) if rep_on.aggregate_decision(i)[1])
            o_on, c_on, _ = repair_options(env, ref, demo, m, chi, cfg.eps_p, True)
            o_off, c_off, _ = repair_options(env, ref, demo, m, chi, cfg.eps_p, False)
            v_on = evaluate_options(o_on, c_on, env, starts, eps_chain, t_max)
            v_off = evaluate_options(o_off, c_off, env, starts, eps_chain, t_max)
            writer.write(
                [seed, kind.value, eta, gamma, m, flips, _fmt(flips / m),
                 _fmt(v_on.mean_return), _fmt(v_off.mean_return),
                 _fmt(v_on.mean_return - v_off.mean_return)]
            )
        manifest.mark(key)
    manifest.finish("run_ablation_reward_ratio")
    return {"ablation_override": out / "ablation_override.csv"}


def all_accept_pipeline(
    env: GridLanderEnv,
    demo,
    m: int,
    eps_p: float = DEFAULT_EPS_P,
):
    """Options built from every demonstrated part, with no screening.

    The unrepaired baseline of the options-overhead ablation: the clean set
    still joins the training pool (it is always available to the learner)
    but no part is rejected.
    """

    class _AcceptAll:
        def predict(self, f):
            return Decision.ACCEPT

    ref = reference_set(env)
    return repair_options(env, ref, demo, m, [_AcceptAll()] * m, eps_p, False)


def run_ablation_options_overhead(cfg: ExperimentConfig) -> dict[str, Path]:
    """Chained-options versus monolithic returns, before and after repair."""
    env = cfg.environment()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    starts = eval_starts(env)
    t_max = 4 * env.height
    eps_chain = cfg.eps_chain if cfg.eps_chain is not None else default_eps_chain(env)
    ref = reference_set(env)
    writer = _RowWriter(out / "ablation_options.csv", OPTIONS_FIELDS, cfg.resume)
    manifest = _Manifest(out / "manifest_options.txt", cfg.resume)

    for seed, kind, eta, gamma in _cells(cfg):
        key = f"{seed}:{kind.value}:{eta}:{gamma}"
        if manifest.completed(key):
            continue
        classifiers = trained_classifiers(env, seed, cfg.eps_p)
        demo = apply_attack(
            demo_set(env, cfg.n_demo, seed),
            AttackSpec(kind, eta, gamma, stable_seed(seed, kind.value, eta, gamma)),
            env,
        )
        o1a, c1a, _ = all_accept_pipeline(env, demo, 1, cfg.eps_p)
        mono_pre = evaluate_options(o1a, c1a, env, starts, eps_chain, t_max)
        o1r, c1r, _ = repair_options(
            env, ref, demo, 1, [classifiers[1]], cfg.eps_p, cfg.use_override
        )
        mono_post = evaluate_options(o1r, c1r, env, starts, eps_chain, t_max)
        for m in cfg.effective_parts():
            oma, cma, _ = all_accept_pipeline(env, demo, m, cfg.eps_p)
            opt_pre = evaluate_options(oma, cma, env, starts, eps_chain, t_max)
            omr, cmr, _ = repair_options(
                env, ref, demo, m, [classifiers[m]] * m, cfg.eps_p, cfg.use_override
            )
            opt_post = evaluate_options(omr, cmr, env, starts, eps_chain, t_max)
            writer.write(
                [seed, kind.value, eta, gamma, m,
                 _fmt(mono_pre.mean_return), _fmt(opt_pre.mean_return),
                 _fmt(opt_pre.mean_return - mono_pre.mean_return),
                 _fmt(mono_post.mean_return), _fmt(opt_post.mean_return),
                 _fmt(opt_post.mean_return - mono_post.mean_return),
                 _fmt(mono_pre.median_return), _fmt(opt_pre.median_return)]
            )
        manifest.mark(key)
    manifest.finish("run_ablation_options_overhead")
    return {"ablation_options": out / "ablation_options.csv"}
