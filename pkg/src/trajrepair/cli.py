"""Command-line entry points for the experiment harness.

Subcommands:

- ``run``             full generate/attack/repair/evaluate grid
- ``ablate-override`` decision flips with the return-ratio override disabled
- ``ablate-options``  chained-options vs monolithic return deltas
- ``theory``          property suites for the dominance/repair claims
"""
from __future__ import annotations

import argparse
import csv
from pathlib import Path

from trajrepair.analysis import (
    build_repair_set,
    check_dominance_implies_divergence,
    check_segment_dominance,
    format_suite_report,
)
from trajrepair.attacks import parse_attack_spec
from trajrepair.bench import eval_starts, optimal_policy
from trajrepair.experiment import (
    ExperimentConfig,
    run_ablation_options_overhead,
    run_ablation_reward_ratio,
    run_experiment,
)
from trajrepair.imitation import Policy


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--config", default=None, help="environment config file")
    parser.add_argument("--seed", type=int, action="append", default=None,
                        help="run seed; repeat for several seeds")
    parser.add_argument("--n-demo", type=int, default=100,
                        help="demonstration pool size")
    parser.add_argument("--parts", default="1,2,3",
                        help="comma-separated partition counts, e.g. 1,2,3")
    parser.add_argument("--attack", action="append", default=None,
                        help="restrict the grid, e.g. kind=END,eta=0.6,gamma=0.3,seed=7; "
                             "repeatable")
    parser.add_argument("--eps-p", type=float, default=0.1)
    parser.add_argument("--eps-chain", type=float, default=None)
    parser.add_argument("--no-override", action="store_true",
                        help="disable the return-ratio override")
    parser.add_argument("--no-options", action="store_true",
                        help="full-trajectory decisions only (m=1, no chaining)")
    parser.add_argument("--no-plots", action="store_true",
                        help="skip figure rendering")
    parser.add_argument("--resume", action="store_true",
                        help="skip cells already recorded in the manifest")


def _build_config(args: argparse.Namespace) -> ExperimentConfig:
    kwargs = dict(
        out_dir=args.out,
        env_config=args.config,
        n_demo=args.n_demo,
        parts=tuple(int(p) for p in args.parts.split(",") if p),
        eps_p=args.eps_p,
        eps_chain=args.eps_chain,
        seeds=tuple(args.seed) if args.seed else (0,),
        use_override=not args.no_override,
        use_options=not args.no_options,
        render_plots=not args.no_plots,
        resume=args.resume,
    )
    if args.attack:
        specs = [parse_attack_spec(a) for a in args.attack]
        kwargs["kinds"] = tuple(dict.fromkeys(s.kind for s in specs))
        kwargs["etas"] = tuple(dict.fromkeys(s.eta for s in specs))
        kwargs["gammas"] = tuple(dict.fromkeys(s.gamma_frac for s in specs))
    return ExperimentConfig(**kwargs)


def _run_theory(args: argparse.Namespace) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = _build_config(args)
    env = cfg.environment()
    pi_star = optimal_policy(env)
    starts = [s for s in eval_starts(env) if s.y >= env.height - 3][: env.width]
    seed = cfg.seeds[0]

    sections = []
    r1 = check_dominance_implies_divergence(env, pi_star, args.n, seed, starts, cfg.eps_p)
    sections.append(format_suite_report("dominated policies produce divergent rollouts", r1))
    for m in (2, 3):
        rm = check_segment_dominance(env, pi_star, args.n, m, seed, starts)
        sections.append(
            format_suite_report(f"dominated policies lose in some of {m} segments", rm)
        )

    # convergence trace for a single hand-edited policy
    edit_state = starts[len(starts) // 2]
    probs = [0.0, 0.0, 0.0, 0.0]
    probs[1] = 1.0  # force hovering at one on-path state
    edited = pi_star.with_row(edit_state, tuple(probs))
    rs = build_repair_set(edited, pi_star, env, starts, eps_p=0.0)
    sections.append(
        "repair convergence trace (single hover edit at "
        f"{tuple(edit_state)}):\n  repaired states: "
        f"{[tuple(s) for s in rs.states]}\n  final ratio: {rs.final_ratio:.6f}"
    )
    with open(out / "convergence_trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "value_gap", "divergence"])
        for i, (gap, d) in enumerate(rs.trace):
            writer.writerow([i, f"{gap:.6f}", f"{d:.6f}"])

    report = "\n\n".join(sections) + "\n"
    (out / "theory_report.txt").write_text(report)
    print(report)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="trajrepair",
        description="options-based trajectory repair workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full experiment grid")
    _add_common(p_run)

    p_override = sub.add_parser("ablate-override", help="return-ratio ablation")
    _add_common(p_override)

    p_options = sub.add_parser("ablate-options", help="options-overhead ablation")
    _add_common(p_options)

    p_theory = sub.add_parser("theory", help="theory property suites")
    _add_common(p_theory)
    p_theory.add_argument("--n", type=int, default=200, help="sampled policy pairs")

    args = parser.parse_args(argv)
    if args.command == "run":
        paths = run_experiment(_build_config(args))
    elif args.command == "ablate-override":
        paths = run_ablation_reward_ratio(_build_config(args))
    elif args.command == "ablate-options":
        paths = run_ablation_options_overhead(_build_config(args))
        if not args.no_plots:
            from trajrepair import plots

            cfg = _build_config(args)
            plots.render_options_overhead(Path(cfg.out_dir))
    else:
        _run_theory(args)
        return 0
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
