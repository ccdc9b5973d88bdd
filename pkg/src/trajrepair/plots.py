"""Figure rendering for experiment outputs.

Figures are written next to the delimited files they are derived from:

- ``fig_h1_rewards.png``        pre-repair return vs eta, per attack kind
- ``fig_decision_boundary.png`` classifier accept/reject regions over (oc, fd)
- ``fig_options_overhead.png``  chained-options minus monolithic return bars
"""
from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from trajrepair.bench import labeled_pool, trained_classifiers, TRAIN_GAMMAS
from trajrepair.classifier import Decision
from trajrepair.divergence import DivergenceFeatures
from trajrepair.env import GridLanderEnv


def _read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def render_h1(out_dir: Path) -> Path:
    rows = _read_csv(out_dir / "h1_rewards.csv")
    kinds = sorted({r["loc"] for r in rows})
    fig, axes = plt.subplots(1, len(kinds), figsize=(4 * len(kinds), 3.2), sharey=True)
    if len(kinds) == 1:
        axes = [axes]
    for ax, kind in zip(axes, kinds):
        series = defaultdict(lambda: defaultdict(list))
        for r in rows:
            if r["loc"] != kind:
                continue
            series[float(r["gamma"])][float(r["eta"])].append(float(r["mean_return"]))
        for gamma in sorted(series):
            etas = sorted(series[gamma])
            means = [np.mean(series[gamma][e]) for e in etas]
            ax.plot(etas, means, marker="o", label=f"gamma={gamma}")
        ax.set_title(kind)
        ax.set_xlabel("eta (fraction of trajectories modified)")
        ax.grid(alpha=0.3)
    axes[0].set_ylabel("mean return (pre-repair clone)")
    axes[-1].legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "fig_h1_rewards.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_decision_boundary(env: GridLanderEnv, out_dir: Path, seed: int = 0) -> Path:
    chi = trained_classifiers(env, seed)[1]
    pool = labeled_pool(env, 1, TRAIN_GAMMAS, seed)
    oc = np.array([lf.features.oc for lf in pool])
    fd = np.array([lf.features.fd for lf in pool])
    labels = np.array([lf.label == Decision.ACCEPT for lf in pool])

    oc_grid = np.linspace(0.0, oc.max() * 1.1 + 1e-6, 120)
    fd_grid = np.linspace(0.0, fd.max() * 1.1 + 1e-6, 120)
    zz = np.zeros((len(fd_grid), len(oc_grid)))
    for i, f in enumerate(fd_grid):
        for j, o in enumerate(oc_grid):
            zz[i, j] = chi.predict(DivergenceFeatures(o, f)) == Decision.ACCEPT

    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.contourf(oc_grid, fd_grid, zz, levels=[-0.5, 0.5, 1.5], alpha=0.25,
                colors=["sienna", "gold"])
    ax.scatter(oc[labels], fd[labels], s=12, c="goldenrod", label="accept")
    ax.scatter(oc[~labels], fd[~labels], s=12, c="saddlebrown", marker="x",
               label="reject")
    ax.set_xlabel("occupancy measure")
    ax.set_ylabel("Fréchet distance")
    ax.set_title("classifier decision regions (full trajectories)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "fig_decision_boundary.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_options_overhead(out_dir: Path) -> Path:
    rows = _read_csv(out_dir / "ablation_options.csv")
    keyed = defaultdict(list)
    for r in rows:
        keyed[(r["loc"], float(r["eta"]), int(r["m"]))].append(float(r["delta_pre"]))
    kinds = sorted({k[0] for k in keyed})
    etas = sorted({k[1] for k in keyed})
    ms = sorted({k[2] for k in keyed})

    fig, ax = plt.subplots(figsize=(1.6 * len(kinds) * len(etas), 3.6))
    width = 0.8 / max(1, len(ms))
    xticks, xlabels = [], []
    x = 0.0
    for kind in kinds:
        for eta in etas:
            for k, m in enumerate(ms):
                vals = keyed.get((kind, eta, m), [0.0])
                ax.bar(x + k * width, np.mean(vals), width,
                       color=plt.cm.viridis(k / max(1, len(ms) - 1)),
                       label=f"m={m}" if (kind == kinds[0] and eta == etas[0]) else None)
            xticks.append(x + width * (len(ms) - 1) / 2)
            xlabels.append(f"{kind}\n{eta}")
            x += 1.0
    ax.axhline(0.0, color="black", lw=0.8)
    ax.set_xticks(xticks)
    ax.set_xticklabels(xlabels, fontsize=7)
    ax.set_ylabel("options return - monolithic return")
    ax.set_title("overhead of chained options (before repair)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "fig_options_overhead.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_experiment(env: GridLanderEnv, out_dir: Path, seed: int = 0) -> dict[str, Path]:
    paths = {}
    if (out_dir / "h1_rewards.csv").exists():
        paths["fig_h1"] = render_h1(out_dir)
    paths["fig_boundary"] = render_decision_boundary(env, out_dir, seed)
    if (out_dir / "ablation_options.csv").exists():
        paths["fig_options"] = render_options_overhead(out_dir)
    return paths
