"""Report generators: figure data as CSV + JSON manifest, rendered to PNG.

Each generator emits the delimited data behind one diagnostic figure, a
small JSON manifest describing the files, and a matplotlib rendering.  The
illustration configurations are frozen here so the qualitative behaviors
(replicate-vs-explore dichotomy, rollout pattern, allocation shape) are
reproducible without tuning.
"""
from __future__ import annotations

import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import gp, imspe, lookahead, testbed
from .harness import ExperimentConfig, run_experiment, _write_csv
from .kernels import KernelSpec

FIGURE_IDS = ("fig1", "fig2", "fig3", "fig4-ratios", "table1-style")


# frozen two-noise-regime illustration: Gaussian kernel on five singletons,
# noise curves coincide at the design sites and differ in the gaps
ILLUS_KERNEL = KernelSpec("gaussian", [0.01], nu=1.0)
ILLUS_DESIGN = np.array([0.5, 0.15, 0.62, 0.8, 0.95])
ILLUS_R0 = 2.0
ILLUS_BUMP_LOW = 1.5
ILLUS_BUMP_HIGH = 8.0
ILLUS_BUMP_WIDTH = 0.02


def _illus_state():
    xd = ILLUS_DESIGN[:, None]
    des = gp.UniqueDesign(xd, np.ones(len(xd), int), np.zeros(len(xd)),
                          np.zeros(len(xd)))
    return gp.SurrogateState(ILLUS_KERNEL, des, ILLUS_R0 * np.ones(len(xd)))


def _illus_gap(x):
    return np.min(np.abs(ILLUS_DESIGN - float(np.ravel(x)[0])))


def illus_noise_low(x):
    m = _illus_gap(x)
    return ILLUS_R0 + ILLUS_BUMP_LOW * (1.0 - np.exp(-(m / ILLUS_BUMP_WIDTH) ** 2))


def illus_noise_high(x):
    m = _illus_gap(x)
    return ILLUS_R0 + ILLUS_BUMP_HIGH * (1.0 - np.exp(-(m / ILLUS_BUMP_WIDTH) ** 2))


def _manifest(outdir, figure_id, files, meta=None):
    man = {"figure": figure_id, "files": files, **(meta or {})}
    path = os.path.join(outdir, f"{figure_id}_manifest.json")
    with open(path, "w") as fh:
        json.dump(man, fh, indent=2)
    return path


def fig_criterion_profiles(outdir: str, grid_size: int = 512) -> dict:
    """Two noise regimes over one design: criterion profiles and the
    replication threshold curve."""
    os.makedirs(outdir, exist_ok=True)
    state = _illus_state()
    ws = imspe.ImspeWorkspace(state)
    grid = np.linspace(0.0, 1.0, grid_size)
    rows = []
    for x in grid:
        rlo, rhi = illus_noise_low(x), illus_noise_high(x)
        _, thr, kstar = ws.replication_condition([x], rlo)
        rows.append({"x": x, "r_low": rlo, "r_high": rhi,
                     "I_low": ws.imspe_next([x], rlo),
                     "I_high": ws.imspe_next([x], rhi),
                     "threshold": thr})
    rep_vals = [ws.imspe_replicate(k) for k in range(state.design.n)]
    csv_path = os.path.join(outdir, "fig1_profiles.csv")
    _write_csv(csv_path, list(rows[0].keys()), rows)

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    axes[0].plot(grid, [r["r_low"] for r in rows], "g--", label="low noise")
    axes[0].plot(grid, [r["r_high"] for r in rows], "b-", label="high noise")
    axes[0].plot(grid, [r["threshold"] for r in rows], color="gray", ls=":",
                 label="replication threshold")
    axes[0].plot(ILLUS_DESIGN, ILLUS_R0 * np.ones(len(ILLUS_DESIGN)), "ro")
    axes[0].set_ylim(0, ILLUS_R0 + ILLUS_BUMP_HIGH + 1)
    axes[0].set_xlabel("x"), axes[0].set_ylabel("noise variance")
    axes[0].legend(fontsize=8)
    axes[1].plot(grid, [r["I_low"] for r in rows], "g--", label="low noise")
    axes[1].plot(grid, [r["I_high"] for r in rows], "b-", label="high noise")
    for xv in ILLUS_DESIGN:
        axes[1].axvline(xv, color="red", ls=":", lw=0.6)
    axes[1].set_xlabel("candidate x"), axes[1].set_ylabel("one-step criterion")
    axes[1].legend(fontsize=8)
    fig.tight_layout()
    png_path = os.path.join(outdir, "fig1_profiles.png")
    fig.savefig(png_path, dpi=150)
    plt.close(fig)

    meta = {"replicate_values": rep_vals,
            "design": ILLUS_DESIGN.tolist(),
            "best_replicate_1based": int(np.argmin(rep_vals)) + 1}
    _manifest(outdir, "fig1", [os.path.basename(csv_path),
                               os.path.basename(png_path)], meta)
    return {"csv": csv_path, "png": png_path, **meta}


def _toy_replicated_state(theta=0.005, nu=30.0, n_sites=21, reps=5):
    xd = np.linspace(0.025, 0.975, n_sites)
    des = gp.UniqueDesign(xd[:, None], reps * np.ones(n_sites, int),
                          np.zeros(n_sites), np.zeros(n_sites))
    spec = KernelSpec("gaussian", [theta], nu=nu)
    state = gp.SurrogateState(spec, des, testbed.forrester_noise(xd))
    return state


class _TruthNoiseModel:
    """Known-truth noise field wrapper around a surrogate state."""

    def __init__(self, state):
        self.state = state

    def noise_value(self, x):
        return float(testbed.forrester_noise(np.ravel(x)[0]))

    def noise_grad(self, x):
        return np.array([float(testbed.forrester_noise_grad(np.ravel(x)[0]))])


def fig_rollout_paths(outdir: str, h: int = 3) -> dict:
    """Lookahead decision paths on a replicated one-dimensional design."""
    os.makedirs(outdir, exist_ok=True)
    state = _toy_replicated_state()
    model = _TruthNoiseModel(state)
    dec = lookahead.choose_next(model, lookahead.LookaheadConfig(h=h), h, seed=0)
    rows = []
    for j, (val, path) in enumerate(zip(dec.path_values, dec.paths)):
        for step, (kind, what) in enumerate(path):
            rows.append({"path": j, "step": step + 1, "action": kind,
                         "where": (int(what) + 1 if kind == "replicate"
                                   else float(np.ravel(what)[0])),
                         "terminal_criterion": val})
    csv_path = os.path.join(outdir, f"fig2_paths_h{h}.csv")
    _write_csv(csv_path, ["path", "step", "action", "where",
                          "terminal_criterion"], rows)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(dec.path_values)), dec.path_values,
           color=["tab:red" if j == dec.best_path else "tab:gray"
                  for j in range(len(dec.path_values))])
    ax.set_xlabel("path (index = replicates before exploring)")
    ax.set_ylabel(f"criterion at horizon h={h}")
    ax.set_title(f"chosen action: {dec.kind}"
                 + (f" of site {dec.k + 1}" if dec.is_replicate else ""))
    fig.tight_layout()
    png_path = os.path.join(outdir, f"fig2_paths_h{h}.png")
    fig.savefig(png_path, dpi=150)
    plt.close(fig)

    meta = {"h": h, "decision": dec.kind,
            "k_1based": (dec.k + 1 if dec.k is not None else None),
            "best_path": dec.best_path,
            "path_values": list(map(float, dec.path_values))}
    _manifest(outdir, "fig2", [os.path.basename(csv_path),
                               os.path.basename(png_path)], meta)
    return {"csv": csv_path, "png": png_path, **meta}


def fig_allocation(outdir: str, extra: int = 105) -> dict:
    """Static optimal allocation versus greedy sequential replication."""
    os.makedirs(outdir, exist_ok=True)
    state = _toy_replicated_state()
    n = state.design.n
    N_total = state.design.total + extra
    a_star = lookahead.sk_allocation(state, N_total=N_total)
    greedy = state
    for _ in range(extra):
        ws = imspe.ImspeWorkspace(greedy)
        k, _ = ws.best_replicate()
        greedy = greedy.add_replicate(k)
    rows = [{"site": i + 1, "x": float(state.design.xbar[i, 0]),
             "initial": int(state.design.a[i]),
             "batch_allocation": float(a_star[i]),
             "greedy_allocation": int(greedy.design.a[i]),
             "noise": float(state.noise[i])} for i in range(n)]
    csv_path = os.path.join(outdir, "fig3_allocation.csv")
    _write_csv(csv_path, list(rows[0].keys()), rows)

    fig, ax = plt.subplots(figsize=(7, 4))
    xs = state.design.xbar[:, 0]
    ax.plot(xs, a_star, "s-", label="static optimal")
    ax.plot(xs, greedy.design.a, "o--", label="greedy sequential")
    ax.axhline(state.design.a[0], color="gray", ls=":", label="initial replicates")
    ax.set_xlabel("x"), ax.set_ylabel("replicates")
    ax.legend(fontsize=8)
    fig.tight_layout()
    png_path = os.path.join(outdir, "fig3_allocation.png")
    fig.savefig(png_path, dpi=150)
    plt.close(fig)

    meta = {"total_budget": int(N_total),
            "batch_below_initial": int(np.sum(np.rint(a_star) < state.design.a))}
    _manifest(outdir, "fig3", [os.path.basename(csv_path),
                               os.path.basename(png_path)], meta)
    return {"csv": csv_path, "png": png_path, **meta}


def fig_ratio_curves(outdir: str, n_max: int = 150, seeds=(0, 1, 2),
                     horizons=(-1, 0, 3)) -> dict:
    """Unique-to-total ratio trajectories by horizon on the 1-d testbed."""
    os.makedirs(outdir, exist_ok=True)
    import pandas as pd
    curves, finals = [], []
    for h in horizons:
        cfg = ExperimentConfig(simulator="forrester", mean_family="gaussian",
                               n_max=n_max, h=h, seeds=list(seeds),
                               out_dir=os.path.join(outdir, f"fig4_h{h}"),
                               metric_cadence=max(n_max // 5, 1))
        summary = run_experiment(cfg)
        finals.append({"h": h, "median_ratio": summary["median_ratio"],
                       "median_rmse": summary.get("median_rmse"),
                       "median_elapsed_s": summary["median_elapsed_s"]})
        for s in seeds:
            tr = pd.read_csv(os.path.join(cfg.out_dir, f"trace_{s}.csv"))
            for _, row in tr.iterrows():
                curves.append({"h": h, "seed": s, "iter": int(row["iter"]),
                               "N": int(row["N"]), "ratio": float(row["ratio"])})
    csv_path = os.path.join(outdir, "fig4_ratios.csv")
    _write_csv(csv_path, ["h", "seed", "iter", "N", "ratio"], curves)
    sum_path = os.path.join(outdir, "fig4_summary.csv")
    _write_csv(sum_path, ["h", "median_ratio", "median_rmse",
                          "median_elapsed_s"], finals)

    fig, ax = plt.subplots(figsize=(6, 4))
    df = pd.DataFrame(curves)
    for h in horizons:
        sub = df[df.h == h].groupby("N")["ratio"].median()
        ax.plot(sub.index, sub.values, label=f"h={h}")
    ax.set_xlabel("total runs N"), ax.set_ylabel("unique / total")
    ax.legend(fontsize=8)
    fig.tight_layout()
    png_path = os.path.join(outdir, "fig4_ratios.png")
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    _manifest(outdir, "fig4-ratios", [os.path.basename(csv_path),
                                      os.path.basename(sum_path),
                                      os.path.basename(png_path)],
              {"finals": finals})
    return {"csv": csv_path, "png": png_path, "finals": finals}


def table_singletons(outdir: str, n_max: int = 150, seeds=(0, 1, 2),
                     horizons=(-1, 0, 3)) -> dict:
    """Share of singleton sites and runtime per horizon (median over seeds)."""
    os.makedirs(outdir, exist_ok=True)
    rows = []
    for h in horizons:
        cfg = ExperimentConfig(simulator="forrester", mean_family="gaussian",
                               n_max=n_max, h=h, seeds=list(seeds),
                               out_dir=os.path.join(outdir, f"table1_h{h}"),
                               metric_cadence=max(n_max // 5, 1))
        summary = run_experiment(cfg)
        singles = [r["singleton_frac"] for r in summary["per_seed"]]
        fives = [r["five_plus_frac"] for r in summary["per_seed"]]
        rows.append({"h": h,
                     "pct_singletons": 100.0 * float(np.median(singles)),
                     "pct_five_plus": 100.0 * float(np.median(fives)),
                     "median_time_s": summary["median_elapsed_s"]})
    csv_path = os.path.join(outdir, "table1_style.csv")
    _write_csv(csv_path, ["h", "pct_singletons", "pct_five_plus",
                          "median_time_s"], rows)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar([str(r["h"]) for r in rows], [r["pct_singletons"] for r in rows])
    ax.set_xlabel("horizon"), ax.set_ylabel("% singleton sites")
    fig.tight_layout()
    png_path = os.path.join(outdir, "table1_style.png")
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    _manifest(outdir, "table1-style", [os.path.basename(csv_path),
                                       os.path.basename(png_path)],
              {"rows": rows})
    return {"csv": csv_path, "png": png_path, "rows": rows}


def replicate_figure(figure_id: str, outdir: str, **kwargs) -> dict:
    """Dispatch one figure generator by identifier."""
    if figure_id == "fig1":
        return fig_criterion_profiles(outdir, **kwargs)
    if figure_id == "fig2":
        return fig_rollout_paths(outdir, **kwargs)
    if figure_id == "fig3":
        return fig_allocation(outdir, **kwargs)
    if figure_id == "fig4-ratios":
        return fig_ratio_curves(outdir, **kwargs)
    if figure_id == "table1-style":
        return table_singletons(outdir, **kwargs)
    raise ValueError(f"unknown figure id {figure_id!r}; choose from {FIGURE_IDS}")
