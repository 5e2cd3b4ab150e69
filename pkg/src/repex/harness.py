"""Experiment runner: sequential-design loop, seeds, checkpoints, reports.

One run grows a design from a maximin Latin-hypercube start to a total
budget, alternating horizon control, the replicate-or-explore decision, a
simulator call, a fast model update with latent fusion, and periodic full
refits.  Monte Carlo repetitions (seeds) run as independent lineages,
optionally in parallel; every stochastic element draws from a stream keyed
by (seed, iteration), so interrupted runs resumed from a checkpoint
reproduce the uninterrupted trajectory.
"""
from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed

from . import hetgp, metrics, testbed
from .gp import DUPLICATE_TOL, UniqueDesign, ingest
from .hetgp import HetGP, HomGP, HyperInit, OptBudget
from .imspe import SearchOptions
from .lookahead import LookaheadConfig, choose_next, horizon_adapt, horizon_target

THREADS_ENV = "REPEX_THREADS"


def n_jobs_from_env(default: int = 1) -> int:
    try:
        return max(int(os.environ.get(THREADS_ENV, default)), 1)
    except ValueError:
        return default


@dataclass
class ExperimentConfig:
    """Serializable description of one experiment."""

    simulator: str = "forrester"
    sim_params: dict = field(default_factory=dict)
    model: str = "het"                    # het | hom
    mean_family: str = "gaussian"
    noise_family: str = "matern52"
    init_n: int = 10
    init_replicates: int = 1
    n_max: int = 100
    horizon_mode: str = "fixed"           # fixed | target | adapt
    h: int = 0
    rho: float = 0.2
    epsilon: float = 1e-6
    seeds: list = field(default_factory=lambda: [0])
    test_grid: int = 201
    metric_cadence: int = 10
    refit_full_below_n: int = 50
    refit_cadence: int = 5
    fit_maxiter: int = 80
    warm_maxiter: int = 35
    multistart: int = 3
    search_multistart: int | None = None
    search_maxiter: int = 60
    center: bool = True
    out_dir: str = "runs"
    verbosity: int = 0

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if self.n_max < self.init_n * self.init_replicates:
            raise ValueError("budget below the initial design size")
        if self.model not in ("het", "hom"):
            raise ValueError("model must be het or hom")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        return ExperimentConfig(**json.loads(text))

    def lookahead_config(self) -> LookaheadConfig:
        return LookaheadConfig(self.horizon_mode, self.h, self.rho, self.epsilon,
                               SearchOptions(self.search_multistart,
                                             self.search_maxiter, self.epsilon))


def maximin_lhs(n: int, d: int, rng, candidates: int = 200) -> np.ndarray:
    """Best of ``candidates`` random Latin hypercubes by minimum distance."""
    best, best_score = None, -np.inf
    for _ in range(candidates):
        pts = np.empty((n, d))
        for p in range(d):
            pts[:, p] = (rng.permutation(n) + rng.uniform(0, 1, n)) / n
        if n == 1:
            return pts
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diff ** 2).sum(-1))
        np.fill_diagonal(dist, np.inf)
        score = dist.min()
        if score > best_score:
            best, best_score = pts, score
    return best


def _iter_rng(seed: int, iteration: int, stream: int = 0):
    return np.random.default_rng(np.random.SeedSequence((seed, iteration, stream)))


def _make_simulator(cfg: ExperimentConfig, seed: int) -> testbed.Simulator:
    params = dict(cfg.sim_params)
    if cfg.simulator == "synthetic" and "field_seed" not in params:
        params["field_seed"] = seed
    return testbed.make_simulator(cfg.simulator, seed=seed, **params)


def _fit(cfg: ExperimentConfig, design: UniqueDesign, seed: int,
         init: HyperInit | None = None):
    budget = OptBudget(maxiter=cfg.warm_maxiter if init is not None else cfg.fit_maxiter,
                       multistart=1 if init is not None else cfg.multistart)
    if cfg.model == "hom":
        return hetgp.fit_hom(design, cfg.mean_family, budget=budget,
                             center=cfg.center, seed=seed)
    return hetgp.fit(design, cfg.mean_family, cfg.noise_family, init=init,
                     budget=budget, center=cfg.center, seed=seed)


def _fast_update(model, decision, y: float, sim_rng=None):
    """Fold one observation into the model without re-optimizing.

    Mean-GP bookkeeping uses the O(n^2) inverse updates; the latent at the
    touched location is refreshed by precision-weighted fusion and applied
    as a diagonal noise shift.  Returns the updated model.
    """
    state = model.state
    design = state.design
    x = np.asarray(decision.x, dtype=float).ravel()
    k = decision.k
    if k is None:
        knear, dist = design.nearest(x)
        if dist <= DUPLICATE_TOL:  # continuous search landed on a site
            k = knear
    mu_pre = model.predict(x)[0]

    if k is not None:
        a_old, yb_old, s2_old = design.a[k], design.ybar[k], design.s2[k]
        abar = int(a_old) + 1
        sq_sum = a_old * (s2_old + (yb_old - mu_pre) ** 2) + (y - mu_pre) ** 2
        sq_resid_mean = float(sq_sum) / abar
        new_state = state.add_replicate(k, y)
        loc = k
    else:
        abar = 1
        sq_resid_mean = float((y - mu_pre) ** 2)
        new_state = state.extend_new_location(x, model.noise_value(x), y)
        loc = new_state.design.n - 1

    if isinstance(model, HomGP):
        return HomGP(new_state.design, model.mean_kernel.with_nu(1.0), model.g,
                     model.trend, model.loglik_value, model.converged)

    d_t, _ = model.fuse_latent(x, sq_resid_mean, abar)
    delta = model.delta.copy() if loc < model.delta.size else np.append(model.delta, 0.0)
    delta[loc] = d_t
    new_state = new_state.replace_noise(loc, model.nu_hat * float(np.exp(d_t)))
    return _het_with_frozen_hypers(model, new_state, delta)


def _het_with_frozen_hypers(model: HetGP, state, delta) -> HetGP:
    """New HetGP carrying an incrementally updated state; hypers frozen.

    The latent-GP caches are rebuilt for the new design so the noise
    predictor sees the updated counts and latents; the mean-GP state and its
    per-site noise vector are taken as-is from the incremental updates.
    """
    from scipy.linalg import cho_solve

    from . import kernels as _k
    new = object.__new__(HetGP)
    new.design = state.design
    new.g = model.g
    new.delta = np.asarray(delta, dtype=float)
    new.trend = model.trend
    new.loglik_value = np.nan
    new.converged = model.converged
    a = state.design.a.astype(float)
    Cg = _k.cross_correlation(model.noise_kernel, state.design.xbar, state.design.xbar)
    new._cho_g = hetgp._chol(Cg + np.diag(model.g / a), 1.0)
    new.nmean = float(np.mean(new.delta))
    dtil = new.delta - new.nmean
    new._beta = cho_solve(new._cho_g, dtil)
    new.lam = state.noise / model.nu_hat
    new.nu_hat_g = max(float(dtil @ new._beta) / state.design.n, hetgp.NU_G_FLOOR)
    new._Mg_inv = cho_solve(new._cho_g, np.eye(state.design.n))
    new.nu_hat = model.nu_hat
    new.mean_kernel = model.mean_kernel
    new.noise_kernel = model.noise_kernel.with_nu(new.nu_hat_g)
    new.state = state
    return new


def _evaluate_metrics(cfg, sim, model, seed, iteration):
    if sim.dim == 1:
        grid = np.linspace(0.0, 1.0, cfg.test_grid)[:, None]
    else:
        m = int(round(cfg.test_grid ** (1.0 / sim.dim)))
        axes = [np.linspace(0.0, 1.0, m)] * sim.dim
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, sim.dim)
    mu = np.empty(grid.shape[0])
    s2 = np.empty(grid.shape[0])
    rhat = np.empty(grid.shape[0])
    for i, x in enumerate(grid):
        mu[i], s2[i], _ = model.predict(x)
        rhat[i] = model.noise_value(x)
    out = {"iter": iteration}
    truth_mu = [sim.truth_mean(x) for x in grid]
    if truth_mu[0] is not None:
        truth_mu = np.asarray(truth_mu, dtype=float)
        out["rmse"] = metrics.rmse(mu, truth_mu)
        rng = _iter_rng(seed, iteration, stream=2)
        truth_r = [sim.truth_noise(x) for x in grid]
        if truth_r[0] is not None:
            truth_r = np.asarray(truth_r, dtype=float)
            out["log_noise_rmse"] = metrics.log_noise_rmse(rhat, truth_r)
            ydraw = truth_mu + np.sqrt(truth_r) * rng.standard_normal(grid.shape[0])
        else:
            ydraw = np.array([sim.eval(x, rng) for x in grid])
        out["score"] = metrics.proper_score(mu, np.maximum(s2, 1e-12), ydraw)
    return out


def _checkpoint_payload(model, iteration, h, last_was_explore, horizon_mode):
    payload = {"iter": iteration, "h": h, "last_was_explore": last_was_explore,
               "design": model.design.to_dict(), "model_kind": "hom",
               "trend": model.trend}
    if isinstance(model, HetGP):
        payload.update(model_kind="het", theta=model.mean_kernel.theta.tolist(),
                       theta_g=model.noise_kernel.theta.tolist(), g=model.g,
                       delta=model.delta.tolist())
    else:
        payload.update(theta=model.mean_kernel.theta.tolist(), g=model.g)
    return payload


def run_seed(cfg: ExperimentConfig, seed: int, resume: bool = False) -> dict:
    """One sequential-design lineage; writes trace/metrics/checkpoint files."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    sim = _make_simulator(cfg, seed)
    trace_path = os.path.join(cfg.out_dir, f"trace_{seed}.csv")
    metrics_path = os.path.join(cfg.out_dir, f"metrics_{seed}.csv")
    ckpt_path = os.path.join(cfg.out_dir, f"design_{seed}.json")
    jsonl_path = os.path.join(cfg.out_dir, f"decisions_{seed}.jsonl")

    xcols = [f"x{p+1}" for p in range(sim.dim)]
    trace_rows, metric_rows, decision_log = [], [], []
    t_start = time.perf_counter()

    start_iter = 0
    h = cfg.h if cfg.horizon_mode == "fixed" else 0
    last_was_explore = True
    model = None
    if resume and os.path.exists(ckpt_path):
        with open(ckpt_path) as fh:
            ck = json.load(fh)
        design = UniqueDesign.from_dict(ck["design"])
        if ck["model_kind"] == "het":
            model = HetGP(design, cfg.mean_family, np.asarray(ck["theta"]),
                          cfg.noise_family, np.asarray(ck["theta_g"]), ck["g"],
                          np.asarray(ck["delta"]), ck["trend"])
        else:
            model = HomGP(design, hetgp.KernelSpec(cfg.mean_family, ck["theta"]),
                          ck["g"], ck["trend"], np.nan, True)
        start_iter = ck["iter"]
        h = ck["h"]
        last_was_explore = ck["last_was_explore"]

    if model is None:
        rng0 = _iter_rng(seed, 0)
        pts = maximin_lhs(cfg.init_n, sim.dim, rng0)
        X = np.repeat(pts, cfg.init_replicates, axis=0)
        Y = np.array([sim.eval(x, rng0) for x in X])
        design = ingest(X, Y)
        model = _fit(cfg, design, seed)

    if start_iter == 0:
        metric_rows.append(_evaluate_metrics(cfg, sim, model, seed, 0))

    total_iters = cfg.n_max - cfg.init_n * cfg.init_replicates
    lcfg = cfg.lookahead_config()

    for t in range(start_iter + 1, total_iters + 1):
        it_t0 = time.perf_counter()
        n, N = model.design.n, model.design.total
        if cfg.horizon_mode == "target":
            h = horizon_target(h, n, N, cfg.rho, last_was_explore)
        elif cfg.horizon_mode == "adapt":
            h = horizon_adapt(model.state, rng=_iter_rng(seed, t, stream=3))

        decision = choose_next(model, lcfg, h, seed=(seed, t, 1))
        y = sim.eval(decision.x, _iter_rng(seed, t, stream=0))
        model = _fast_update(model, decision, y)

        refit_now = (model.design.n <= cfg.refit_full_below_n
                     or t % cfg.refit_cadence == 0)
        if refit_now:
            init = model.params() if isinstance(model, HetGP) else None
            model = _fit(cfg, model.design, seed, init=init)
            with open(ckpt_path, "w") as fh:
                json.dump(_checkpoint_payload(model, t, h, not decision.is_replicate,
                                              cfg.horizon_mode), fh)

        last_was_explore = not decision.is_replicate
        elapsed_ms = 1000.0 * (time.perf_counter() - it_t0)
        row = {"iter": t, "N": model.design.total, "n": model.design.n,
               "ratio": model.design.n / model.design.total, "h": h,
               "action": decision.kind}
        for p, c in enumerate(xcols):
            row[c] = float(np.asarray(decision.x).ravel()[p])
        row["y"] = y
        row["elapsed_ms"] = elapsed_ms
        trace_rows.append(row)
        if cfg.verbosity >= 1:
            decision_log.append(decision.to_jsonable())
        if t % cfg.metric_cadence == 0 or t == total_iters:
            metric_rows.append(_evaluate_metrics(cfg, sim, model, seed, t))

    _write_csv(trace_path, ["iter", "N", "n", "ratio", "h", "action", *xcols,
                            "y", "elapsed_ms"], trace_rows, append=resume)
    mkeys = ["iter", "rmse", "log_noise_rmse", "score"]
    _write_csv(metrics_path, mkeys, metric_rows, append=resume)
    if cfg.verbosity >= 1 and decision_log:
        mode = "a" if resume else "w"
        with open(jsonl_path, mode) as fh:
            for rec in decision_log:
                fh.write(json.dumps(rec) + "\n")

    elapsed = time.perf_counter() - t_start
    final = metric_rows[-1] if metric_rows else {}
    return {"seed": seed, "n": model.design.n, "N": model.design.total,
            "ratio": model.design.n / model.design.total,
            "singleton_frac": float(np.mean(model.design.a == 1)),
            "five_plus_frac": float(np.mean(model.design.a >= 5)),
            "elapsed_s": elapsed,
            "final_metrics": {k: v for k, v in final.items() if k != "iter"},
            "trace": trace_path, "metrics": metrics_path}


def _write_csv(path, keys, rows, append=False):
    mode = "a" if append and os.path.exists(path) else "w"
    with open(path, mode, newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys, extrasaction="ignore",
                                restval="")
        if mode == "w":
            writer.writeheader()
        for row in rows:
            writer.writerow(row)


def run_experiment(cfg: ExperimentConfig, n_jobs: int | None = None,
                   resume: bool = False) -> dict:
    """All seeds of one configuration; writes summary.json and returns it."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "config.json"), "w") as fh:
        fh.write(cfg.to_json())
    n_jobs = n_jobs if n_jobs is not None else n_jobs_from_env()
    if n_jobs != 1 and len(cfg.seeds) > 1:
        results = Parallel(n_jobs=n_jobs)(
            delayed(run_seed)(cfg, s, resume) for s in cfg.seeds)
    else:
        results = [run_seed(cfg, s, resume) for s in cfg.seeds]
    summary = {"config": asdict(cfg), "per_seed": results}
    for key in ("ratio", "singleton_frac", "elapsed_s"):
        summary[f"median_{key}"] = float(np.median([r[key] for r in results]))
    rmses = [r["final_metrics"].get("rmse") for r in results]
    if all(v is not None for v in rmses):
        summary["median_rmse"] = float(np.median(rmses))
    with open(os.path.join(cfg.out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def truth_cache(simulator: str, sim_params: dict, grid: int, reps: int,
                seed: int, out_dir: str) -> str:
    """Brute-force ground-truth moments on a grid, cached as CSV + manifest."""
    os.makedirs(out_dir, exist_ok=True)
    sim = testbed.make_simulator(simulator, seed=seed, **sim_params)
    axes = [np.linspace(0.0, 1.0, grid)] * sim.dim
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, sim.dim)
    rows = []
    for i, u in enumerate(pts):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 17, i)))
        vals = np.array([sim.eval(u, rng) for _ in range(reps)])
        rows.append({**{f"x{p+1}": u[p] for p in range(sim.dim)},
                     "mean": float(vals.mean()), "variance": float(vals.var())})
    path = os.path.join(out_dir, f"truth_{simulator}.csv")
    _write_csv(path, list(rows[0].keys()), rows)
    manifest = {"simulator": simulator, "sim_params": sim_params, "grid": grid,
                "reps": reps, "seed": seed, "file": os.path.basename(path)}
    with open(os.path.join(out_dir, f"truth_{simulator}_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    return path
