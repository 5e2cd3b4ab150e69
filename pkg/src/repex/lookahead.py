"""Rollout lookahead over replication and horizon controllers.

To decide whether the next run replicates an existing location or explores
a new one, ``h + 1`` hypothetical decision paths are evaluated: path j
replicates greedily for j steps, explores once, then replicates greedily to
the horizon, all against frozen hyperparameters and a frozen noise field.
The returned action is the first step of the path with the lowest terminal
criterion; ties, and continuous winners within a tolerance of an existing
location, fall to the replicate.

Two controllers adjust the horizon online: ``horizon_target`` steers the
unique-to-total design ratio toward a target, and ``horizon_adapt`` samples
the horizon from the replicate deficits implied by the optimal static
allocation rule.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .gp import SurrogateState
from .imspe import ImspeWorkspace, SearchOptions, optimize_next


@dataclass
class LookaheadConfig:
    """Horizon policy and tie thresholds for the acquisition decision."""

    horizon_mode: str = "fixed"       # fixed | target | adapt
    h: int = 0                        # fixed horizon, >= -1
    rho: float = 0.2                  # target unique-to-total ratio
    epsilon: float = 1e-6
    search: SearchOptions = field(default_factory=SearchOptions)
    n_jobs: int = 1

    def __post_init__(self):
        if self.horizon_mode not in ("fixed", "target", "adapt"):
            raise ValueError(f"unknown horizon mode {self.horizon_mode!r}")
        if self.horizon_mode == "fixed" and self.h < -1:
            raise ValueError("fixed horizon must be >= -1")
        if self.horizon_mode == "target" and not 0.0 < self.rho < 1.0:
            raise ValueError("target ratio must lie in (0, 1)")


@dataclass
class DesignDecision:
    """Outcome of one acquisition step."""

    kind: str                         # explore | replicate
    x: np.ndarray
    k: int | None
    value: float                      # terminal criterion of the chosen path
    horizon: int
    path_values: list = field(default_factory=list)
    paths: list = field(default_factory=list)   # per path: list of actions
    best_path: int = 0

    @property
    def is_replicate(self) -> bool:
        return self.kind == "replicate"

    def to_jsonable(self) -> dict:
        return {"kind": self.kind, "x": np.asarray(self.x).tolist(),
                "k": self.k, "value": self.value, "horizon": self.horizon,
                "path_values": list(map(float, self.path_values)),
                "best_path": self.best_path}


def _hyp_replicate(state: SurrogateState):
    """Greedy hypothetical replicate: argmin of the one-step criterion."""
    ws = ImspeWorkspace(state)
    k, val = ws.best_replicate()
    return state.add_replicate(k), k, val


def _rollout_path(state: SurrogateState, noise_field, j: int, h: int,
                  opts: SearchOptions, seed) -> tuple[float, list]:
    """From a state already holding j hypothetical replicates: explore once,
    then replicate greedily for the remaining h - j steps."""
    rng = np.random.default_rng(seed)
    ws = ImspeWorkspace(state)
    res = optimize_next(ws, noise_field, opts, rng, pure_continuous=True)
    actions = [("explore", res.x.copy())]
    st = state.extend_new_location(res.x, noise_field.value(res.x))
    value = res.value
    for _ in range(h - j):
        st, k, value = _hyp_replicate(st)
        actions.append(("replicate", k))
    return float(value), actions


def choose_next(model, cfg: LookaheadConfig, h: int, seed=None) -> DesignDecision:
    """Replicate-or-explore decision at horizon h over frozen snapshots.

    ``model`` provides the surrogate state and the noise field
    (``noise_value`` / ``noise_grad``).  All hypothetical states are
    discarded; the model is not modified.
    """
    if h < -1:
        raise ValueError("horizon must be >= -1")
    state = model.state
    noise_field = _ModelNoise(model)
    opts = cfg.search
    ss = np.random.SeedSequence(seed)
    path_seeds = ss.spawn(max(h, 0) + 2)

    degenerate = False
    if h > 0:
        # zero-gain replicates (noiseless sites) make every path equivalent
        degenerate = float(ImspeWorkspace(state).replicate_gains().max()) <= 0.0
    if h <= 0 or degenerate:
        ws = ImspeWorkspace(state)
        res = optimize_next(ws, noise_field, opts,
                            np.random.default_rng(path_seeds[0]),
                            pure_continuous=(h == -1))
        kind = "replicate" if res.is_replicate else "explore"
        actions = [("replicate", res.k) if res.is_replicate
                   else ("explore", res.x.copy())]
        return DesignDecision(kind, res.x, res.k, res.value, h,
                              [res.value], [actions], 0)

    # shared greedy-replicate chain: chain[j] holds j hypothetical replicates
    chain = [state]
    chain_ks = []
    for _ in range(h):
        nxt, k, _ = _hyp_replicate(chain[-1])
        chain.append(nxt)
        chain_ks.append(k)

    jobs = ((chain[j], noise_field, j, h, opts, path_seeds[j]) for j in range(h + 1))
    if cfg.n_jobs != 1:
        results = Parallel(n_jobs=cfg.n_jobs)(
            delayed(_rollout_path)(*args) for args in jobs)
    else:
        results = [_rollout_path(*args) for args in jobs]

    values = [v for v, _ in results]
    paths = []
    for j, (_, acts) in enumerate(results):
        paths.append([("replicate", chain_ks[i]) for i in range(j)] + acts)

    explore_val = values[0]
    best_rep = int(np.argmin(values[1:])) + 1 if h >= 1 else 0
    if explore_val < values[best_rep]:
        x = paths[0][0][1]
        knear, dist = state.design.nearest(x)
        if dist < cfg.epsilon:  # continuous winner collapses onto a site
            return DesignDecision("replicate", state.design.xbar[knear].copy(),
                                  knear, explore_val, h, values, paths, 0)
        return DesignDecision("explore", x, None, explore_val, h, values,
                              paths, 0)
    k0 = chain_ks[0]
    return DesignDecision("replicate", state.design.xbar[k0].copy(), k0,
                          values[best_rep], h, values, paths, best_rep)


class _ModelNoise:
    """Adapter exposing a model's predicted noise as a field."""

    def __init__(self, model):
        self.model = model

    def value(self, x) -> float:
        return float(self.model.noise_value(x))

    def grad(self, x) -> np.ndarray:
        return np.asarray(self.model.noise_grad(x), dtype=float)


# ---------------------------------------------------------------------------
# horizon controllers


def horizon_target(h: int, n: int, N: int, rho: float, last_was_explore: bool) -> int:
    """Ratio-steering controller: nudge the horizon toward n/N == rho."""
    ratio = n / N
    if ratio > rho and last_was_explore:
        return h + 1
    if ratio < rho and not last_was_explore:
        return max(h - 1, -1)
    return h


def sk_allocation(state: SurrogateState, noise=None, N_total: int | None = None) -> np.ndarray:
    """Optimal static replicate allocation over the existing locations.

    a_i* proportional to sqrt(r_i * (K^-1 W K^-1)_ii), scaled to N_total.
    """
    ws = ImspeWorkspace(state)
    r = state.noise if noise is None else np.asarray(noise, dtype=float)
    N_total = state.design.total if N_total is None else int(N_total)
    Ki = np.clip(ws.kwk_diag(), 0.0, None)
    wts = np.sqrt(r * Ki)
    s = wts.sum()
    if s <= 0.0:
        return np.full(state.design.n, N_total / state.design.n)
    return N_total * wts / s


def horizon_adapt(state: SurrogateState, noise=None, rng=None) -> int:
    """Sample the horizon uniformly from the replicate deficits.

    Deficits are max(0, round(a_i*) - a_i) against the current total budget;
    rounding is half-to-even.
    """
    rng = rng if rng is not None else np.random.default_rng()
    a_star = sk_allocation(state, noise)
    deficits = np.maximum(0, np.rint(a_star).astype(int) - state.design.a)
    return int(rng.choice(deficits))
