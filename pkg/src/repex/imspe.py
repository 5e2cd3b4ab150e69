"""Closed-form integrated prediction-error criterion and its optimizer.

The integrated de-noised posterior variance over [0, 1]^d reduces to
``E - tr(K^-1 W)`` with W the kernel-product integral matrix.  Appending a
candidate location updates the trace in O(n^2), replicating an existing
location in O(n^2) via a rank-one trace correction, and the criterion has a
closed-form spatial gradient, enabling gradient-based continuous search
combined with a cheap discrete scan over replicates.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .gp import SurrogateState
from .kernels import DegenerateGradientWarning


class ConstantNoise:
    """Spatially constant observation-noise field."""

    def __init__(self, r: float):
        self.r = float(r)

    def value(self, x) -> float:
        return self.r

    def grad(self, x) -> np.ndarray:
        return np.zeros(np.asarray(x).size)


class CallableNoise:
    """Noise field from a callable, with analytic or finite-difference grad."""

    def __init__(self, fn, grad_fn=None, fd_step: float = 1e-6):
        self.fn = fn
        self.grad_fn = grad_fn
        self.fd_step = fd_step

    def value(self, x) -> float:
        return float(self.fn(np.asarray(x, dtype=float)))

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if self.grad_fn is not None:
            return np.asarray(self.grad_fn(x), dtype=float).ravel()
        out = np.empty(x.size)
        for p in range(x.size):
            xp, xm = x.copy(), x.copy()
            xp[p] += self.fd_step
            xm[p] -= self.fd_step
            out[p] = (self.fn(xp) - self.fn(xm)) / (2 * self.fd_step)
        return out


class ImspeWorkspace:
    """Criterion evaluations against a frozen surrogate snapshot.

    Caches the trace term and the quadratic products shared by the
    candidate criterion, the replicate scan and the gradient.
    """

    def __init__(self, state: SurrogateState):
        self.state = state
        self.trace = float(np.sum(state.Kinv * state.W))
        self._kwk_diag = None

    @property
    def imspe(self) -> float:
        """Current integrated de-noised variance I_N = E - tr(K^-1 W)."""
        return max(self.state.E - self.trace, 0.0)

    def _candidate_parts(self, x, r):
        st = self.state
        k = st._k_vec(x)
        Kik = st.Kinv @ k
        sigma2 = st.kernel.nu + float(r) - float(k @ Kik)
        if sigma2 <= 0.0:
            sigma2 += 1e-8 * st.kernel.nu
            if sigma2 <= 0.0:
                raise FloatingPointError("non-positive predictive variance at candidate")
        nu2 = st.kernel.nu ** 2
        w = nu2 * kernels.w_vector(st.kernel, st.design.xbar, x)
        wxx = nu2 * kernels.w_self(st.kernel, x)
        return k, Kik, sigma2, w, wxx

    def imspe_next(self, x, r: float) -> float:
        """I_{N+1} when appending candidate x with noise variance r."""
        k, Kik, sigma2, w, wxx = self._candidate_parts(x, r)
        g = -Kik / sigma2
        reduction = sigma2 * float(g @ (self.state.W @ g)) + 2.0 * float(w @ g) + wxx / sigma2
        return self.imspe - reduction

    def kwk_diag(self) -> np.ndarray:
        """diag(K^-1 W K^-1); cached, shared by the scan and allocation rules."""
        if self._kwk_diag is None:
            V = self.state.W @ self.state.Kinv
            self._kwk_diag = np.einsum("ij,ij->j", self.state.Kinv, V)
        return self._kwk_diag

    def replicate_gains(self) -> np.ndarray:
        """tr(B_k W) for every location k (the replicate-scan vector)."""
        st = self.state
        a = st.design.a.astype(float)
        with np.errstate(divide="ignore"):
            denom = a * (a + 1.0) / st.noise - np.diag(st.Kinv)
        gains = np.where(st.noise > 0.0, self.kwk_diag() / denom, 0.0)
        return gains

    def imspe_replicate(self, k: int) -> float:
        """I_{N+1} when replicating existing location k."""
        st = self.state
        rk = st.noise[k]
        if rk == 0.0:
            return self.imspe
        ak = float(st.design.a[k])
        denom = ak * (ak + 1.0) / rk - st.Kinv[k, k]
        gain = float(st.Kinv[k, :] @ (st.W @ st.Kinv[:, k])) / denom
        return self.imspe - gain

    def best_replicate(self) -> tuple[int, float]:
        gains = self.replicate_gains()
        k = int(np.argmax(gains))
        return k, self.imspe - float(gains[k])

    def imspe_grad(self, x, r: float, dr) -> np.ndarray:
        """Gradient of imspe_next with respect to the candidate location.

        ``dr`` is the spatial gradient of the noise field at x.
        """
        st = self.state
        x = np.asarray(x, dtype=float).ravel()
        dr = np.asarray(dr, dtype=float).ravel()
        k, Kik, sigma2, w, wxx = self._candidate_parts(x, r)
        g = -Kik / sigma2
        Wg = st.W @ g
        gWg = float(g @ Wg)
        nu = st.kernel.nu
        D = nu * kernels.grad_cross(st.kernel, st.design.xbar, x)
        C1 = nu ** 2 * kernels.w_grad_matrix(st.kernel, st.design.xbar, x)
        c2 = nu ** 2 * kernels.w_self_grad(st.kernel, x)
        out = np.empty(x.size)
        for p in range(x.size):
            dp = D[:, p]
            dsig2 = dr[p] - 2.0 * float(dp @ Kik)
            v1 = -dsig2 / sigma2 ** 2
            h = -(v1 * Kik + (st.Kinv @ dp) / sigma2)
            out[p] = -(dsig2 * gWg + 2.0 * sigma2 * float(Wg @ h)
                       + 2.0 * float(C1[:, p] @ g) + 2.0 * float(w @ h)
                       + v1 * wxx + c2[p] / sigma2)
        return out

    def replication_condition(self, x, r: float):
        """Noise threshold above which the best replicate beats candidate x.

        Returns (replicate_preferred, threshold, k_star).
        """
        st = self.state
        k, Kik, sigma2, w, wxx = self._candidate_parts(x, r)
        numerator = (float(Kik @ (st.W @ Kik)) - 2.0 * float(w @ Kik) + wxx)
        kstar, _ = self.best_replicate()
        gains = self.replicate_gains()
        tr_bw = float(gains[kstar])
        sigma2_denoised = sigma2 - float(r)
        if tr_bw <= 0.0:
            return False, np.inf, kstar
        threshold = numerator / tr_bw - sigma2_denoised
        return bool(r >= threshold), threshold, kstar


@dataclass
class SearchOptions:
    """Controls for the combined continuous/discrete criterion search."""

    multistart: int | None = None     # defaults to max(5, 2 d)
    maxiter: int = 60
    epsilon: float = 1e-6             # replicate tie threshold (gap and distance)
    ftol: float = 1e-14


@dataclass
class SearchResult:
    x: np.ndarray
    value: float
    is_replicate: bool
    k: int | None
    n_evals: int = 0


def _multistart_points(workspace, kstar, count, d, rng):
    """One start near the best replicate, the rest space filling."""
    xb = workspace.state.design.xbar
    starts = [np.clip(xb[kstar] + rng.uniform(-0.05, 0.05, d), 0.0, 1.0)]
    if d == 1:
        m = count - 1
        grid = (np.arange(m) + 0.5 + rng.uniform(-0.5, 0.5, m)) / max(m, 1)
        starts.extend(np.clip(grid, 0.0, 1.0).reshape(-1, 1))
    else:
        for _ in range(count - 1):
            starts.append(rng.uniform(0.0, 1.0, d))
    return starts


def optimize_next(workspace: ImspeWorkspace, noise_field, opts: SearchOptions = None,
                  rng=None, pure_continuous: bool = False) -> SearchResult:
    """Minimize the one-step criterion over [0, 1]^d and over replicates.

    Multistart gradient search on the continuous criterion is compared with
    the discrete replicate scan.  Ties within ``epsilon`` (relative objective
    gap, or coordinate distance to an existing location) go to the replicate,
    except under ``pure_continuous`` which always returns the continuous
    winner.
    """
    opts = opts or SearchOptions()
    rng = rng if rng is not None else np.random.default_rng()
    st = workspace.state
    d = st.design.dim
    nstarts = opts.multistart or max(5, 2 * d)

    kstar, val_rep = workspace.best_replicate()
    evals = st.design.n

    def objective(x):
        x = np.clip(x, 0.0, 1.0)
        r = noise_field.value(x)
        f = workspace.imspe_next(x, r)
        g = workspace.imspe_grad(x, r, noise_field.grad(x))
        return f, g

    best_x, best_val = None, np.inf
    bounds = [(0.0, 1.0)] * d
    with warnings.catch_warnings():
        # the discrete branch owns exact-coincidence candidates
        warnings.simplefilter("ignore", DegenerateGradientWarning)
        for x0 in _multistart_points(workspace, kstar, nstarts, d, rng):
            try:
                res = minimize(objective, x0, jac=True, method="L-BFGS-B",
                               bounds=bounds,
                               options={"maxiter": opts.maxiter, "ftol": opts.ftol})
            except FloatingPointError:
                continue
            evals += res.nfev
            if res.fun < best_val:
                best_val, best_x = float(res.fun), np.clip(res.x, 0.0, 1.0)

    if best_x is None:  # all continuous starts failed
        return SearchResult(st.design.xbar[kstar].copy(), val_rep, True, kstar, evals)

    if pure_continuous:
        return SearchResult(best_x, best_val, False, None, evals)

    knear, dist = st.design.nearest(best_x)
    if dist < opts.epsilon:
        return SearchResult(st.design.xbar[knear].copy(),
                            workspace.imspe_replicate(knear), True, knear, evals)
    scale = max(abs(best_val), 1e-300)
    if val_rep <= best_val or (val_rep - best_val) / scale < opts.epsilon:
        return SearchResult(st.design.xbar[kstar].copy(), val_rep, True, kstar, evals)
    return SearchResult(best_x, best_val, False, None, evals)
