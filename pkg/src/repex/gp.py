"""Gaussian-process regression in the unique-design representation.

Replicated observations are reduced to sufficient statistics per unique
location (counts, means, within-location variances).  Predictions from this
representation are identical to the full-data formulation at O(n^3) instead
of O(N^3) cost.  The surrogate state maintains an explicit covariance
inverse so that adding a new location (bordered inverse) or a replicate
(rank-one update) costs O(n^2).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import kernels
from .kernels import KernelSpec

DUPLICATE_TOL = 1e-10

# explicit-inverse drift is bounded by re-inverting after this many updates
REINVERT_EVERY = 25


@dataclass(frozen=True)
class UniqueDesign:
    """Sufficient statistics of replicated data at unique locations.

    Attributes
    ----------
    xbar : (n, d) unique locations in [0, 1]^d
    a : (n,) replicate counts, each >= 1
    ybar : (n,) per-location response means
    s2 : (n,) uncorrected within-location variances, mean((y - ybar)^2)
    """

    xbar: np.ndarray
    a: np.ndarray
    ybar: np.ndarray
    s2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xbar", np.atleast_2d(np.asarray(self.xbar, dtype=float)))
        object.__setattr__(self, "a", np.asarray(self.a, dtype=np.int64))
        object.__setattr__(self, "ybar", np.asarray(self.ybar, dtype=float))
        object.__setattr__(self, "s2", np.asarray(self.s2, dtype=float))
        n = self.xbar.shape[0]
        if not (self.a.shape == self.ybar.shape == self.s2.shape == (n,)):
            raise ValueError("inconsistent unique-design field shapes")
        if np.any(self.a < 1):
            raise ValueError("replicate counts must be >= 1")
        if np.any(self.s2 < 0):
            raise ValueError("within-location variances must be >= 0")

    @property
    def n(self) -> int:
        return self.xbar.shape[0]

    @property
    def dim(self) -> int:
        return self.xbar.shape[1]

    @property
    def total(self) -> int:
        """Total observation count N = sum a_i."""
        return int(self.a.sum())

    def add_replicate(self, k: int, y: float) -> "UniqueDesign":
        """Fold one more observation into location k (Welford update)."""
        if not 0 <= k < self.n:
            raise IndexError(f"location index {k} out of range")
        a, ybar, s2 = self.a.copy(), self.ybar.copy(), self.s2.copy()
        m2 = a[k] * s2[k]
        anew = a[k] + 1
        ynew = ybar[k] + (y - ybar[k]) / anew
        m2 += (y - ybar[k]) * (y - ynew)
        a[k], ybar[k], s2[k] = anew, ynew, m2 / anew
        return UniqueDesign(self.xbar, a, ybar, s2)

    def add_location(self, x, y: float) -> "UniqueDesign":
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return UniqueDesign(np.vstack([self.xbar, x]),
                            np.append(self.a, 1),
                            np.append(self.ybar, float(y)),
                            np.append(self.s2, 0.0))

    def nearest(self, x) -> tuple[int, float]:
        """Index and Chebyshev distance of the nearest unique location."""
        d = np.max(np.abs(self.xbar - np.asarray(x, dtype=float).ravel()), axis=1)
        k = int(np.argmin(d))
        return k, float(d[k])

    def expand(self) -> tuple[np.ndarray, np.ndarray]:
        """Synthetic full-data expansion matching all first two moments.

        Re-ingesting the expansion reproduces this design exactly.
        """
        rows, ys = [], []
        for i in range(self.n):
            ai = int(self.a[i])
            rows.append(np.repeat(self.xbar[i:i + 1], ai, axis=0))
            if ai == 1:
                ys.append([self.ybar[i]])
            else:
                npair = ai // 2
                delta = np.sqrt(ai * self.s2[i] / (2 * npair))
                vals = ([self.ybar[i] + delta] * npair + [self.ybar[i] - delta] * npair
                        + ([self.ybar[i]] if ai % 2 else []))
                ys.append(vals)
        return np.vstack(rows), np.concatenate([np.asarray(v) for v in ys])

    def to_dict(self) -> dict:
        return {"xbar": self.xbar.tolist(), "a": self.a.tolist(),
                "ybar": self.ybar.tolist(), "s2": self.s2.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "UniqueDesign":
        return UniqueDesign(np.asarray(d["xbar"], dtype=float), d["a"], d["ybar"], d["s2"])


def ingest(X, Y, tol: float = DUPLICATE_TOL) -> UniqueDesign:
    """Group raw rows (X, Y) into a UniqueDesign, merging rows within tol.

    Rows are duplicates when their Chebyshev distance is <= tol.  Row order
    of the output follows the lexicographic order of the unique locations.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 1 and X.shape[1] > 1 and np.ndim(Y) and len(np.ravel(Y)) == X.shape[1]:
        X = X.T  # single-column input passed as a flat vector
    Y = np.asarray(Y, dtype=float).ravel()
    if X.shape[0] == 0:
        raise ValueError("empty design")
    if X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y lengths differ")
    if np.any(np.isnan(Y)) or np.any(np.isnan(X)):
        raise ValueError("NaN in inputs")
    uniq, inv = np.unique(X, axis=0, return_inverse=True)
    group = np.arange(uniq.shape[0])
    if tol > 0 and uniq.shape[0] > 1:
        for i in range(uniq.shape[0]):
            if group[i] != i:
                continue
            close = np.max(np.abs(uniq[i + 1:] - uniq[i]), axis=1) <= tol
            group[i + 1:][close & (group[i + 1:] == np.arange(i + 1, uniq.shape[0]))] = i
    keep = np.flatnonzero(group == np.arange(uniq.shape[0]))
    remap = {g: j for j, g in enumerate(keep)}
    labels = np.array([remap[group[g]] for g in inv])
    n = keep.size
    a = np.bincount(labels, minlength=n)
    ybar = np.bincount(labels, weights=Y, minlength=n) / a
    s2 = np.bincount(labels, weights=(Y - ybar[labels]) ** 2, minlength=n) / a
    return UniqueDesign(uniq[keep], a, ybar, s2)


class SurrogateState:
    """GP posterior bookkeeping: explicit K^-1, kernel-integral matrix W.

    ``K = nu * C + diag(noise / a)`` on the full covariance scale; ``W`` holds
    nu^2 times the correlation-scale kernel-product integrals, so the
    integrated de-noised variance is ``E - sum(Kinv * W)``.  States are
    treated as immutable: update methods return new instances.
    """

    def __init__(self, kernel: KernelSpec, design: UniqueDesign, noise,
                 trend: float = 0.0, *, _internals=None):
        self.kernel = kernel
        self.design = design
        self.noise = np.broadcast_to(np.asarray(noise, dtype=float),
                                     (design.n,)).copy()
        if np.any(self.noise < 0):
            raise ValueError("noise variances must be >= 0")
        self.trend = float(trend)
        if _internals is not None:
            self.Kinv, self.W, self._updates = _internals
        else:
            self.Kinv = _robust_inverse(self._cov_matrix(), kernel.nu)
            self.W = kernel.nu ** 2 * kernels.w_matrix(kernel, design.xbar)
            self._updates = 0
        self.E = kernels.e_constant(kernel)
        self._alpha = self.Kinv @ (design.ybar - self.trend)

    # -- construction -------------------------------------------------------

    def _cov_matrix(self) -> np.ndarray:
        C = kernels.cross_correlation(self.kernel, self.design.xbar, self.design.xbar)
        return self.kernel.nu * C + np.diag(self.noise / self.design.a)

    def rebuilt(self) -> "SurrogateState":
        """Fresh state from the same kernel/design/noise (drift reference)."""
        return SurrogateState(self.kernel, self.design, self.noise, self.trend)

    # -- prediction ---------------------------------------------------------

    def _k_vec(self, x) -> np.ndarray:
        return self.kernel.nu * kernels.cross_correlation(
            self.kernel, self.design.xbar, np.atleast_2d(np.asarray(x, float))).ravel()

    def predict(self, x, noise_at_x: float = 0.0):
        """Mean, predictive variance and de-noised variance at one point.

        ``noise_at_x`` is the observation noise variance r(x) entering the
        predictive (not de-noised) variance.
        """
        k = self._k_vec(x)
        mu = self.trend + float(k @ self._alpha)
        quad = float(k @ (self.Kinv @ k))
        s2_denoised = max(self.kernel.nu - quad, 0.0)
        return mu, s2_denoised + float(noise_at_x), s2_denoised

    def latent_variance(self, x) -> float:
        """De-noised predictive variance at x (no observation noise)."""
        k = self._k_vec(x)
        return max(self.kernel.nu - float(k @ (self.Kinv @ k)), 0.0)

    # -- sequential updates -------------------------------------------------

    def extend_new_location(self, xnew, rnew: float, ynew: float = np.nan) -> "SurrogateState":
        """Bordered-inverse extension with a new unique location.

        ``ynew`` may be NaN for hypothetical extensions used during
        acquisition search; predictions from such a state are invalid until
        a real response is supplied.
        """
        xnew = np.asarray(xnew, dtype=float).ravel()
        k = self._k_vec(xnew)
        sigma2 = self.kernel.nu + float(rnew) - float(k @ (self.Kinv @ k))
        if sigma2 <= 0.0:
            sigma2 += 1e-8 * self.kernel.nu
            if sigma2 <= 0.0:
                raise FloatingPointError("non-positive predictive variance at new location")
        g = -(self.Kinv @ k) / sigma2
        n = self.design.n
        Kinv = np.empty((n + 1, n + 1))
        Kinv[:n, :n] = self.Kinv + np.outer(g, g) * sigma2
        Kinv[:n, n] = g
        Kinv[n, :n] = g
        Kinv[n, n] = 1.0 / sigma2
        nu2 = self.kernel.nu ** 2
        wvec = nu2 * kernels.w_vector(self.kernel, self.design.xbar, xnew)
        W = np.empty((n + 1, n + 1))
        W[:n, :n] = self.W
        W[:n, n] = wvec
        W[n, :n] = wvec
        W[n, n] = nu2 * kernels.w_self(self.kernel, xnew)
        design = self.design.add_location(xnew, ynew)
        noise = np.append(self.noise, float(rnew))
        return self._spawn(design, noise, Kinv, W)

    def replicate_update_matrix(self, k: int) -> np.ndarray:
        """Rank-one K^-1 increment for one more replicate at location k."""
        rk = self.noise[k]
        if rk == 0.0:
            return np.zeros_like(self.Kinv)
        ak = float(self.design.a[k])
        denom = ak * (ak + 1.0) / rk - self.Kinv[k, k]
        return np.outer(self.Kinv[:, k], self.Kinv[k, :]) / denom

    def add_replicate(self, k: int, ynew: float = np.nan) -> "SurrogateState":
        """Fold a replicate at location k via the rank-one inverse update."""
        if not 0 <= k < self.design.n:
            raise IndexError(f"location index {k} out of range")
        Kinv = self.Kinv + self.replicate_update_matrix(k)
        design = (self.design.add_replicate(k, float(ynew))
                  if np.isfinite(ynew) else
                  replace(self.design, a=_bumped(self.design.a, k)))
        return self._spawn(design, self.noise.copy(), Kinv, self.W)

    def replace_noise(self, k: int, rnew: float) -> "SurrogateState":
        """Change the noise variance at location k (rank-one diagonal shift)."""
        d = (float(rnew) - self.noise[k]) / self.design.a[k]
        col = self.Kinv[:, k]
        Kinv = self.Kinv - np.outer(col, col) * (d / (1.0 + d * self.Kinv[k, k]))
        noise = self.noise.copy()
        noise[k] = float(rnew)
        return self._spawn(self.design, noise, Kinv, self.W)

    def _spawn(self, design, noise, Kinv, W) -> "SurrogateState":
        updates = self._updates + 1
        state = SurrogateState(self.kernel, design, noise, self.trend,
                               _internals=(Kinv, W, updates))
        if updates >= REINVERT_EVERY:
            state.Kinv = _robust_inverse(state._cov_matrix(), state.kernel.nu)
            state._updates = 0
            state._alpha = state.Kinv @ (design.ybar - state.trend)
        return state

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {"kernel": self.kernel.to_dict(), "design": self.design.to_dict(),
                "noise": self.noise.tolist(), "trend": self.trend}

    @staticmethod
    def from_dict(d: dict) -> "SurrogateState":
        return SurrogateState(KernelSpec.from_dict(d["kernel"]),
                              UniqueDesign.from_dict(d["design"]),
                              np.asarray(d["noise"], dtype=float), d.get("trend", 0.0))


def _bumped(a: np.ndarray, k: int) -> np.ndarray:
    out = a.copy()
    out[k] += 1
    return out


def _robust_inverse(K: np.ndarray, nu: float) -> np.ndarray:
    """Cholesky inverse with escalating diagonal jitter (x10, twice)."""
    eye = np.eye(K.shape[0])
    jitter = 0.0
    for attempt in range(3):
        try:
            cf = cho_factor(K + jitter * eye, lower=True)
            return cho_solve(cf, eye)
        except np.linalg.LinAlgError:
            jitter = 1e-8 * nu * 10.0 ** attempt
    raise np.linalg.LinAlgError("covariance not positive definite after jitter retries")


def full_data_predict(kernel: KernelSpec, X, Y, noise_fn, x,
                      trend: float = 0.0):
    """Reference prediction from the expanded full-data formulation.

    O(N^3); used as an oracle for the unique-design equivalence.  ``noise_fn``
    maps a location to its observation-noise variance.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).ravel()
    K = kernel.nu * kernels.cross_correlation(kernel, X, X)
    K[np.diag_indices_from(K)] += np.array([noise_fn(xi) for xi in X])
    Kinv = _robust_inverse(K, kernel.nu)
    x = np.asarray(x, dtype=float).ravel()
    k = kernel.nu * kernels.cross_correlation(kernel, X, x[None, :]).ravel()
    mu = trend + float(k @ (Kinv @ (Y - trend)))
    rx = float(noise_fn(x))
    s2 = kernel.nu + rx - float(k @ (Kinv @ k))
    return mu, s2, s2 - rx
