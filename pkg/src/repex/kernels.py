"""Stationary separable kernels on [0, 1]^d with closed-form product integrals.

Four correlation families are supported: Gaussian (squared exponential,
parameterized by a squared lengthscale) and Matern with smoothness
1/2, 3/2 and 5/2 (parameterized by a lengthscale).  Beyond pointwise
correlations and their spatial derivatives, this module provides the
integral of kernel products over the unit box,

    w(xi, xj) = prod_p int_0^1 k_p(xi_p, x) k_p(xj_p, x) dx,

its derivatives with respect to one argument, and the derivative of the
self-integral w(x, x) -- the building blocks of closed-form integrated
prediction-error criteria.  All w-quantities are on the correlation scale;
the process variance ``nu`` is applied by callers (see ``e_constant``).

The Matern closed forms come from symbolic integration, regrouped so every
exponential has a non-positive argument (see scripts/derive_kernel_integrals.py).
For lengthscales above ``THETA_CLOSED_FORM_MAX`` the polynomial terms of the
Matern forms lose precision to cancellation, so the integrals fall back to
adaptive quadrature.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import erf

from . import _matern_w as _mw

FAMILIES = ("gaussian", "matern52", "matern32", "matern12")

# Matern closed forms degrade by cancellation above this lengthscale.
THETA_CLOSED_FORM_MAX = 10.0

_SQRT_C = {"matern12": 1.0, "matern32": np.sqrt(3.0), "matern52": np.sqrt(5.0)}


class DegenerateGradientWarning(RuntimeWarning):
    """Matern spatial derivative requested at exactly zero distance."""


@dataclass(frozen=True)
class KernelSpec:
    """Separable kernel: family, per-dimension theta, process variance nu.

    ``theta`` is the squared lengthscale for the Gaussian family and the
    lengthscale for the Matern families.  ``k(x, x') = nu * prod_p k_p``.
    """

    family: str
    theta: np.ndarray
    nu: float = 1.0

    def __post_init__(self):
        fam = self.family.lower().replace("_", "").replace("-", "")
        aliases = {"gaussian": "gaussian", "sqexp": "gaussian",
                   "matern52": "matern52", "matern32": "matern32",
                   "matern12": "matern12", "exponential": "matern12"}
        if fam not in aliases:
            raise ValueError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", aliases[fam])
        th = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if th.ndim != 1 or not np.all(th > 0):
            raise ValueError("theta must be positive, one value per dimension")
        object.__setattr__(self, "theta", th)
        if not self.nu > 0:
            raise ValueError("nu must be positive")

    @property
    def dim(self) -> int:
        return self.theta.shape[0]

    def with_theta(self, theta) -> "KernelSpec":
        return KernelSpec(self.family, np.asarray(theta, dtype=float), self.nu)

    def with_nu(self, nu: float) -> "KernelSpec":
        return KernelSpec(self.family, self.theta, float(nu))

    def to_dict(self) -> dict:
        return {"family": self.family, "theta": self.theta.tolist(), "nu": self.nu}

    @staticmethod
    def from_dict(d: dict) -> "KernelSpec":
        return KernelSpec(d["family"], np.asarray(d["theta"], dtype=float), d["nu"])


def _as_2d(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x.reshape(1, -1) if x.ndim == 1 else x


# ---------------------------------------------------------------------------
# univariate correlations and their spatial derivatives

def _corr_1d(family: str, delta, theta):
    """Univariate correlation as a function of signed differences."""
    if family == "gaussian":
        return np.exp(-delta * delta / theta)
    r = np.abs(delta)
    if family == "matern12":
        return np.exp(-r / theta)
    if family == "matern32":
        z = _SQRT_C["matern32"] * r / theta
        return (1.0 + z) * np.exp(-z)
    z = _SQRT_C["matern52"] * r / theta
    return (1.0 + z + z * z / 3.0) * np.exp(-z)


def _dcorr_1d(family: str, delta, theta):
    """d k(xi, x) / dx with delta = xi - x (signed)."""
    if family == "gaussian":
        return 2.0 * delta / theta * np.exp(-delta * delta / theta)
    r = np.abs(delta)
    s = np.sign(delta)
    if family == "matern12":
        out = s / theta * np.exp(-r / theta)
    elif family == "matern32":
        out = 3.0 * delta / theta**2 * np.exp(-_SQRT_C["matern32"] * r / theta)
    else:
        z = _SQRT_C["matern52"] * r / theta
        out = 5.0 * delta / (3.0 * theta**2) * (1.0 + z) * np.exp(-z)
    return out


def corr_dtheta_1d(family: str, delta, theta):
    """d k / d theta for the univariate correlation (hyperparameter grad)."""
    if family == "gaussian":
        d2 = delta * delta
        return np.exp(-d2 / theta) * d2 / theta**2
    r = np.abs(delta)
    if family == "matern12":
        return np.exp(-r / theta) * r / theta**2
    if family == "matern32":
        z = _SQRT_C["matern32"] * r / theta
        return z * z * np.exp(-z) / theta
    z = _SQRT_C["matern52"] * r / theta
    return z * z * (1.0 + z) * np.exp(-z) / (3.0 * theta)


def correlation(spec: KernelSpec, x, xp) -> float:
    """Product correlation prod_p k_p(x_p, x'_p); 1 at x == xp."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xp = np.atleast_1d(np.asarray(xp, dtype=float))
    if x.shape != xp.shape or x.shape[0] != spec.dim:
        raise ValueError("dimension mismatch between x, xp and theta")
    return float(np.prod(_corr_1d(spec.family, x - xp, spec.theta)))


def cross_correlation(spec: KernelSpec, X, Y) -> np.ndarray:
    """Correlation matrix between row sets X (n x d) and Y (m x d)."""
    X, Y = _as_2d(X), _as_2d(Y)
    out = np.ones((X.shape[0], Y.shape[0]))
    for p in range(spec.dim):
        out *= _corr_1d(spec.family, X[:, p:p + 1] - Y[None, :, p], spec.theta[p])
    return out


def kernel_grad(spec: KernelSpec, xi, x) -> np.ndarray:
    """Gradient of k(xi, x) with respect to x (correlation scale).

    For Matern families the absolute-value kink makes the derivative
    one-sided at zero distance; the convention here returns 0 in the
    affected coordinate and emits ``DegenerateGradientWarning``.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if xi.shape != x.shape or xi.shape[0] != spec.dim:
        raise ValueError("dimension mismatch between xi, x and theta")
    delta = xi - x
    if spec.family != "gaussian" and np.any(delta == 0.0):
        warnings.warn("Matern kernel gradient at zero distance; using one-sided 0",
                      DegenerateGradientWarning, stacklevel=2)
    kp = _corr_1d(spec.family, delta, spec.theta)
    dp = _dcorr_1d(spec.family, delta, spec.theta)
    total = np.prod(kp)
    out = np.empty(spec.dim)
    for p in range(spec.dim):
        rest = total / kp[p] if kp[p] > 0 else np.prod(np.delete(kp, p))
        out[p] = dp[p] * rest
    return out


def grad_cross(spec: KernelSpec, X, x) -> np.ndarray:
    """(n x d) matrix with rows d k(X_i, x) / dx (correlation scale)."""
    X, x = _as_2d(X), np.asarray(x, dtype=float).ravel()
    kp = np.empty((X.shape[0], spec.dim))
    dp = np.empty_like(kp)
    for p in range(spec.dim):
        delta = X[:, p] - x[p]
        kp[:, p] = _corr_1d(spec.family, delta, spec.theta[p])
        dp[:, p] = _dcorr_1d(spec.family, delta, spec.theta[p])
    total = np.prod(kp, axis=1)
    out = np.empty_like(kp)
    for p in range(spec.dim):
        with np.errstate(divide="ignore", invalid="ignore"):
            rest = np.where(kp[:, p] > 0, total / kp[:, p],
                            np.prod(np.delete(kp, p, axis=1), axis=1))
        out[:, p] = dp[:, p] * rest
    return out


# ---------------------------------------------------------------------------
# univariate kernel-product integrals over [0, 1]

def _w_gauss_1d(a, b, theta):
    s = np.sqrt(2.0 * theta)
    return (0.25 * np.sqrt(2.0 * np.pi * theta)
            * np.exp(-(a - b) ** 2 / (2.0 * theta))
            * (erf((2.0 - a - b) / s) + erf((a + b) / s)))


def _dw_gauss_1d(x, xi, theta):
    """d w(x, xi) / dx for the Gaussian family."""
    s = np.sqrt(2.0 * theta)
    return (np.sqrt(np.pi / (8.0 * theta)) * np.exp(-(x - xi) ** 2 / (2.0 * theta))
            * ((x - xi) * (erf((x + xi - 2.0) / s) - erf((x + xi) / s))
               + np.sqrt(2.0 * theta / np.pi)
               * (np.exp(-(x + xi) ** 2 / (2.0 * theta))
                  - np.exp(-(x + xi - 2.0) ** 2 / (2.0 * theta)))))


def _c2_gauss_1d(x, theta):
    # antisymmetric about 1/2 by reflection of the integration domain
    return np.exp(-2.0 * x**2 / theta) - np.exp(-2.0 * (1.0 - x) ** 2 / theta)


_MAT_FUNCS = {
    "matern12": (_mw.w12, _mw.dwdu12, _mw.dwdv12),
    "matern32": (_mw.w32, _mw.dwdu32, _mw.dwdv32),
    "matern52": (_mw.w52, _mw.dwdu52, _mw.dwdv52),
}


def _mat_exps(lo, hi, theta, c):
    e_m = np.exp(-c * (lo + hi) / theta)
    e_d = np.exp(c * (lo - hi) / theta)
    e_p = np.exp(c * (lo + hi - 2.0) / theta)
    return e_m, e_d, e_p


def _w_mat_1d(family, a, b, theta):
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    c = _SQRT_C[family]
    wf = _MAT_FUNCS[family][0]
    return wf(lo, hi, theta, c, *_mat_exps(lo, hi, theta, c))


def _dw_mat_1d(family, x, xi, theta):
    """d w(x, xi) / dx via the canonically ordered branch (overflow safe)."""
    lo, hi = np.minimum(x, xi), np.maximum(x, xi)
    c = _SQRT_C[family]
    _, dwdu, dwdv = _MAT_FUNCS[family]
    exps = _mat_exps(lo, hi, theta, c)
    return np.where(x <= xi, dwdu(lo, hi, theta, c, *exps),
                    dwdv(lo, hi, theta, c, *exps))


def _c2_mat_1d(family, x, theta):
    c = _SQRT_C[family]
    _, dwdu, dwdv = _MAT_FUNCS[family]
    exps = _mat_exps(x, x, theta, c)
    return dwdu(x, x, theta, c, *exps) + dwdv(x, x, theta, c, *exps)


def _w_quad_1d(family, a, b, theta):
    k = lambda u, x: _corr_1d(family, u - x, theta)
    pts = sorted({float(a), float(b)} - {0.0, 1.0})
    val, _ = integrate.quad(lambda x: k(a, x) * k(b, x), 0.0, 1.0,
                            points=pts or None, limit=200,
                            epsabs=1e-13, epsrel=1e-13)
    return val


def _dw_quad_1d(family, x, xi, theta):
    # d/dx of k(x, u) equals _dcorr_1d evaluated with delta = u - x
    integrand = lambda u: (_dcorr_1d(family, u - x, theta)
                           * _corr_1d(family, xi - u, theta))
    pts = sorted({float(x), float(xi)} - {0.0, 1.0})
    val, _ = integrate.quad(integrand, 0.0, 1.0, points=pts or None,
                            limit=200, epsabs=1e-13, epsrel=1e-13)
    return val


def _w_1d(family, a, b, theta):
    if family == "gaussian":
        return _w_gauss_1d(a, b, theta)
    if theta > THETA_CLOSED_FORM_MAX:
        a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
        it = np.nditer([a, b, None])
        for aa, bb, out in it:
            out[...] = _w_quad_1d(family, float(aa), float(bb), theta)
        return it.operands[2]
    return _w_mat_1d(family, a, b, theta)


def _dw_1d(family, x, xi, theta):
    if family == "gaussian":
        return _dw_gauss_1d(x, xi, theta)
    if theta > THETA_CLOSED_FORM_MAX:
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        it = np.nditer([x, xi, None])
        for xx, yy, out in it:
            out[...] = _dw_quad_1d(family, float(xx), float(yy), theta)
        return it.operands[2]
    return _dw_mat_1d(family, x, xi, theta)


def _c2_1d(family, x, theta):
    if family == "gaussian":
        return _c2_gauss_1d(x, theta)
    if theta > THETA_CLOSED_FORM_MAX:
        h = 1e-6
        return (_w_quad_1d(family, x + h, x + h, theta)
                - _w_quad_1d(family, x - h, x - h, theta)) / (2 * h)
    return _c2_mat_1d(family, x, theta)


# ---------------------------------------------------------------------------
# multivariate assembly (correlation scale; nu applied by callers)

def w_integral(spec: KernelSpec, xi, xj) -> float:
    """prod_p int_0^1 k_p(xi_p, x) k_p(xj_p, x) dx; symmetric in (xi, xj)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    xj = np.atleast_1d(np.asarray(xj, dtype=float))
    if xi.shape != xj.shape or xi.shape[0] != spec.dim:
        raise ValueError("dimension mismatch between xi, xj and theta")
    out = 1.0
    for p in range(spec.dim):
        out *= float(_w_1d(spec.family, xi[p], xj[p], spec.theta[p]))
    return out


def w_matrix(spec: KernelSpec, X) -> np.ndarray:
    """Symmetric n x n matrix of w_integral over all row pairs of X."""
    X = _as_2d(X)
    out = np.ones((X.shape[0], X.shape[0]))
    for p in range(spec.dim):
        out *= _w_1d(spec.family, X[:, p:p + 1], X[None, :, p], spec.theta[p])
    return 0.5 * (out + out.T)


def w_vector(spec: KernelSpec, X, x) -> np.ndarray:
    """n-vector of w_integral(spec, X_i, x)."""
    X, x = _as_2d(X), np.asarray(x, dtype=float).ravel()
    out = np.ones(X.shape[0])
    for p in range(spec.dim):
        out *= _w_1d(spec.family, X[:, p], x[p], spec.theta[p])
    return out


def w_self(spec: KernelSpec, x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    return float(np.prod([_w_1d(spec.family, x[p], x[p], spec.theta[p])
                          for p in range(spec.dim)]))


def _per_dim_w(spec, X, x):
    """Per-dimension w values and first-argument derivatives at (x, X_i)."""
    X, x = _as_2d(X), np.asarray(x, dtype=float).ravel()
    wp = np.empty((X.shape[0], spec.dim))
    dp = np.empty_like(wp)
    for p in range(spec.dim):
        wp[:, p] = _w_1d(spec.family, x[p], X[:, p], spec.theta[p])
        dp[:, p] = _dw_1d(spec.family, x[p], X[:, p], spec.theta[p])
    return wp, dp


def w_grad(spec: KernelSpec, x, xi) -> np.ndarray:
    """Gradient of w_integral(x, xi) with respect to x."""
    wp, dp = _per_dim_w(spec, np.atleast_2d(np.asarray(xi, float)), x)
    total = np.prod(wp[0])
    out = np.empty(spec.dim)
    for p in range(spec.dim):
        rest = total / wp[0, p] if wp[0, p] > 0 else np.prod(np.delete(wp[0], p))
        out[p] = dp[0, p] * rest
    return out


def w_grad_matrix(spec: KernelSpec, X, x) -> np.ndarray:
    """(n x d) matrix with entries d w(x, X_i) / dx_p."""
    wp, dp = _per_dim_w(spec, X, x)
    total = np.prod(wp, axis=1)
    out = np.empty_like(wp)
    for p in range(spec.dim):
        with np.errstate(divide="ignore", invalid="ignore"):
            rest = np.where(wp[:, p] > 0, total / wp[:, p],
                            np.prod(np.delete(wp, p, axis=1), axis=1))
        out[:, p] = dp[:, p] * rest
    return out


def w_self_grad(spec: KernelSpec, x) -> np.ndarray:
    """Gradient of the self integral w(x, x) with respect to x."""
    x = np.asarray(x, dtype=float).ravel()
    wxx = np.array([_w_1d(spec.family, x[p], x[p], spec.theta[p])
                    for p in range(spec.dim)])
    c2 = np.array([_c2_1d(spec.family, x[p], spec.theta[p])
                   for p in range(spec.dim)])
    total = np.prod(wxx)
    out = np.empty(spec.dim)
    for p in range(spec.dim):
        rest = total / wxx[p] if wxx[p] > 0 else np.prod(np.delete(wxx, p))
        out[p] = c2[p] * rest
    return out


def e_constant(spec: KernelSpec) -> float:
    """Integral of k(x, x) over the unit box: nu for stationary kernels."""
    return float(spec.nu)
