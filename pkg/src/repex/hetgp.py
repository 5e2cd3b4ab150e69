"""Joint heteroskedastic GP: a mean GP coupled to a latent log-variance GP.

The observation-noise variance is modeled as ``nu * exp(m(x))`` where m is
the predictive mean of a second GP over latent values Delta at the unique
design locations.  Both GPs share the unique-design representation; the
latent GP sees averaging noise ``g / a_i`` at a location with a_i replicates.
Hyperparameters and latents are estimated jointly by maximizing a
concentrated log-likelihood in which both process variances are profiled
out, with analytic gradients for every free parameter.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.special import digamma, polygamma

from . import kernels
from .gp import DUPLICATE_TOL, SurrogateState, UniqueDesign
from .kernels import KernelSpec

# profiled latent-GP variance is floored to keep the concentrated
# likelihood bounded when the latent field collapses to a constant
NU_G_FLOOR = 1e-6

MIN_HET_N = 5  # below this, fall back to a homoskedastic fit

# weak log-normal prior on the relative noise level, breaking the
# small-sample tie between interpolation and honest noise; the O(1)
# penalty is negligible once the O(N) likelihood accumulates
NOISE_PRIOR_LOGMEAN = np.log(1e-2)
NOISE_PRIOR_LOGSD = np.log(100.0)


def _noise_level_penalty(log_level: float) -> tuple[float, float]:
    """(penalty, d penalty / d log_level) for the weak noise-level prior."""
    z = (log_level - NOISE_PRIOR_LOGMEAN) / NOISE_PRIOR_LOGSD
    return -0.5 * z * z, -z / NOISE_PRIOR_LOGSD


@dataclass
class HyperBounds:
    theta: tuple = (1e-3, 10.0)
    g: tuple = (1e-8, 1.0)
    delta: tuple = (np.log(1e-8), np.log(1e4))


@dataclass
class OptBudget:
    maxiter: int = 80
    multistart: int = 3


@dataclass
class HyperInit:
    """Warm-start values; any None field is initialized from the data."""

    theta: np.ndarray | None = None
    theta_g: np.ndarray | None = None
    g: float | None = None
    delta: np.ndarray | None = None


# ---------------------------------------------------------------------------
# likelihood core


def _per_dim_corr(family, X, theta):
    n, d = X.shape
    mats = np.empty((d, n, n))
    for p in range(d):
        mats[p] = kernels._corr_1d(family, X[:, p:p + 1] - X[None, :, p], theta[p])
    return mats


def _chol(M, scale):
    jitter = 0.0
    for attempt in range(3):
        try:
            return cho_factor(M + jitter * np.eye(M.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            jitter = 1e-8 * scale * 10.0 ** attempt
    raise np.linalg.LinAlgError("Cholesky failed after jitter retries")


def _likelihood_core(design: UniqueDesign, fam_m, theta, fam_g, theta_g, g,
                     delta, yc, want_grad=False, het=True):
    """Concentrated joint log-likelihood, optional analytic gradient.

    Returns (ll, grad_dict_or_None, aux).  ``het=False`` drops the latent GP
    and treats ``g`` as the constant relative noise (delta ignored).
    """
    n, N = design.n, design.total
    a = design.a.astype(float)
    X = design.xbar
    km = _per_dim_corr(fam_m, X, theta)
    Cm = km.prod(axis=0)

    aux = {}
    if het:
        kg = _per_dim_corr(fam_g, X, theta_g)
        Cg = kg.prod(axis=0)
        Mg = Cg + np.diag(g / a)
        cho_g = _chol(Mg, 1.0)
        nmean = float(np.mean(delta))
        dtil = delta - nmean
        beta = cho_solve(cho_g, dtil)
        m = nmean + Cg @ beta
        lam = np.exp(np.clip(m, -700.0, 700.0))
        nu_g_raw = float(dtil @ beta) / n
        nu_g = max(nu_g_raw, NU_G_FLOOR)
        Lg = cho_g[0]
        logdet_g = 2.0 * float(np.sum(np.log(np.diag(Lg))))
    else:
        lam = np.full(n, float(g))
        nmean, beta, nu_g, nu_g_raw, logdet_g = 0.0, None, None, None, 0.0

    Omega = Cm + np.diag(lam / a)
    cho_m = _chol(Omega, 1.0)
    alpha = cho_solve(cho_m, yc)
    S = float(np.sum(a * design.s2 / lam))
    Q = float(yc @ alpha)
    nu_hat = max((S + Q) / N, 1e-12 * (1.0 + float(np.mean(yc**2))))
    logdet_m = 2.0 * float(np.sum(np.log(np.diag(cho_m[0]))))

    ll = (-0.5 * N * np.log(nu_hat)
          - 0.5 * float(np.sum((a - 1.0) * np.log(lam) + np.log(a)))
          - 0.5 * logdet_m
          - 0.5 * N * (1.0 + np.log(2.0 * np.pi)))
    if het:
        ll += (-0.5 * n * np.log(nu_g) - 0.5 * logdet_g
               - 0.5 * n * (1.0 + np.log(2.0 * np.pi)))

    aux.update(lam=lam, nu_hat=nu_hat, nu_hat_g=nu_g, alpha=alpha,
               nmean=nmean, cho_m=cho_m, Omega=Omega)
    if not want_grad:
        return ll, None, aux

    eye = np.eye(n)
    Omega_inv = cho_solve(cho_m, eye)

    def dC_dtheta(kmats, p):
        rest = np.ones((n, n))
        for q in range(kmats.shape[0]):
            if q != p:
                rest *= kmats[q]
        return rest

    # mean-kernel lengthscales
    g_theta = np.empty(len(theta))
    for p in range(len(theta)):
        dCp = kernels.corr_dtheta_1d(fam_m, X[:, p:p + 1] - X[None, :, p],
                                     theta[p]) * dC_dtheta(km, p)
        g_theta[p] = 0.5 * (float(alpha @ (dCp @ alpha)) / nu_hat
                            - float(np.sum(Omega_inv * dCp)))

    # gradient with respect to the smoothed variances lam
    G_lam = (0.5 / nu_hat * (a * design.s2 / lam**2 + alpha**2 / a)
             - 0.5 * (a - 1.0) / lam - 0.5 * np.diag(Omega_inv) / a)

    if not het:
        g_g = float(np.sum(G_lam))
        return ll, {"theta": g_theta, "g": g_g}, aux

    Gm = G_lam * lam  # chain through lam = exp(m)
    Mg_inv = cho_solve(cho_g, eye)
    floored = nu_g_raw < NU_G_FLOOR

    # latents: m depends on delta through the centered smoother
    PtGm = cho_solve(cho_g, Cg @ Gm)
    P1 = Cg @ cho_solve(cho_g, np.ones(n))
    g_delta = PtGm + (np.sum(Gm) - float(P1 @ Gm)) / n
    if not floored:
        g_delta = g_delta - (beta - float(np.mean(beta))) / nu_g

    # latent-GP nugget
    g_g = (-float(Gm @ (Cg @ cho_solve(cho_g, beta / a)))
           - 0.5 * float(np.sum(np.diag(Mg_inv) / a)))
    if not floored:
        g_g += 0.5 * float(beta @ (beta / a)) / nu_g

    # latent-kernel lengthscales
    g_theta_g = np.empty(len(theta_g))
    for p in range(len(theta_g)):
        dCgp = kernels.corr_dtheta_1d(fam_g, X[:, p:p + 1] - X[None, :, p],
                                      theta_g[p]) * dC_dtheta(kg, p)
        v = dCgp @ beta
        dm = v - Cg @ cho_solve(cho_g, v)
        val = float(Gm @ dm) - 0.5 * float(np.sum(Mg_inv * dCgp))
        if not floored:
            val += 0.5 * float(beta @ (dCgp @ beta)) / nu_g
        g_theta_g[p] = val

    grads = {"theta": g_theta, "theta_g": g_theta_g, "g": g_g, "delta": g_delta}
    return ll, grads, aux


# ---------------------------------------------------------------------------
# public likelihood surface (spec operations)


def nu_hat(design: UniqueDesign, mean_kernel: KernelSpec, lam, trend: float = 0.0) -> float:
    """Profiled process variance of the mean GP given relative noise lam."""
    a = design.a.astype(float)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (design.n,))
    yc = design.ybar - trend
    Cm = kernels.cross_correlation(mean_kernel, design.xbar, design.xbar)
    cho = _chol(Cm + np.diag(lam / a), 1.0)
    alpha = cho_solve(cho, yc)
    return (float(np.sum(a * design.s2 / lam)) + float(yc @ alpha)) / design.total


def joint_log_likelihood(design: UniqueDesign, fam_m, theta, fam_g, theta_g,
                         g, delta, trend: float = 0.0) -> float:
    """Concentrated joint log-likelihood; -inf when a covariance is not PD."""
    try:
        ll, _, _ = _likelihood_core(design, fam_m, np.asarray(theta, float),
                                    fam_g, np.asarray(theta_g, float), float(g),
                                    np.asarray(delta, float), design.ybar - trend)
    except np.linalg.LinAlgError as exc:
        warnings.warn(f"non-PD covariance in likelihood: {exc}", RuntimeWarning)
        return -np.inf
    return ll


# ---------------------------------------------------------------------------
# fitted models


class HomGP:
    """Homoskedastic GP with profiled variance and constant relative noise."""

    def __init__(self, design, kernel: KernelSpec, g: float, trend: float,
                 loglik: float, converged: bool):
        self.design = design
        self.g = float(g)
        self.trend = float(trend)
        self.loglik_value = float(loglik)
        self.converged = bool(converged)
        _, _, aux = _likelihood_core(design, kernel.family, kernel.theta, None,
                                     None, g, None, design.ybar - trend, het=False)
        self.nu_hat = aux["nu_hat"]
        self.mean_kernel = kernel.with_nu(self.nu_hat)
        self.state = SurrogateState(self.mean_kernel, design,
                                    np.full(design.n, self.nu_hat * self.g),
                                    trend=trend)

    def predict(self, x):
        return self.state.predict(x, noise_at_x=self.noise_value(x))

    def noise_value(self, x) -> float:
        return self.nu_hat * self.g

    def noise_grad(self, x) -> np.ndarray:
        return np.zeros(self.design.dim)

    def loglik(self) -> float:
        return joint_hom_loglik(self.design, self.mean_kernel.family,
                                self.mean_kernel.theta, self.g, self.trend)


def joint_hom_loglik(design, fam, theta, g, trend=0.0) -> float:
    try:
        ll, _, _ = _likelihood_core(design, fam, np.asarray(theta, float), None,
                                    None, float(g), None, design.ybar - trend,
                                    het=False)
    except np.linalg.LinAlgError:
        return -np.inf
    return ll


class HetGP:
    """Fitted joint model; exposes prediction, noise field and latent fusion."""

    def __init__(self, design: UniqueDesign, fam_m, theta, fam_g, theta_g,
                 g: float, delta: np.ndarray, trend: float,
                 loglik: float = np.nan, converged: bool = True):
        self.design = design
        self.g = float(g)
        self.delta = np.asarray(delta, dtype=float).copy()
        self.trend = float(trend)
        self.loglik_value = float(loglik)
        self.converged = bool(converged)

        a = design.a.astype(float)
        Cg = kernels.cross_correlation(KernelSpec(fam_g, theta_g), design.xbar,
                                       design.xbar)
        self._cho_g = _chol(Cg + np.diag(self.g / a), 1.0)
        self.nmean = float(np.mean(self.delta))
        dtil = self.delta - self.nmean
        self._beta = cho_solve(self._cho_g, dtil)
        m = self.nmean + Cg @ self._beta
        self.lam = np.exp(np.clip(m, -700.0, 700.0))
        self.nu_hat_g = max(float(dtil @ self._beta) / design.n, NU_G_FLOOR)
        self._Mg_inv = cho_solve(self._cho_g, np.eye(design.n))

        _, _, aux = _likelihood_core(design, fam_m, np.asarray(theta, float),
                                     fam_g, np.asarray(theta_g, float), self.g,
                                     self.delta, design.ybar - trend)
        self.nu_hat = aux["nu_hat"]
        self.mean_kernel = KernelSpec(fam_m, theta, nu=self.nu_hat)
        self.noise_kernel = KernelSpec(fam_g, theta_g, nu=self.nu_hat_g)
        self.state = SurrogateState(self.mean_kernel, design,
                                    self.nu_hat * self.lam, trend=trend)

    # -- prediction ---------------------------------------------------------

    def predict(self, x):
        """(mu, predictive variance, de-noised variance) at x."""
        return self.state.predict(x, noise_at_x=self.noise_value(x))

    def _cg_vec(self, x):
        return kernels.cross_correlation(self.noise_kernel, self.design.xbar,
                                         np.atleast_2d(np.asarray(x, float))).ravel()

    def predict_noise(self, x):
        """Latent-GP prediction (mu_g, var_g, r_hat) at x.

        At an existing design site the variance is the downdated
        (leave-that-site-out) conditional variance, which stays bounded away
        from zero where the plain predictive variance would collapse.
        """
        x = np.asarray(x, dtype=float).ravel()
        cg = self._cg_vec(x)
        mu_g = self.nmean + float(cg @ self._beta)
        k, dist = self.design.nearest(x)
        if dist <= DUPLICATE_TOL:
            var_g = self.nu_hat_g / float(self._Mg_inv[k, k])
        else:
            quad = float(cg @ (self._Mg_inv @ cg))
            var_g = self.nu_hat_g * max(1.0 - quad, 0.0)
        r_hat = self.nu_hat * float(np.exp(np.clip(mu_g, -700.0, 700.0)))
        return mu_g, var_g, r_hat

    def noise_value(self, x) -> float:
        return self.predict_noise(x)[2]

    def noise_grad(self, x) -> np.ndarray:
        """Spatial gradient of the predicted noise variance r_hat."""
        x = np.asarray(x, dtype=float).ravel()
        r_hat = self.noise_value(x)
        G = kernels.grad_cross(self.noise_kernel, self.design.xbar, x)
        return r_hat * (G.T @ self._beta)

    # -- latent fusion ------------------------------------------------------

    def fuse_latent(self, x, sq_resid_mean: float, abar: int):
        """Precision-weighted merge of the latent-GP prediction at x with the
        bias-corrected empirical log-variance from ``abar`` observations.

        ``sq_resid_mean`` is mean((y_j - mu_n(x))^2) on the response scale.
        Returns (delta_tilde, V_delta_tilde).
        """
        if abar < 1:
            raise ValueError("need at least one observation to fuse")
        sigma2_hat = max(float(sq_resid_mean) / self.nu_hat, 1e-12 * self.nu_hat)
        delta_hat = (np.log(sigma2_hat) - digamma(abar / 2.0) - np.log(2.0)
                     + np.log(abar))
        v_hat = float(polygamma(1, abar / 2.0))
        mu_g, var_g, _ = self.predict_noise(x)
        if var_g <= 0.0:
            return float(mu_g), 0.0
        prec = 1.0 / var_g + 1.0 / v_hat
        fused = (mu_g / var_g + delta_hat / v_hat) / prec
        return float(fused), float(1.0 / prec)

    def loglik(self) -> float:
        return joint_log_likelihood(self.design, self.mean_kernel.family,
                                    self.mean_kernel.theta,
                                    self.noise_kernel.family,
                                    self.noise_kernel.theta, self.g, self.delta,
                                    self.trend)

    def params(self) -> HyperInit:
        return HyperInit(self.mean_kernel.theta.copy(),
                         self.noise_kernel.theta.copy(), self.g,
                         self.delta.copy())

    def to_dict(self) -> dict:
        return {"design": self.design.to_dict(),
                "mean_family": self.mean_kernel.family,
                "theta": self.mean_kernel.theta.tolist(),
                "noise_family": self.noise_kernel.family,
                "theta_g": self.noise_kernel.theta.tolist(),
                "g": self.g, "delta": self.delta.tolist(), "trend": self.trend,
                "loglik": self.loglik_value}

    @staticmethod
    def from_dict(d: dict) -> "HetGP":
        return HetGP(UniqueDesign.from_dict(d["design"]), d["mean_family"],
                     np.asarray(d["theta"], float), d["noise_family"],
                     np.asarray(d["theta_g"], float), d["g"],
                     np.asarray(d["delta"], float), d["trend"],
                     loglik=d.get("loglik", np.nan))


# ---------------------------------------------------------------------------
# fitting


def _empirical_delta(design: UniqueDesign, nu0: float, g0: float,
                     bounds: HyperBounds) -> np.ndarray:
    """Latent init from bias-corrected within-location variances."""
    a = design.a.astype(float)
    lam_emp = np.where(design.a > 1,
                       design.s2 * a / np.maximum(a - 1.0, 1.0) / nu0, g0)
    lam_emp = np.clip(lam_emp, np.exp(bounds.delta[0]), np.exp(bounds.delta[1]))
    return np.log(np.where(lam_emp > 0, lam_emp, g0))


def fit_hom(design: UniqueDesign, family: str = "matern52", theta0=None,
            budget: OptBudget | None = None, center: bool = True,
            seed: int = 0, bounds: HyperBounds | None = None) -> HomGP:
    """Homoskedastic fit: optimize lengthscales and constant relative noise."""
    budget = budget or OptBudget()
    bounds = bounds or HyperBounds()
    trend = float(np.sum(design.a * design.ybar) / design.total) if center else 0.0
    yc = design.ybar - trend
    d = design.dim
    rng = np.random.default_rng(seed)

    def nll(z):
        theta, g = z[:d], z[d]
        try:
            ll, grads, _ = _likelihood_core(design, family, theta, None, None,
                                            g, None, yc, want_grad=True, het=False)
        except np.linalg.LinAlgError:
            return 1e12, np.zeros(d + 1)
        pen, dpen = _noise_level_penalty(np.log(g))
        grad = np.concatenate([grads["theta"], [grads["g"] + dpen / g]])
        return -(ll + pen), -grad

    box = [bounds.theta] * d + [bounds.g]
    starts = [np.concatenate([theta0 if theta0 is not None else np.full(d, 0.2),
                              [0.05]])]
    for _ in range(max(budget.multistart - 1, 0)):
        starts.append(np.concatenate([np.exp(rng.uniform(np.log(0.02), np.log(3.0), d)),
                                      [float(np.exp(rng.uniform(np.log(1e-4), 0.0)))]]))
    best, best_val = starts[0], nll(starts[0])[0]
    converged = False
    for z0 in starts:
        res = minimize(nll, np.clip(z0, [b[0] for b in box], [b[1] for b in box]),
                       jac=True, method="L-BFGS-B", bounds=box,
                       options={"maxiter": budget.maxiter})
        if res.fun < best_val:
            best, best_val, converged = res.x, float(res.fun), bool(res.success)
    kernel = KernelSpec(family, best[:d])
    ll_pure = joint_hom_loglik(design, family, best[:d], best[d], trend)
    return HomGP(design, kernel, best[d], trend, ll_pure, converged)


def fit(design: UniqueDesign, mean_family: str = "matern52",
        noise_family: str = "matern52", init: HyperInit | None = None,
        budget: OptBudget | None = None, center: bool = True, seed: int = 0,
        bounds: HyperBounds | None = None) -> HetGP | HomGP:
    """Fit the joint heteroskedastic model by concentrated MLE.

    Cold fits run a small multistart (homoskedastic-informed, constant-latent
    and perturbed starts); a warm ``init`` runs a single local refinement and
    never returns a worse likelihood than its starting point.  Designs with
    fewer than ``MIN_HET_N`` unique locations fall back to a homoskedastic fit.
    """
    if design.n < MIN_HET_N:
        return fit_hom(design, mean_family, budget=budget, center=center, seed=seed)
    budget = budget or OptBudget()
    bounds = bounds or HyperBounds()
    trend = float(np.sum(design.a * design.ybar) / design.total) if center else 0.0
    yc = design.ybar - trend
    d, n = design.dim, design.n
    rng = np.random.default_rng(seed)

    lo = np.concatenate([np.full(2 * d, bounds.theta[0]), [bounds.g[0]],
                         np.full(n, bounds.delta[0])])
    hi = np.concatenate([np.full(2 * d, bounds.theta[1]), [bounds.g[1]],
                         np.full(n, bounds.delta[1])])

    def unpack(z):
        return z[:d], z[d:2 * d], z[2 * d], z[2 * d + 1:]

    def nll(z):
        theta, theta_g, g, delta = unpack(z)
        try:
            ll, grads, _ = _likelihood_core(design, mean_family, theta,
                                            noise_family, theta_g, g, delta,
                                            yc, want_grad=True)
        except np.linalg.LinAlgError:
            return 1e12, np.zeros_like(z)
        pen, dpen = _noise_level_penalty(float(np.mean(delta)))
        grad = np.concatenate([grads["theta"], grads["theta_g"], [grads["g"]],
                               grads["delta"] + dpen / n])
        return -(ll + pen), -grad

    starts = []
    if init is not None and init.delta is not None and init.delta.size == n:
        starts.append(np.concatenate([init.theta, init.theta_g, [init.g],
                                      init.delta]))
        nstarts = 1
    else:
        hom = fit_hom(design, mean_family, budget=budget, center=center, seed=seed)
        th0 = hom.mean_kernel.theta
        d0 = _empirical_delta(design, hom.nu_hat, hom.g, bounds)
        starts.append(np.concatenate([th0, np.full(d, 1.0), [1e-2], d0]))
        starts.append(np.concatenate([th0, np.full(d, 1.0), [1e-2],
                                      np.full(n, np.log(max(hom.g, 1e-6)))]))
        while len(starts) < budget.multistart:
            starts.append(np.concatenate([
                th0 * np.exp(rng.uniform(-1.0, 1.0, d)),
                np.exp(rng.uniform(np.log(0.1), np.log(2.0), d)),
                [float(np.exp(rng.uniform(np.log(1e-4), 0.0)))],
                d0 + rng.normal(0.0, 0.5, n)]))
        nstarts = len(starts)

    best_z, best_val, converged = None, np.inf, False
    for z0 in starts[:nstarts]:
        z0 = np.clip(z0, lo, hi)
        f0 = nll(z0)[0]
        if f0 < best_val:
            best_z, best_val = z0, f0
        res = minimize(nll, z0, jac=True, method="L-BFGS-B",
                       bounds=list(zip(lo, hi)),
                       options={"maxiter": budget.maxiter})
        if res.fun < best_val:
            best_z, best_val, converged = res.x, float(res.fun), bool(res.success)
    theta, theta_g, g, delta = unpack(best_z)
    ll_pure = joint_log_likelihood(design, mean_family, theta, noise_family,
                                   theta_g, g, delta, trend)
    return HetGP(design, mean_family, theta, noise_family, theta_g, g, delta,
                 trend, loglik=ll_pure, converged=converged)
