"""Stochastic simulators with known or estimable ground truth.

All simulators take inputs in unit coordinates on [0, 1]^d and map to their
physical domain internally.  Evaluations are deterministic given the
supplied generator; truth fields, when available, are deterministic
functions.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import cholesky

from . import kernels
from .kernels import KernelSpec


class Simulator:
    """Base: physical box mapped affinely onto the unit cube."""

    name = "simulator"

    def __init__(self, domain):
        self.domain = np.atleast_2d(np.asarray(domain, dtype=float))
        self.dim = self.domain.shape[0]

    def to_physical(self, u):
        u = np.asarray(u, dtype=float)
        return self.domain[:, 0] + u * (self.domain[:, 1] - self.domain[:, 0])

    def to_unit(self, x):
        x = np.asarray(x, dtype=float)
        return (x - self.domain[:, 0]) / (self.domain[:, 1] - self.domain[:, 0])

    def eval(self, u, rng) -> float:
        raise NotImplementedError

    def truth_mean(self, u):
        return None

    def truth_noise(self, u):
        return None

    def truth_noise_grad(self, u):
        return None


def forrester_mean(x):
    x = np.asarray(x, dtype=float)
    return (6.0 * x - 2.0) ** 2 * np.sin(12.0 * x - 4.0)


def forrester_noise(x):
    x = np.asarray(x, dtype=float)
    return (1.1 + np.sin(2.0 * np.pi * x)) ** 2


def forrester_noise_grad(x):
    x = np.asarray(x, dtype=float)
    return 2.0 * (1.1 + np.sin(2.0 * np.pi * x)) * 2.0 * np.pi * np.cos(2.0 * np.pi * x)


class ForresterSim(Simulator):
    """1-d multimodal mean with a smoothly varying noise variance."""

    name = "forrester"

    def __init__(self):
        super().__init__([[0.0, 1.0]])

    def eval(self, u, rng) -> float:
        x = float(np.asarray(u).ravel()[0])
        return float(forrester_mean(x) + np.sqrt(forrester_noise(x)) * rng.standard_normal())

    def truth_mean(self, u):
        return float(forrester_mean(np.asarray(u).ravel()[0]))

    def truth_noise(self, u):
        return float(forrester_noise(np.asarray(u).ravel()[0]))

    def truth_noise_grad(self, u):
        return np.array([float(forrester_noise_grad(np.asarray(u).ravel()[0]))])


class SyntheticHetGPSim(Simulator):
    """1-d draws from a heteroskedastic GP with a sampled log-variance field.

    A latent log-variance field is drawn from a GP on a dense grid and
    shifted additively so the grid mean of the variance field equals ``nu``
    (unit average signal-to-noise ratio).  The mean function is an
    independent GP draw on the same grid; truth fields are interpolated.
    """

    name = "synthetic"

    def __init__(self, seed: int, theta: float = 0.1, nu: float = 1.0,
                 theta_g: float = 0.5, nu_g: float = 49.0,
                 family: str = "matern52", grid_size: int = 1001):
        super().__init__([[0.0, 1.0]])
        self.nu = float(nu)
        rng = np.random.default_rng(seed)
        self.grid = np.linspace(0.0, 1.0, grid_size)
        G = self.grid[:, None]
        Cg = kernels.cross_correlation(KernelSpec(family, [theta_g]), G, G)
        Lg = cholesky(nu_g * Cg + 1e-10 * np.eye(grid_size), lower=True)
        log_lam = Lg @ rng.standard_normal(grid_size)
        log_lam += np.log(self.nu / np.mean(np.exp(log_lam)))
        self.lam_grid = np.exp(log_lam)
        Cm = kernels.cross_correlation(KernelSpec(family, [theta]), G, G)
        Lm = cholesky(self.nu * Cm + 1e-10 * np.eye(grid_size), lower=True)
        self.f_grid = Lm @ rng.standard_normal(grid_size)

    def eval(self, u, rng) -> float:
        x = float(np.asarray(u).ravel()[0])
        return float(self.truth_mean(x) + np.sqrt(self.truth_noise(x)) * rng.standard_normal())

    def truth_mean(self, u):
        return float(np.interp(np.asarray(u).ravel()[0], self.grid, self.f_grid))

    def truth_noise(self, u):
        return self.nu * float(np.interp(np.asarray(u).ravel()[0], self.grid, self.lam_grid))


def sir_simulate(S0: int, I0: int, beta: float = 0.75, gamma: float = 0.5,
                 M: int = 2000, rng=None) -> float:
    """Aggregate infected-days of one epidemic trajectory.

    Event-driven exact simulation of the Markov chain with infection rate
    beta * S * I / M and recovery rate gamma * I, accumulating I * dt until
    the infected pool empties.
    """
    S0, I0, M = int(S0), int(I0), int(M)
    if S0 < 0 or I0 < 0 or M <= 0:
        raise ValueError("population counts must be non-negative, M positive")
    if S0 + I0 > M:
        raise ValueError("S0 + I0 exceeds the population size M")
    rng = rng if rng is not None else np.random.default_rng()
    S, I = S0, I0
    acc = 0.0
    binv = beta / M
    # chunked draws keep the event loop cheap
    chunk = 4096
    exps = rng.exponential(size=chunk)
    unis = rng.random(size=chunk)
    idx = 0
    while I > 0:
        if idx == chunk:
            exps = rng.exponential(size=chunk)
            unis = rng.random(size=chunk)
            idx = 0
        rate_inf = binv * S * I
        total = rate_inf + gamma * I
        acc += I * exps[idx] / total
        if unis[idx] * total < rate_inf:
            S -= 1
            I += 1
        else:
            I -= 1
        idx += 1
    return acc


class SIRSim(Simulator):
    """Initial-condition response surface of the stochastic epidemic model.

    Inputs are (susceptibles, infecteds) at time zero on a physical box;
    the response is the aggregate infected-days of one trajectory.  Default
    rates put the critical threshold S ~ M * gamma / beta inside the
    susceptible range, producing the burn-out/outbreak variance regime.
    """

    name = "sir"

    def __init__(self, beta: float = 0.75, gamma: float = 0.5, M: int = 2000,
                 domain=((1200.0, 2000.0), (0.0, 200.0))):
        super().__init__(domain)
        self.beta, self.gamma, self.M = float(beta), float(gamma), int(M)

    def initial_counts(self, u):
        S0, I0 = np.rint(self.to_physical(u)).astype(int)
        return int(S0), int(I0)

    def eval(self, u, rng) -> float:
        S0, I0 = self.initial_counts(u)
        return sir_simulate(S0, I0, self.beta, self.gamma, self.M, rng)


def make_simulator(name: str, seed: int = 0, **params) -> Simulator:
    if name == "forrester":
        return ForresterSim()
    if name == "synthetic":
        return SyntheticHetGPSim(seed=params.pop("field_seed", seed), **params)
    if name == "sir":
        return SIRSim(**params)
    raise ValueError(f"unknown simulator {name!r}")
