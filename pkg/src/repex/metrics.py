"""Out-of-sample evaluation metrics for mean and variance forecasts."""
from __future__ import annotations

import numpy as np

NOISE_FLOOR = 1e-12


def rmse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError("shape mismatch")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def log_noise_rmse(pred_r, truth_r) -> float:
    """RMSE between log noise variances, inputs floored away from zero."""
    pred_r = np.maximum(np.asarray(pred_r, dtype=float), NOISE_FLOOR)
    truth_r = np.maximum(np.asarray(truth_r, dtype=float), NOISE_FLOOR)
    return rmse(np.log(pred_r), np.log(truth_r))


def proper_score(mu, sigma2, y) -> float:
    """Mean of -(y - mu)^2 / sigma^2 - log sigma^2; higher is better.

    Strictly proper for jointly forecasting mean and variance of Gaussian
    observations.
    """
    mu = np.asarray(mu, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (mu.shape == sigma2.shape == y.shape):
        raise ValueError("shape mismatch")
    if np.any(sigma2 <= 0):
        raise ValueError("variance forecasts must be positive")
    return float(np.mean(-((y - mu) ** 2) / sigma2 - np.log(sigma2)))
