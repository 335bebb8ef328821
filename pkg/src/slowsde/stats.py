"""Increment statistics for hierarchy ensembles.

Windows of recorded paths give samples of the increments Delta y_m,
Delta W, Delta Wh; after removing the deterministic drift s/2 from y_1
the fluctuation increments Delta Y_m should have zero mean, covariance
Delta t * L L^T, and vanishing correlation with the driving increments.
Window samples are martingale increments over disjoint intervals, hence
uncorrelated, so plain standard errors apply.
"""

from __future__ import annotations

import math

import numpy as np

from .kernels import ConvolutionChain, cholesky, mat_float
from .rat import Q
from .simulate import PathEnsemble


class WindowError(ValueError):
    """Requested window/transient does not fit the recorded horizon."""


def default_transient(chain: ConvolutionChain) -> float:
    """Ten e-folding times of the slowest memory mode."""
    return 10.0 / float(min(chain.rates))


def increment_statistics(ensemble: PathEnsemble, window: float,
                         transient: float | None = None) -> dict:
    """Drift, covariance, and driving-noise correlations of y increments.

    Estimates come with standard errors; targets are (s/2, 0, ...) for
    the drift, L L^T for Cov(Delta Y)/Delta t, and 0 for the
    cross-correlations.
    """
    if ensemble.kind != "hierarchy":
        raise ValueError("increment statistics are defined for hierarchy ensembles")
    chain = ConvolutionChain([Q(r) for r in ensemble.meta["chain"]])
    s = int(ensemble.meta["s"])
    n = len(chain)
    times = ensemble.times
    rec_dt = float(times[1] - times[0])
    if transient is None:
        transient = default_transient(chain)
    w_recs = max(1, round(window / rec_dt))
    tau = w_recs * rec_dt
    start = int(math.ceil(transient / rec_dt - 1e-9))
    if start + w_recs >= len(times):
        raise WindowError(
            f"window {window} after transient {transient} exceeds horizon {times[-1]}")

    marks = np.arange(start, len(times), w_recs)
    recs = ensemble.states[:, marks, :]
    incr = np.diff(recs, axis=1)  # (M, n_win, dim)
    M, n_win, _ = incr.shape
    samples = incr.reshape(M * n_win, -1)
    N = samples.shape[0]

    dy = samples[:, :n].copy()
    dW = samples[:, 2 * n]
    dWh = samples[:, 2 * n + 1]
    fluct = dy.copy()
    fluct[:, 0] -= 0.5 * s * tau

    drift_est = dy.mean(axis=0) / tau
    drift_se = dy.std(axis=0, ddof=1) / math.sqrt(N) / tau
    drift_target = np.zeros(n)
    drift_target[0] = 0.5 * s

    cov_est = (fluct.T @ fluct) / N / tau  # zero-mean by construction of the target
    L = cholesky(chain)
    cov_target = L.values @ L.values.T
    cov_se = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            cov_se[i, j] = math.sqrt(
                (cov_est[i, i] * cov_est[j, j] + cov_est[i, j] ** 2) / (N - 1))

    corr_se = 1.0 / math.sqrt(N)
    corr = {}
    for name, dref in (("W", dW), ("Wh", dWh)):
        ref = dref - dref.mean()
        denom = np.sqrt((ref ** 2).sum())
        for m in range(n):
            fm = fluct[:, m] - fluct[:, m].mean()
            corr[f"{name},Y{m + 1}"] = float(ref @ fm / (denom * np.sqrt((fm ** 2).sum())))

    return {
        "samples": int(N),
        "window": tau,
        "transient": transient,
        "drift": {"estimate": drift_est.tolist(), "std_error": drift_se.tolist(),
                  "target": drift_target.tolist()},
        "covariance": {"estimate": cov_est.tolist(), "std_error": cov_se.tolist(),
                       "target": cov_target.tolist()},
        "correlations": {"estimate": corr, "std_error": corr_se},
    }


def histogram_modes(samples: np.ndarray, bins: int = 61, smooth: int = 2) -> list:
    """Locations of local maxima of a smoothed histogram, highest first."""
    counts, edges = np.histogram(samples, bins=bins)
    kernel = np.ones(2 * smooth + 1) / (2 * smooth + 1)
    dens = np.convolve(counts.astype(float), kernel, mode="same")
    centers = 0.5 * (edges[:-1] + edges[1:])
    modes = []
    for i in range(1, bins - 1):
        if dens[i] > dens[i - 1] and dens[i] >= dens[i + 1] and dens[i] > 0:
            modes.append((dens[i], centers[i]))
    modes.sort(reverse=True)
    return [loc for _h, loc in modes]
