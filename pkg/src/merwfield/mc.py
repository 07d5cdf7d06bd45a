"""Metropolis Monte Carlo on a torus, as an independent cross-check.

Random-site updates; one sweep is rows*cols attempted flips.  The
kernel is numba-compiled and seeded inside the compiled code, so a
(seed, dims, params, sweeps) tuple reproduces the exact chain.  Error
bars come from batch means over the post-burn-in energy series.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .fileio import open_for_write
from .patterns import ModelParams

__all__ = ["MCResult", "run_metropolis", "batch_means_stderr",
           "running_stderr", "write_series_csv"]

BATCHES = 20


@njit(cache=True)
def _kernel(spins, beta, mu, jh, jv, sweeps, burn_in, seed):
    rows, cols = spins.shape
    n = rows * cols
    np.random.seed(seed)
    u_series = np.empty(sweeps)
    m_series = np.empty(sweeps)
    blocks = np.zeros(16, np.int64)
    for t in range(sweeps):
        for _ in range(n):
            r = np.random.randint(rows)
            c = np.random.randint(cols)
            s = spins[r, c]
            nb = (jh * (spins[r, (c + 1) % cols] + spins[r, (c - 1) % cols])
                  + jv * (spins[(r + 1) % rows, c] + spins[(r - 1) % rows, c]))
            de = 2.0 * s * (mu + nb)
            if de <= 0.0 or np.random.random() < np.exp(-beta * de):
                spins[r, c] = -s
        e = 0.0
        m = 0.0
        for r in range(rows):
            for c in range(cols):
                s = spins[r, c]
                e -= s * (mu + jh * spins[r, (c + 1) % cols]
                          + jv * spins[(r + 1) % rows, c])
                m += s
        u_series[t] = e / n
        m_series[t] = m / n
        if t >= burn_in:
            for r in range(rows):
                for c in range(cols):
                    k = 0
                    k = (k << 1) | (1 if spins[r, c] > 0 else 0)
                    k = (k << 1) | (1 if spins[r, (c + 1) % cols] > 0 else 0)
                    k = (k << 1) | (1 if spins[(r + 1) % rows, c] > 0 else 0)
                    k = (k << 1) | (1 if spins[(r + 1) % rows, (c + 1) % cols] > 0 else 0)
                    blocks[k] += 1
    return u_series, m_series, blocks


@dataclass
class MCResult:
    rows: int
    cols: int
    params: ModelParams
    seed: int
    sweeps: int
    burn_in: int
    u_series: np.ndarray
    mag_series: np.ndarray
    block_prob: np.ndarray
    u_mean: float
    mag_mean: float
    stderr_u: float
    stderr_mag: float


def batch_means_stderr(series: np.ndarray, batches: int = BATCHES) -> float:
    """Standard error of the mean from batch means (default 20 batches).

    Correlated-series safe as long as batches are longer than the
    autocorrelation time; trailing samples that do not fill a batch are
    dropped.
    """
    series = np.asarray(series, float)
    size = series.size // batches
    if size < 1:
        return float("nan")
    means = series[:batches * size].reshape(batches, size).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(batches))


def running_stderr(series: np.ndarray, batches: int = BATCHES) -> np.ndarray:
    """Batch-means stderr of series[:t+1] for every t, via prefix sums."""
    series = np.asarray(series, float)
    n = series.size
    out = np.full(n, np.nan)
    csum = np.concatenate([[0.0], np.cumsum(series)])
    for t in range(n):
        size = (t + 1) // batches
        if size < 1:
            continue
        edges = np.arange(batches + 1) * size
        means = (csum[edges[1:]] - csum[edges[:-1]]) / size
        out[t] = np.sqrt(means.var(ddof=1) / batches)
    return out


def run_metropolis(params: ModelParams, rows: int, cols: int, sweeps: int,
                   seed: int = 0, burn_in: int | None = None) -> MCResult:
    """Run the chain from a hot (random, seed-derived) start."""
    if rows < 2 or cols < 2:
        raise ValueError("torus needs rows >= 2 and cols >= 2")
    if sweeps < 1:
        raise ValueError("sweeps must be positive")
    if burn_in is None:
        burn_in = sweeps // 10
    if not 0 <= burn_in < sweeps:
        raise ValueError("burn_in must lie inside the sweep range")

    init_rng = np.random.Generator(np.random.PCG64(seed))
    spins = np.where(init_rng.random((rows, cols)) < 0.5, 1, -1).astype(np.int8)
    u_series, m_series, blocks = _kernel(
        spins, params.beta, params.mu, params.jh, params.jv,
        sweeps, burn_in, seed)
    kept_u = u_series[burn_in:]
    kept_m = m_series[burn_in:]
    return MCResult(
        rows=rows, cols=cols, params=params, seed=seed, sweeps=sweeps,
        burn_in=burn_in, u_series=u_series, mag_series=m_series,
        block_prob=blocks / max(blocks.sum(), 1),
        u_mean=float(kept_u.mean()), mag_mean=float(kept_m.mean()),
        stderr_u=batch_means_stderr(kept_u),
        stderr_mag=batch_means_stderr(kept_m))


def write_series_csv(result: MCResult, path) -> None:
    """Per-sweep series: sweep_index,U,mag,stderr_U.

    stderr_U is the running batch-means estimate over the post-burn-in
    sweeps seen so far; rows without enough data carry nan.
    """
    run = np.full(result.sweeps, np.nan)
    run[result.burn_in:] = running_stderr(result.u_series[result.burn_in:])
    with open_for_write(path) as fh:
        fh.write("sweep_index,U,mag,stderr_U\n")
        for t in range(result.sweeps):
            fh.write("%d,%.17g,%.17g,%.17g\n"
                     % (t + 1, result.u_series[t], result.mag_series[t], run[t]))
