import io
import itertools

import numpy as np
import pytest

from merwfield.mc import (batch_means_stderr, run_metropolis, running_stderr,
                          write_series_csv)
from merwfield.patterns import ModelParams


def torus_params(j=0.3, rows=4):
    return ModelParams(width=rows, cyclic=True, beta=1.0, mu=0.0, jh=j, jv=j)


def exact_torus_u(rows, cols, j, beta=1.0):
    """Exhaustive Boltzmann average of the per-site energy."""
    n = rows * cols
    idx = np.arange(1 << n, dtype=np.int64)
    bits = ((idx[:, None] >> np.arange(n)) & 1).astype(np.int8)
    s = (2 * bits - 1).reshape(-1, rows, cols).astype(np.float64)
    e = -j * (s * np.roll(s, -1, axis=2) + s * np.roll(s, -1, axis=1)).sum(axis=(1, 2))
    w = np.exp(-beta * (e - e.min()))
    return float((w * e).sum() / w.sum() / n)


def test_run_is_deterministic():
    p = torus_params()
    a = run_metropolis(p, 8, 8, 200, seed=5)
    b = run_metropolis(p, 8, 8, 200, seed=5)
    c = run_metropolis(p, 8, 8, 200, seed=6)
    assert np.array_equal(a.u_series, b.u_series)
    assert a.u_mean == b.u_mean
    assert not np.array_equal(a.u_series, c.u_series)


def test_small_torus_against_exhaustive_enumeration():
    # 4x4 at J=0.3: 65536 configurations, summed exactly
    exact = exact_torus_u(4, 4, 0.3)
    res = run_metropolis(torus_params(0.3), 4, 4, 40000, seed=3)
    assert res.stderr_u < 0.02
    assert abs(res.u_mean - exact) < 5.0 * res.stderr_u


def test_block_distribution_properties():
    res = run_metropolis(torus_params(0.2), 16, 16, 4000, seed=1)
    blk = res.block_prob
    assert blk.shape == (16,)
    assert blk.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(blk >= 0.0)
    # global spin flip maps key k to its complement; mu=0 makes the
    # model flip symmetric up to sampling noise
    for k in range(16):
        assert blk[k] == pytest.approx(blk[15 - k], abs=0.05)


def test_batch_means_on_iid_samples():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(4000)
    se = batch_means_stderr(x)
    assert se == pytest.approx(1.0 / np.sqrt(4000), rel=0.5)
    assert np.isnan(batch_means_stderr(np.ones(19)))


def test_running_stderr_prefix_behavior():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(400)
    run = running_stderr(x)
    assert np.all(np.isnan(run[:19]))
    assert np.all(np.isfinite(run[19:]))
    assert run[-1] == pytest.approx(batch_means_stderr(x), rel=1e-10)
    # prefix value equals a fresh computation on the truncated series
    assert run[99] == pytest.approx(batch_means_stderr(x[:100]), rel=1e-10)


def test_run_validation():
    p = torus_params()
    with pytest.raises(ValueError):
        run_metropolis(p, 1, 8, 100)
    with pytest.raises(ValueError):
        run_metropolis(p, 8, 1, 100)
    with pytest.raises(ValueError):
        run_metropolis(p, 8, 8, 0)
    with pytest.raises(ValueError):
        run_metropolis(p, 8, 8, 100, burn_in=100)
    with pytest.raises(ValueError):
        run_metropolis(p, 8, 8, 100, burn_in=-1)


def test_default_burn_in_is_a_tenth():
    res = run_metropolis(torus_params(), 8, 8, 250, seed=0)
    assert res.burn_in == 25
    assert res.sweeps == 250
    assert res.u_series.shape == (250,)


def test_series_csv_format():
    res = run_metropolis(torus_params(), 8, 8, 60, seed=4, burn_in=10)
    buf = io.StringIO()
    write_series_csv(res, buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == 61
    assert lines[0] == "sweep_index,U,mag,stderr_U"
    first = lines[1].split(",")
    assert first[0] == "1"
    assert float(first[1]) == res.u_series[0]
    # fewer than 20 post-burn-in sweeps: stderr still nan at row 29
    assert lines[29].split(",")[3] == "nan"
    assert lines[10].split(",")[3] == "nan"
    assert float(lines[30].split(",")[3]) > 0.0
    assert float(lines[60].split(",")[3]) == pytest.approx(
        batch_means_stderr(res.u_series[10:]), rel=1e-10)


def test_energy_tracks_coupling():
    # stronger coupling lowers the energy
    lo = run_metropolis(torus_params(0.1), 16, 16, 3000, seed=7)
    hi = run_metropolis(torus_params(0.5), 16, 16, 3000, seed=7)
    assert hi.u_mean < lo.u_mean
