import io
from itertools import product

import numpy as np
import pytest

from merwfield.operator import CapacityError
from merwfield.tfim import (AngleGrid, coarse_grain, conditional, read_joint_csv,
                            sample_chain, tfim_joint, write_joint_csv)


def test_free_joint_is_exactly_uniform():
    for lat in (50, 100):
        d = tfim_joint(0.0, 0.0, lat)
        assert np.array_equal(d.joint, np.full((lat, lat), 1.0 / lat ** 2))
        assert d.lam == pytest.approx(lat, rel=1e-14)


def test_grid_trig_tables_are_reflection_paired():
    g = AngleGrid(10)
    assert (g.sin[9], g.cos[9]) == (0.0, 1.0)     # alpha = 2*pi
    assert (g.sin[4], g.cos[4]) == (0.0, -1.0)    # alpha = pi
    # mirror pairs share the cosine and negate the sine bitwise
    for i in range(4):
        j = 8 - i
        assert g.sin[i] == -g.sin[j]
        assert g.cos[i] == g.cos[j]
    perm = g.reflection
    assert perm.tolist() == [8, 7, 6, 5, 4, 3, 2, 1, 0, 9]


def test_joint_symmetries_are_exact():
    for J, h in product((0.0, 1.0, 5.0), repeat=2):
        d = tfim_joint(J, h, 64)
        np.testing.assert_allclose(d.joint, d.joint.T, atol=1e-12)
        r = d.grid.reflection
        np.testing.assert_allclose(d.joint, d.joint[np.ix_(r, r)], atol=1e-12)
        assert d.joint.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(d.joint >= 0.0)


def test_strong_coupling_aligns_neighbors():
    d = tfim_joint(5.0, 0.0, 32)
    s = d.grid.sin
    aligned = float(d.joint[np.outer(s, s) > 0.0].sum())
    assert aligned > 0.9


def test_strong_field_factorizes():
    d = tfim_joint(0.0, 5.0, 32)
    m = d.joint.sum(axis=1)
    np.testing.assert_allclose(d.joint, np.outer(m, m), atol=1e-8)


def test_grid_refinement_converges():
    fine = tfim_joint(1.0, 1.0, 200)
    coarse = tfim_joint(1.0, 1.0, 100)
    folded = coarse_grain(fine.joint, 2)
    assert 0.5 * np.abs(folded - coarse.joint).sum() <= 1e-3


def test_conditional_rows_normalize():
    d = tfim_joint(2.0, 1.0, 16)
    c = conditional(d)
    np.testing.assert_allclose(c.sum(axis=1), np.ones(16), atol=1e-12)
    assert np.all(c >= 0.0)


def test_chain_sampling():
    d = tfim_joint(2.0, 1.0, 8)
    a = sample_chain(d, 500, seed=9)
    b = sample_chain(d, 500, seed=9)
    assert np.array_equal(a, b)
    assert a.min() >= 0 and a.max() < 8
    long = sample_chain(d, 40001, seed=7)
    pairs = np.zeros((8, 8))
    np.add.at(pairs, (long[:-1], long[1:]), 1.0)
    pairs /= pairs.sum()
    assert 0.5 * np.abs(pairs - d.joint).sum() < 0.05
    assert sample_chain(d, 1, seed=0).shape == (1,)
    with pytest.raises(ValueError):
        sample_chain(d, 0, seed=0)


def test_csv_roundtrip_preserves_the_joint(tmp_path):
    d = tfim_joint(1.5, 0.5, 12)
    path = tmp_path / "joint.csv"
    write_joint_csv(d, str(path))
    text = path.read_text()
    assert text.startswith('# {"J": 1.5, "h": 0.5, "lat": 12}\n')
    back = read_joint_csv(str(path))
    assert (back.J, back.h, back.lat) == (1.5, 0.5, 12)
    assert np.array_equal(back.joint, d.joint)
    assert np.isnan(back.lam)


def test_csv_reader_requires_the_header(tmp_path):
    path = tmp_path / "no_header.csv"
    path.write_text("0.5,0.5\n0.5,0.5\n")
    with pytest.raises(ValueError):
        read_joint_csv(str(path))


def test_csv_writer_accepts_streams():
    d = tfim_joint(0.0, 0.0, 4)
    buf = io.StringIO()
    write_joint_csv(d, buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == 5
    assert lines[1].split(",") == ["%.17g" % 0.0625] * 4


def test_validation():
    with pytest.raises(ValueError):
        AngleGrid(3)
    with pytest.raises(CapacityError):
        tfim_joint(0.0, 0.0, 513)
    with pytest.raises(ValueError):
        coarse_grain(np.ones((9, 9)) / 81, 2)
