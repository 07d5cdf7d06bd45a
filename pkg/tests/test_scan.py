import hashlib
import json
import math

import numpy as np
import pytest

from merwfield import scan
from merwfield.operator import TransferOperator, dominant_eigenpair, pair_prob
from merwfield.patterns import InteractionSpec, ModelParams, spin_table


def test_mid_column_values():
    for w, mid in [(2, 1), (3, 2), (4, 2), (5, 3), (8, 4), (10, 5), (13, 7)]:
        assert scan.mid_column(w) == mid


def test_context_shape_validation():
    scan.ContextShape(3, 3).validate(8)
    with pytest.raises(ValueError):
        scan.ContextShape(0, 1)
    with pytest.raises(ValueError):
        scan.ContextShape(1, 0)
    with pytest.raises(ValueError, match="b=2"):
        scan.ContextShape(3, 3).validate(4)  # widest fit at w=4 is (2, 2)
    with pytest.raises(ValueError):
        scan.ContextShape(1, 5).validate(6)
    with pytest.raises(ValueError):
        scan.ContextShape(1, 1).validate(1)


def context_joint_oracle(sol, op, before, after):
    """Loop accumulation of the (before, cell, after) joint from pair_prob."""
    w = op.width
    mid = scan.mid_column(w)
    pp = pair_prob(sol, op)
    bits = (spin_table(w) > 0).astype(int)
    joint = np.zeros((2 ** before, 2, 2 ** after))
    for u in range(op.dim):
        for v in range(op.dim):
            bk = 0
            for c in range(mid - before, mid):
                bk = (bk << 1) | bits[u, c]
            ak = 0
            for c in range(mid, mid + after):
                ak = (ak << 1) | bits[v, c]
            joint[bk, bits[u, mid], ak] += pp[u, v]
    return joint


def test_derived_model_matches_loop_oracle(w8_pair):
    op, sol = w8_pair
    for b, a in [(1, 1), (2, 3), (3, 2)]:
        model = scan.derive_model(sol, op, scan.ContextShape(b, a))
        joint = context_joint_oracle(sol, op, b, a)
        ctx = joint.sum(axis=1).reshape(-1, 2 ** a)
        ctx_flat = np.concatenate([ctx[i] for i in range(2 ** b)])
        np.testing.assert_allclose(model.ctx_prob,
                                   joint.sum(axis=1).ravel(), atol=1e-13)
        want_p = joint[:, 1, :].ravel() / joint.sum(axis=1).ravel()
        np.testing.assert_allclose(model.table, want_p, atol=1e-12)
        np.testing.assert_allclose(model.joint, joint, atol=1e-13)
        assert ctx_flat == pytest.approx(list(model.ctx_prob))


def test_pair_marginal_dense_and_implicit_agree():
    params = ModelParams(width=8, cyclic=True, beta=1.0, jh=0.25, jv=0.45, mu=0.1)
    dense = TransferOperator(params, representation="dense")
    impl = TransferOperator(params, representation="implicit")
    sold = dominant_eigenpair(dense)
    soli = dominant_eigenpair(impl)
    for u_cols, v_cols in [([3, 4], [4, 5]), ([6, 1], [0]), ([0], [7, 2, 4])]:
        md = scan.pair_marginal(sold, dense, u_cols, v_cols)
        mi = scan.pair_marginal(soli, impl, u_cols, v_cols)
        np.testing.assert_allclose(md, mi, atol=1e-11)
        assert md.sum() == pytest.approx(1.0, abs=1e-10)


def test_pair_marginal_respects_listed_column_order(w8_pair):
    op, sol = w8_pair
    fwd = scan.pair_marginal(sol, op, [1, 6], [4])
    rev = scan.pair_marginal(sol, op, [6, 1], [4])
    # swapping the listed u-columns swaps the corresponding key bits
    want = fwd.reshape(2, 2, 2).transpose(1, 0, 2).reshape(4, 2)
    np.testing.assert_allclose(rev, want, atol=1e-14)


def test_observables_free_case():
    params = ModelParams(width=6, cyclic=True, beta=1.0, jh=0.0, jv=0.0)
    op = TransferOperator(params)
    sol = dominant_eigenpair(op)
    model = scan.derive_model(sol, op, scan.ContextShape(2, 2))
    obs = scan.observables(model)
    assert obs["U"] == pytest.approx(0.0, abs=1e-12)
    assert obs["H"] == pytest.approx(1.0, abs=1e-12)
    assert obs["mag"] == pytest.approx(0.0, abs=1e-12)


def test_observables_match_pair_prob_oracle():
    params = ModelParams(width=6, cyclic=False, beta=0.9, mu=0.3, jh=0.4, jv=0.7)
    op = TransferOperator(params)
    sol = dominant_eigenpair(op)
    model = scan.derive_model(sol, op, scan.ContextShape(2, 2))
    obs = scan.observables(model)

    mid = scan.mid_column(6)
    pp = pair_prob(sol, op)
    spins = spin_table(6).astype(float)
    s_q = spins[:, mid]
    s_left = spins[:, mid - 1]
    u_direct = -float(np.einsum("uv,u->", pp, s_q * (0.3 + 0.4 * s_left))
                      + 0.7 * np.einsum("uv,u,v->", pp, s_q, s_q))
    mag_direct = float(pp.sum(axis=1) @ s_q)
    joint = context_joint_oracle(sol, op, 2, 2)
    ctx = joint.sum(axis=1)
    p1 = joint[:, 1, :] / ctx
    h_direct = float(np.sum(ctx * (-p1 * np.log2(p1) - (1 - p1) * np.log2(1 - p1))))
    assert obs["U"] == pytest.approx(u_direct, abs=1e-12)
    assert obs["mag"] == pytest.approx(mag_direct, abs=1e-12)
    assert obs["H"] == pytest.approx(h_direct, abs=1e-12)


def test_reduced_models_are_consistent_marginalizations(w8_pair, w8_model):
    op, sol = w8_pair
    family = scan.reduced_models(w8_model)
    assert set(family) == {(b, a) for b in range(4) for a in range(4)}
    # a reduced table must equal the model derived directly at that shape
    for shape in [(1, 1), (2, 2), (1, 3), (3, 1)]:
        direct = scan.derive_model(sol, op, scan.ContextShape(*shape))
        np.testing.assert_allclose(family[shape].table, direct.table, atol=1e-11)
        np.testing.assert_allclose(family[shape].ctx_prob, direct.ctx_prob,
                                   atol=1e-12)
    # the empty context reduces to the cell marginal
    p0 = family[(0, 0)].table
    assert p0.shape == (1,)
    obs = scan.observables(w8_model)
    assert p0[0] == pytest.approx((obs["mag"] + 1.0) / 2.0, abs=1e-12)


def test_block2x2_matches_loop_oracle(w8_pair):
    op, sol = w8_pair
    blk = scan.block2x2_prob(sol, op)
    assert blk.shape == (16,)
    assert blk.sum() == pytest.approx(1.0, abs=1e-10)

    col = scan.mid_column(8) - 1
    pp = pair_prob(sol, op)
    bits = (spin_table(8) > 0).astype(int)
    want = np.zeros(16)
    for u in range(op.dim):
        for v in range(op.dim):
            key = (bits[v, col] << 3) | (bits[v, col + 1] << 2) | \
                  (bits[u, col] << 1) | bits[u, col + 1]
            want[key] += pp[u, v]
    np.testing.assert_allclose(blk, want, atol=1e-13)
    np.testing.assert_allclose(blk, scan.block2x2_prob(sol, op, col=col),
                               atol=1e-15)
    with pytest.raises(ValueError):
        scan.block2x2_prob(sol, op, col=7)


def test_unreachable_contexts_are_flagged():
    spec = InteractionSpec(kind="hard-square")
    op = TransferOperator(ModelParams(width=8, cyclic=True), spec=spec)
    sol = dominant_eigenpair(op)
    model = scan.derive_model(sol, op, scan.ContextShape(3, 3))
    assert model.unreachable.any()
    assert np.all(model.table[model.unreachable] == 0.5)
    assert np.all(model.ctx_prob[model.unreachable] == 0.0)


def test_json_roundtrip_is_byte_stable(w8_model):
    text = scan.model_to_json(w8_model)
    again = scan.model_to_json(scan.model_from_json(text))
    assert text == again
    doc = json.loads(text)
    assert doc["bit_order"] == "before-msb-first,then-after-msb-first"
    assert doc["width"] == 8 and doc["before"] == 3 and doc["after"] == 3
    assert len(doc["table"]) == 64


def test_model_from_json_schema_errors(w8_model):
    text = scan.model_to_json(w8_model)
    doc = json.loads(text)

    bad = dict(doc)
    del bad["beta"]
    with pytest.raises((KeyError, ValueError)):
        scan.model_from_json(json.dumps(bad))

    bad = dict(doc)
    bad["extra"] = 1
    with pytest.raises((KeyError, ValueError)):
        scan.model_from_json(json.dumps(bad))

    bad = dict(doc)
    bad["bit_order"] = "after-first"
    with pytest.raises(ValueError):
        scan.model_from_json(json.dumps(bad))

    bad = dict(doc)
    bad["table"] = bad["table"][:-1]
    with pytest.raises(ValueError):
        scan.model_from_json(json.dumps(bad))


def test_model_hash_is_sha256_of_text(w8_model):
    text = scan.model_to_json(w8_model)
    assert scan.model_hash(text) == hashlib.sha256(text.encode("ascii")).hexdigest()
    assert scan.model_hash(text) != scan.model_hash(text + " ")


def test_scan_model_length_validation(w8_model):
    with pytest.raises(ValueError):
        scan.ScanModel(width=8, cyclic=True, beta=1.0, mu=0.0, jh=0.3, jv=0.3,
                       before=3, after=3, table=np.full(32, 0.5),
                       ctx_prob=np.full(64, 1 / 64))


def test_params_property_roundtrip(w8_model):
    p = w8_model.params
    assert isinstance(p, ModelParams)
    assert (p.width, p.cyclic, p.jh, p.jv) == (8, True, 0.3, 0.3)


def test_global_flip_symmetry_at_zero_field(w8_model):
    # complementing every context bit reverses the flat key order
    np.testing.assert_allclose(w8_model.table + w8_model.table[::-1], 1.0,
                               atol=1e-9)


def test_entropy_shrinks_with_context_and_energy_does_not(w8_pair):
    op, sol = w8_pair
    obs = {(b, a): scan.observables(
        scan.derive_model(sol, op, scan.ContextShape(b, a)))
        for b in (1, 2, 3) for a in (1, 2, 3)}
    for b in (1, 2):
        for a in (1, 2, 3):
            assert obs[(b, a)]["H"] >= obs[(b + 1, a)]["H"] - 1e-9
    for b in (1, 2, 3):
        for a in (1, 2):
            assert obs[(b, a)]["H"] >= obs[(b, a + 1)]["H"] - 1e-9

    params = ModelParams(width=13, cyclic=True, beta=1.0, jh=0.2, jv=0.2)
    op13 = TransferOperator(params, representation="implicit")
    sol13 = dominant_eigenpair(op13)
    u_small = scan.observables(
        scan.derive_model(sol13, op13, scan.ContextShape(1, 1)))["U"]
    u_large = scan.observables(
        scan.derive_model(sol13, op13, scan.ContextShape(3, 3)))["U"]
    assert abs(u_small - u_large) <= 1e-6


def test_width_instability_peaks_near_criticality():
    def table(width, j):
        params = ModelParams(width=width, cyclic=True, beta=1.0, jh=j, jv=j)
        op = TransferOperator(params, representation="implicit")
        return scan.derive_model(dominant_eigenpair(op), op,
                                 scan.ContextShape(2, 2)).table

    diff = {j: np.max(np.abs(table(13, j) - table(12, j)))
            for j in (0.1, 0.44)}
    assert diff[0.1] < diff[0.44]
