"""Causal scanning models: Pr(? = +1 | b cells before, a cells above).

The '?' cell sits at column mid = ceil(width/2 + 1) - 1 (0-based) of the
current stripe.  Its context is b cells immediately to the left in the
current stripe and a cells in the previous stripe at columns
mid..mid+a-1.  Context keys pack the before bits (left-to-right,
MSB-first) above the after bits (left-to-right, MSB-first):

    key = before_bits * 2^a + after_bits,   bit = (spin + 1) / 2

The model is obtained by marginalizing the stripe-pair distribution
Pr(u,v) onto the context cells; per-node entropy, energy and
magnetization are expectations under the retained joint.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .operator import SpectralSolution, pair_prob
from .patterns import ModelParams

__all__ = [
    "ContextShape",
    "ScanModel",
    "mid_column",
    "derive_model",
    "pair_marginal",
    "observables",
    "reduced_models",
    "block2x2_prob",
    "model_to_json",
    "model_from_json",
    "model_hash",
    "BIT_ORDER",
]

BIT_ORDER = "before-msb-first,then-after-msb-first"


def mid_column(width: int) -> int:
    """0-based column of the '?' cell: ceil(width/2 + 1) - 1."""
    return math.ceil(width / 2 + 1) - 1


@dataclass(frozen=True)
class ContextShape:
    """Context geometry: b cells before (left), a cells after (above)."""

    before: int
    after: int

    def __post_init__(self):
        if self.before < 1 or self.after < 1:
            raise ValueError("context needs before >= 1 and after >= 1")

    def validate(self, width: int) -> int:
        """Check the context fits the stripe; returns the '?' column."""
        mid = mid_column(width)
        if mid >= width:
            raise ValueError(f"width {width} is too small to place the '?' cell")
        if mid - self.before < 0 or mid + self.after - 1 > width - 1:
            max_b = mid
            max_a = width - mid
            raise ValueError(
                f"context (b={self.before}, a={self.after}) does not fit width "
                f"{width}: the largest feasible shape is (b={max_b}, a={max_a})")
        return mid


@dataclass
class ScanModel:
    """Conditional table plus context distribution, with provenance.

    table[k] = Pr(? = +1 | context k); ctx_prob[k] = Pr(context k).
    joint[bk, q, ak] = Pr(before=bk, ?=q, after=ak) is retained so that
    reductions and observables never have to re-touch the operator.
    Contexts that cannot occur (ctx_prob == 0, possible under hard
    constraints) carry p = 0.5 and are marked in `unreachable`.
    """

    width: int
    cyclic: bool
    beta: float
    mu: float
    jh: float
    jv: float
    before: int
    after: int
    table: np.ndarray
    ctx_prob: np.ndarray
    joint: np.ndarray = field(repr=False, default=None)
    unreachable: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        self.table = np.asarray(self.table, float)
        self.ctx_prob = np.asarray(self.ctx_prob, float)
        n = 1 << (self.before + self.after)
        if self.table.shape != (n,) or self.ctx_prob.shape != (n,):
            raise ValueError(f"table and ctx_prob must have length {n}")
        if self.joint is None:
            j = np.stack([self.ctx_prob * (1.0 - self.table),
                          self.ctx_prob * self.table], axis=1)
            self.joint = j.reshape(1 << self.before, 1 << self.after, 2)\
                          .transpose(0, 2, 1).copy()
        if self.unreachable is None:
            self.unreachable = self.ctx_prob <= 0.0

    @property
    def params(self) -> ModelParams:
        return ModelParams(width=self.width, cyclic=self.cyclic, beta=self.beta,
                           mu=self.mu, jh=self.jh, jv=self.jv)


def pair_marginal(sol: SpectralSolution, op, u_cols, v_cols) -> np.ndarray:
    """Marginal of Pr(u,v) onto selected columns of each stripe.

    Returns an array of shape (2^len(u_cols), 2^len(v_cols)) indexed by
    the kept bits of the current stripe u (MSB = first listed column)
    and of the previous stripe v.  Dense operators marginalize the full
    pair array by axis sums; implicit ones never form Pr(u,v), instead
    sweeping column-indicator projections of v through factored matvecs
    and binning psi-weighted results over the kept u bits.
    """
    w = op.width
    u_cols = list(u_cols)
    v_cols = list(v_cols)
    for c in u_cols + v_cols:
        if not 0 <= c < w:
            raise ValueError(f"column {c} outside width {w}")
    nu, nv = len(u_cols), len(v_cols)

    if getattr(op, "representation", "dense") == "dense":
        p = pair_prob(sol, op)
        t = p.reshape((2,) * (2 * w))
        keep = sorted(u_cols) + sorted(w + c for c in v_cols)
        drop = tuple(ax for ax in range(2 * w) if ax not in keep)
        m = t.sum(axis=drop)
        # axis order after the sum is ascending-column; undo any
        # reordering requested by the caller
        order_u = np.argsort(np.argsort(u_cols))
        order_v = np.argsort(np.argsort(v_cols))
        m = m.transpose(*order_u, *(nu + order_v))
        return m.reshape(1 << nu, 1 << nv)

    idx = np.arange(op.dim)
    key_u = np.zeros(op.dim, dtype=np.int64)
    for c in u_cols:
        key_u = (key_u << 1) | ((idx >> (w - 1 - c)) & 1)
    key_v = np.zeros(op.dim, dtype=np.int64)
    for c in v_cols:
        key_v = (key_v << 1) | ((idx >> (w - 1 - c)) & 1)

    psi = sol.psi
    out = np.empty((1 << nu, 1 << nv))
    for vk in range(1 << nv):
        y = op.matvec(np.where(key_v == vk, psi, 0.0)) / sol.lam
        out[:, vk] = np.bincount(key_u, weights=psi * y, minlength=1 << nu)
    return out


def derive_model(sol: SpectralSolution, op, shape: ContextShape) -> ScanModel:
    """Marginalize Pr(u,v) into the (b, a) scanning model."""
    b, a = shape.before, shape.after
    mid = shape.validate(op.width)
    u_cols = list(range(mid - b, mid + 1))          # before cells then '?'
    v_cols = list(range(mid, mid + a))              # cells above, '?' column first
    m = pair_marginal(sol, op, u_cols, v_cols)
    joint = m.reshape(1 << b, 2, 1 << a)

    ctx = joint.sum(axis=1)
    unreachable = ctx <= 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        table = np.where(unreachable, 0.5, joint[:, 1, :] / np.where(unreachable, 1.0, ctx))

    p = op.params
    return ScanModel(width=p.width, cyclic=p.cyclic, beta=p.beta, mu=p.mu,
                     jh=p.jh, jv=p.jv, before=b, after=a,
                     table=table.ravel(), ctx_prob=ctx.ravel(),
                     joint=joint, unreachable=unreachable.ravel())


def _binary_entropy(p: np.ndarray) -> np.ndarray:
    # h(p) in bits with 0*log 0 = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
              + np.where(p < 1, (1 - p) * np.log2(np.where(p < 1, 1 - p, 1.0)), 0.0))
    return h


def observables(model: ScanModel) -> dict:
    """Per-node observables {U, H, mag} of the scanning model.

    H = sum Pr(ctx) h(p_ctx) in bits.  U charges each node with its
    field term and the two bonds it closes while scanning, toward the
    left neighbor (last before cell) and the cell straight above (first
    after cell):  U = E[ -s (mu + jv*s_above + jh*s_left) ].  mag is
    the plain expectation E[2p - 1].
    """
    b, a = model.before, model.after
    if b < 1 or a < 1:
        raise ValueError("energy needs before >= 1 and after >= 1 "
                         "(left and above neighbors must be in context)")
    j = model.joint
    s_left = 2.0 * (np.arange(1 << b) & 1) - 1.0            # LSB of before key
    s_above = 2.0 * (np.arange(1 << a) >> (a - 1)) - 1.0    # MSB of after key
    s_q = np.array([-1.0, 1.0])
    bond = -(s_q[None, :, None]
             * (model.mu + model.jv * s_above[None, None, :]
                + model.jh * s_left[:, None, None]))
    u = float((j * bond).sum())
    h = float((model.ctx_prob * _binary_entropy(model.table)).sum())
    mag = float((model.ctx_prob * (2.0 * model.table - 1.0)).sum())
    return {"U": u, "H": h, "mag": mag}


def reduced_models(model: ScanModel) -> dict:
    """Family of reduced models for every (b', a') <= (b, a).

    Keeps the cells nearest to '?' (the rightmost before cells and the
    leftmost after cells) and marginalizes the retained joint over the
    dropped ones; includes the boundary shapes with b' = 0 or a' = 0.
    """
    b, a = model.before, model.after
    out = {}
    for b2 in range(b + 1):
        for a2 in range(a + 1):
            j = model.joint.reshape(1 << (b - b2), 1 << b2, 2,
                                    1 << a2, 1 << (a - a2))
            j2 = j.sum(axis=(0, 4))
            ctx = j2.sum(axis=1)
            unreachable = ctx <= 0.0
            with np.errstate(invalid="ignore", divide="ignore"):
                table = np.where(unreachable, 0.5,
                                 j2[:, 1, :] / np.where(unreachable, 1.0, ctx))
            out[(b2, a2)] = ScanModel(
                width=model.width, cyclic=model.cyclic, beta=model.beta,
                mu=model.mu, jh=model.jh, jv=model.jv, before=b2, after=a2,
                table=table.ravel(), ctx_prob=ctx.ravel(), joint=j2,
                unreachable=unreachable.ravel())
    return out


def block2x2_prob(sol: SpectralSolution, op, col: int | None = None) -> np.ndarray:
    """MERW probabilities of 2x2 blocks at columns (col, col+1).

    Key packs the previous (upper) stripe's two bits first, then the
    current stripe's, each left-to-right: key = v0 v1 u0 u1 (MSB-first).
    Defaults to the columns just left of the '?' cell.
    """
    w = op.width
    if col is None:
        col = mid_column(w) - 1
    if not 0 <= col < w - 1:
        raise ValueError(f"block columns ({col}, {col + 1}) outside width {w}")
    m = pair_marginal(sol, op, [col, col + 1], [col, col + 1])  # (u bits, v bits)
    return m.T.ravel()


# --- serialization ---------------------------------------------------------

_SCHEMA_KEYS = ("width", "cyclic", "beta", "mu", "jh", "jv",
                "before", "after", "table", "ctx_prob", "bit_order")


def _num(x: float) -> str:
    return "%.17g" % float(x)


def model_to_json(model: ScanModel) -> str:
    """Canonical JSON document (stable key order, 17 significant digits)."""
    arr = lambda v: "[" + ",".join(_num(t) for t in v) + "]"
    return ('{"width":%d,"cyclic":%s,"beta":%s,"mu":%s,"jh":%s,"jv":%s,'
            '"before":%d,"after":%d,"table":%s,"ctx_prob":%s,"bit_order":"%s"}'
            % (model.width, "true" if model.cyclic else "false",
               _num(model.beta), _num(model.mu), _num(model.jh), _num(model.jv),
               model.before, model.after, arr(model.table), arr(model.ctx_prob),
               BIT_ORDER))


def model_from_json(text: str) -> ScanModel:
    doc = json.loads(text)
    if set(doc) != set(_SCHEMA_KEYS):
        missing = set(_SCHEMA_KEYS) - set(doc)
        extra = set(doc) - set(_SCHEMA_KEYS)
        raise ValueError(f"bad model document: missing keys {sorted(missing)}, "
                         f"unexpected keys {sorted(extra)}")
    if doc["bit_order"] != BIT_ORDER:
        raise ValueError(f"unsupported bit_order {doc['bit_order']!r}")
    return ScanModel(width=int(doc["width"]), cyclic=bool(doc["cyclic"]),
                     beta=float(doc["beta"]), mu=float(doc["mu"]),
                     jh=float(doc["jh"]), jv=float(doc["jv"]),
                     before=int(doc["before"]), after=int(doc["after"]),
                     table=np.asarray(doc["table"], float),
                     ctx_prob=np.asarray(doc["ctx_prob"], float))


def model_hash(text: str) -> str:
    """sha256 of the canonical document, used as provenance id."""
    return hashlib.sha256(text.encode("ascii")).hexdigest()
