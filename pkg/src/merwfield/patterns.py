"""Stripe pattern space: bit encoding of +-1 spin stripes and energy tables.

A width-w stripe is an element of {-1,+1}^w encoded as an integer index
in [0, 2^w).  The spin at position p (p = 0 is the leftmost cell) is
2*bit(index, w-1-p) - 1: the most significant bit is the leftmost cell
and bit value 1 means spin +1.

Energies may be +inf, which marks a configuration forbidden and maps to
an exactly zero transfer-matrix entry downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelParams",
    "InteractionSpec",
    "spin_table",
    "decode",
    "encode",
    "flip_index",
    "node_energies",
    "pattern_energy",
    "interaction_energy",
]


@dataclass(frozen=True)
class ModelParams:
    """Couplings and geometry of the stripe decomposition.

    beta is the inverse temperature, mu the external field, jh the
    intra-stripe (horizontal) coupling, jv the inter-stripe (vertical)
    coupling.  cyclic closes the stripe into a ring.  With width == 2
    and cyclic the wrap bond coincides with the single interior bond,
    doubling that coupling; this mirrors the row-wrap convention and is
    documented behavior, not a bug to fix.
    """

    width: int
    cyclic: bool = False
    beta: float = 1.0
    mu: float = 0.0
    jh: float = 1.0
    jv: float = 1.0

    def __post_init__(self):
        if int(self.width) != self.width or self.width < 1:
            raise ValueError("width must be a positive integer")
        if not (self.beta > 0 and np.isfinite(self.beta)):
            raise ValueError("beta must be positive and finite")
        for name in ("mu", "jh", "jv"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def size(self) -> int:
        """Number of stripe patterns, 2**width."""
        return 1 << self.width


@dataclass(frozen=True)
class InteractionSpec:
    """Node and bond energies tabulated over the two-letter alphabet.

    Tables are indexed by bit value: 0 for spin -1, 1 for spin +1.
    `node` has length 2 (per-site energy), `bond_h` and `bond_v` are
    2x2 (intra-stripe and inter-stripe bond energies).  Entries are
    finite reals or exactly +inf (forbidden).

    For kind "ising" the tables are derived from ModelParams
    (node -mu*s, bonds -j*s1*s2); for "hard-square" two adjacent +1
    cells are forbidden and all allowed configurations have energy 0,
    so the ensemble is uniform regardless of beta.
    """

    kind: str = "ising"
    node: tuple | None = None
    bond_h: tuple | None = None
    bond_v: tuple | None = None

    KINDS = ("ising", "hard-square", "custom")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown interaction kind {self.kind!r}")
        if self.kind == "custom":
            if self.node is None or self.bond_h is None or self.bond_v is None:
                raise ValueError("custom spec needs node, bond_h and bond_v tables")

    @staticmethod
    def ising() -> "InteractionSpec":
        return InteractionSpec("ising")

    @staticmethod
    def hard_square() -> "InteractionSpec":
        return InteractionSpec("hard-square")

    @staticmethod
    def custom(node, bond_h, bond_v) -> "InteractionSpec":
        def tup(a, shape):
            a = np.asarray(a, float)
            if a.shape != shape:
                raise ValueError(f"expected table of shape {shape}, got {a.shape}")
            if np.isnan(a).any() or (a == -np.inf).any():
                raise ValueError("energies must be finite or +inf")
            return tuple(a.ravel().tolist())

        return InteractionSpec("custom", tup(node, (2,)), tup(bond_h, (2, 2)), tup(bond_v, (2, 2)))

    def tables(self, params: ModelParams):
        """Resolve to (node, bond_h, bond_v) numpy arrays for given params."""
        s = np.array([-1.0, 1.0])
        if self.kind == "ising":
            node = -params.mu * s
            bh = -params.jh * np.outer(s, s)
            bv = -params.jv * np.outer(s, s)
        elif self.kind == "hard-square":
            node = np.zeros(2)
            bh = np.zeros((2, 2))
            bh[1, 1] = np.inf
            bv = np.zeros((2, 2))
            bv[1, 1] = np.inf
        else:
            node = np.array(self.node, float)
            bh = np.array(self.bond_h, float).reshape(2, 2)
            bv = np.array(self.bond_v, float).reshape(2, 2)
        return node, bh, bv


def spin_table(width: int) -> np.ndarray:
    """All 2^width stripes as rows of -1/+1 (int8), MSB-first."""
    idx = np.arange(1 << width)
    bits = (idx[:, None] >> np.arange(width - 1, -1, -1)) & 1
    return (2 * bits - 1).astype(np.int8)

def decode(index: int, width: int) -> np.ndarray:
    """Spins (+-1) of one pattern index, leftmost cell first."""
    if not 0 <= index < (1 << width):
        raise ValueError(f"index {index} out of range for width {width}")
    bits = (index >> np.arange(width - 1, -1, -1)) & 1
    return (2 * bits - 1).astype(np.int8)

def encode(spins) -> int:
    """Inverse of decode."""
    spins = np.asarray(spins)
    if not np.isin(spins, (-1, 1)).all():
        raise ValueError("spins must be -1 or +1")
    bits = (spins > 0).astype(int)
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out

def flip_index(index: int, width: int) -> int:
    """Pattern index after a global spin flip (bitwise complement)."""
    return ((1 << width) - 1) - index


def node_energies(params: ModelParams, spec: InteractionSpec | None = None) -> np.ndarray:
    """Vector of E_u over every stripe pattern (inf where forbidden).

    E_u = sum_p node[u_p] + sum over intra-stripe bonds of bond_h, with
    the wrap bond added when cyclic (width >= 2; a single cell has no
    neighbor to wrap to).
    """
    spec = spec or InteractionSpec.ising()
    node, bh, _ = spec.tables(params)
    w = params.width
    idx = np.arange(1 << w)
    prev = (idx >> (w - 1)) & 1
    first = prev
    e = node[prev].astype(float)
    for p in range(1, w):
        b = (idx >> (w - 1 - p)) & 1
        e += node[b] + bh[prev, b]
        prev = b
    if params.cyclic and w >= 2:
        e = e + bh[prev, first]
    return e


def pattern_energy(index: int, params: ModelParams, spec: InteractionSpec | None = None) -> float:
    """E_u of one pattern; +inf iff a forbidden sub-configuration occurs."""
    spec = spec or InteractionSpec.ising()
    node, bh, _ = spec.tables(params)
    w = params.width
    b = (index >> np.arange(w - 1, -1, -1)) & 1
    e = float(node[b].sum())
    for p in range(w - 1):
        e += bh[b[p], b[p + 1]]
    if params.cyclic and w >= 2:
        e += bh[b[w - 1], b[0]]
    return float(e)


def interaction_energy(u: int, v: int, params: ModelParams, spec: InteractionSpec | None = None) -> float:
    """E_uv between two vertically adjacent stripes (positionwise bonds)."""
    spec = spec or InteractionSpec.ising()
    _, _, bv = spec.tables(params)
    w = params.width
    shifts = np.arange(w - 1, -1, -1)
    bu = (u >> shifts) & 1
    bw = (v >> shifts) & 1
    return float(bv[bu, bw].sum())
