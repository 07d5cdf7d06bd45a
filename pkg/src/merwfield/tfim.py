"""Classical transverse-chain model over discretized spin angles.

Angles live on the uniform grid alpha_k = 2*pi*k/lat for k = 1..lat,
covering (0, 2*pi].  The bond energy of neighboring angles a, b is

    E(a, b) = -J sin(a) sin(b) - h (cos(a) + cos(b)) / 2

(any temperature is folded into J and h).  The transfer matrix
M = exp(-E) is handed to the lattice eigensolver and the joint
distribution of neighboring angles is psi psi^T o M / lambda.

The sin/cos tables are built in reflection pairs (alpha -> 2*pi -
alpha flips sin, keeps cos), so M is bitwise invariant under the
reflection permutation and bitwise symmetric; the solver symmetrizes
psi over the reflection, making both symmetries of the joint exact in
floating point, not just to rounding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .fileio import open_for_write
from .operator import CapacityError, DenseOperator, dominant_eigenpair

__all__ = ["AngleGrid", "JointAngleDistribution", "tfim_joint",
           "conditional", "sample_chain", "coarse_grain",
           "write_joint_csv", "read_joint_csv"]

LAT_LIMIT = 512


@dataclass(frozen=True)
class AngleGrid:
    """Uniform angle grid with reflection-paired trig tables."""

    lat: int
    alpha: np.ndarray = field(init=False, repr=False)
    sin: np.ndarray = field(init=False, repr=False)
    cos: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lat = self.lat
        if lat < 4:
            raise ValueError("angle grid needs lat >= 4")
        alpha = 2.0 * np.pi * np.arange(1, lat + 1) / lat
        s = np.empty(lat)
        c = np.empty(lat)
        for i in range(lat):
            j = lat - 2 - i
            if i == lat - 1:
                s[i], c[i] = 0.0, 1.0         # alpha = 2*pi
            elif j == i:
                s[i], c[i] = 0.0, -1.0        # alpha = pi (even lat)
            elif j > i:
                s[i], c[i] = np.sin(alpha[i]), np.cos(alpha[i])
            else:
                s[i], c[i] = -s[j], c[j]
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "sin", s)
        object.__setattr__(self, "cos", c)

    @property
    def reflection(self) -> np.ndarray:
        """Index permutation realizing alpha -> 2*pi - alpha."""
        perm = np.concatenate([np.arange(self.lat - 2, -1, -1),
                               [self.lat - 1]])
        return perm


@dataclass
class JointAngleDistribution:
    """Joint of neighboring angles with provenance."""

    J: float
    h: float
    lat: int
    joint: np.ndarray
    lam: float
    grid: AngleGrid = field(repr=False, default=None)


def tfim_joint(J: float, h: float, lat: int = 100) -> JointAngleDistribution:
    if lat > LAT_LIMIT:
        raise CapacityError(f"lat {lat} exceeds the dense limit {LAT_LIMIT}")
    grid = AngleGrid(lat)
    en = (-J * np.outer(grid.sin, grid.sin)
          - h * (grid.cos[:, None] + grid.cos[None, :]) / 2.0)
    m = np.exp(-en)
    if np.ptp(m) == 0.0:
        # constant kernel (J=h=0): rank-one with exact closed-form
        # eigenpair, angles i.i.d. uniform
        return JointAngleDistribution(J=float(J), h=float(h), lat=lat,
                                      joint=np.full((lat, lat), 1.0 / lat**2),
                                      lam=float(m[0, 0]) * lat, grid=grid)
    op = DenseOperator(m, symmetry_perms=[grid.reflection])
    sol = dominant_eigenpair(op)
    joint = np.outer(sol.psi, sol.psi) * m / sol.lam
    joint /= joint.sum()
    return JointAngleDistribution(J=float(J), h=float(h), lat=lat,
                                  joint=joint, lam=sol.lam, grid=grid)


def conditional(dist: JointAngleDistribution) -> np.ndarray:
    """Pr(alpha_(i+1) | alpha_i): rows of the joint, normalized."""
    rows = dist.joint.sum(axis=1, keepdims=True)
    if (rows <= 0).any():
        raise ValueError("joint has an empty row; conditional undefined")
    return dist.joint / rows


def sample_chain(dist: JointAngleDistribution, length: int, seed: int = 0) -> np.ndarray:
    """Sample a chain of angle indices (0-based into the grid)."""
    if length < 1:
        raise ValueError("length must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    marginal_cum = np.cumsum(dist.joint.sum(axis=1))
    cond_cum = np.cumsum(conditional(dist), axis=1)
    out = np.empty(length, np.int64)
    out[0] = np.searchsorted(marginal_cum, rng.random() * marginal_cum[-1])
    for t in range(1, length):
        row = cond_cum[out[t - 1]]
        out[t] = np.searchsorted(row, rng.random() * row[-1])
    return out


def coarse_grain(joint: np.ndarray, factor: int) -> np.ndarray:
    """Re-bin a joint onto a grid coarsened by an integer factor.

    Coarse cells are centered on the coarse grid's own nodes (fine node
    factor*(k+1)-1 for coarse node k), with periodic wrap; when the
    factor is even the two boundary fine nodes sit exactly halfway
    between coarse centers and are split half-half.  Node-centered
    windows keep the fold aligned with the coarse solution, so refined
    grids agree to O(1/lat^2) instead of O(1/lat).
    """
    lat = joint.shape[0]
    if factor < 1:
        raise ValueError("factor must be a positive integer")
    if lat % factor:
        raise ValueError(f"lat {lat} not divisible by factor {factor}")
    k = lat // factor
    w = np.zeros((k, lat))
    half, odd = divmod(factor, 2)
    for i in range(k):
        c = factor * i + factor - 1
        if odd:
            for m in range(c - half, c + half + 1):
                w[i, m % lat] = 1.0
        else:
            for m in range(c - half + 1, c + half):
                w[i, m % lat] = 1.0
            w[i, (c - half) % lat] = 0.5
            w[i, (c + half) % lat] = 0.5
    return w @ joint @ w.T


def write_joint_csv(dist: JointAngleDistribution, path) -> None:
    """Matrix dump, one grid row per line, with a JSON header comment."""
    header = json.dumps({"J": dist.J, "h": dist.h, "lat": dist.lat})
    with open_for_write(path) as fh:
        fh.write(f"# {header}\n")
        for row in dist.joint:
            fh.write(",".join("%.17g" % x for x in row) + "\n")


def read_joint_csv(path) -> JointAngleDistribution:
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError("missing JSON header line")
        meta = json.loads(first[2:])
        rows = [tuple(map(float, line.split(","))) for line in fh if line.strip()]
    joint = np.array(rows)
    lat = int(meta["lat"])
    if joint.shape != (lat, lat):
        raise ValueError(f"matrix shape {joint.shape} does not match lat {lat}")
    return JointAngleDistribution(J=float(meta["J"]), h=float(meta["h"]),
                                  lat=lat, joint=joint, lam=float("nan"),
                                  grid=AngleGrid(lat))