"""Transfer operator over stripe patterns and its dominant eigenpair.

M_uv = exp(-beta*(E_u/2 + E_uv + E_v/2)).  Because the node energies sit
in a diagonal factor D = diag(exp(-beta*E_u/2)) and the inter-stripe
energy is a sum of per-position bond terms, M = D K D where K is the
w-fold Kronecker power of a single 2x2 column factor.  The implicit
representation applies that factorization directly, giving an
O(w * 2^w) matvec; the dense representation materializes the full
2^w x 2^w array and doubles as the reference oracle at small widths.

Probabilities follow the dominant eigenpair (lambda, psi) with
sum psi^2 = 1:  Pr(u) = psi_u^2 and Pr(u,v) = psi_u (M_uv/lambda) psi_v.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .patterns import InteractionSpec, ModelParams, node_energies

__all__ = [
    "DENSE_LIMIT",
    "IMPLICIT_LIMIT",
    "AUTO_DENSE_MAX",
    "CapacityError",
    "ConvergenceError",
    "ReducibleOperatorError",
    "TransferOperator",
    "DenseOperator",
    "SpectralSolution",
    "dominant_eigenpair",
    "pattern_prob",
    "pair_prob",
]

DENSE_LIMIT = 14
IMPLICIT_LIMIT = 26
AUTO_DENSE_MAX = 12
# largest width whose full pair distribution we are willing to materialize
PAIR_DENSE_LIMIT = 13


class CapacityError(ValueError):
    """Requested width exceeds the representation's memory budget."""


class ConvergenceError(RuntimeError):
    """Eigensolver failed to reach the requested residual."""


class ReducibleOperatorError(RuntimeError):
    """Nonzero structure of the operator is disconnected."""


class TransferOperator:
    """Boltzmann transition matrix over width-w stripe patterns.

    representation: "dense", "implicit" or "auto" (dense up to width
    12, implicit beyond).  Dense is limited to width 14 (a width-15
    array would need 8 GiB), implicit to width 26.
    """

    def __init__(self, params: ModelParams, spec: InteractionSpec | None = None,
                 representation: str = "auto"):
        self.params = params
        self.spec = spec or InteractionSpec.ising()
        w = params.width
        if representation == "auto":
            representation = "dense" if w <= AUTO_DENSE_MAX else "implicit"
        if representation not in ("dense", "implicit"):
            raise ValueError(f"unknown representation {representation!r}")
        if representation == "dense" and w > DENSE_LIMIT:
            need = 8.0 * 4.0 ** w / 2 ** 30
            raise CapacityError(
                f"dense operator at width {w} needs {need:.0f} GiB; "
                f"dense limit is width {DENSE_LIMIT}")
        if w > IMPLICIT_LIMIT:
            need = 8.0 * 2.0 ** w / 2 ** 30
            raise CapacityError(
                f"width {w} needs {need:.0f} GiB per vector; "
                f"implicit limit is width {IMPLICIT_LIMIT}")
        self.representation = representation

        e = node_energies(params, self.spec)
        _, _, bv = self.spec.tables(params)
        # exp(-inf) underflows to exactly 0, which is the intended
        # encoding of forbidden patterns/bonds
        self.d = np.exp(-0.5 * params.beta * e)
        self.f = np.exp(-params.beta * bv)
        self._m = self._build_dense() if representation == "dense" else None

    @property
    def dim(self) -> int:
        return self.d.size

    @property
    def width(self) -> int:
        return self.params.width

    @property
    def has_zero_entries(self) -> bool:
        return bool((self.d == 0).any() or (self.f == 0).any())

    @property
    def symmetry_perms(self) -> list:
        """Index permutations that commute with M (used to stabilize psi).

        The Ising energies at mu=0 are invariant under a global spin
        flip, which is index complement, i.e. reversed pattern order.
        """
        if self.spec.kind == "ising" and self.params.mu == 0:
            return [np.arange(self.dim)[::-1]]
        return []

    def _build_dense(self) -> np.ndarray:
        k = functools.reduce(np.kron, [self.f] * self.width)
        k *= self.d[:, None]
        k *= self.d[None, :]
        return k

    def toarray(self) -> np.ndarray:
        """Dense M (building it on demand for implicit operators)."""
        if self._m is not None:
            return self._m
        if self.width > DENSE_LIMIT:
            raise CapacityError(
                f"cannot materialize width {self.width} densely (limit {DENSE_LIMIT})")
        return self._build_dense()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """M @ x.  Reductions run in a fixed order, so results are
        reproducible bit-for-bit for a given build."""
        if self._m is not None:
            return self._m @ x
        y = self.d * x
        for _ in range(self.width):
            y = (self.f @ y.reshape(2, -1)).T.ravel()
        return self.d * y

    def entries(self, u, v) -> np.ndarray:
        """M_uv for index arrays u, v, computed from the factors.

        Works identically for both representations; dense arrays are
        probed the same way so the two can be cross-checked.
        """
        u = np.asarray(u)
        v = np.asarray(v)
        w = self.width
        out = self.d[u] * self.d[v]
        for p in range(w):
            shift = w - 1 - p
            out = out * self.f[(u >> shift) & 1, (v >> shift) & 1]
        return out


class DenseOperator:
    """Adapter exposing a plain nonnegative matrix to the eigensolver."""

    def __init__(self, m: np.ndarray, symmetry_perms: list | None = None):
        m = np.asarray(m, float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("need a square matrix")
        if (m < 0).any():
            raise ValueError("matrix must be entrywise nonnegative")
        self._m = m
        self.symmetry_perms = symmetry_perms or []

    @property
    def dim(self) -> int:
        return self._m.shape[0]

    @property
    def has_zero_entries(self) -> bool:
        return bool((self._m == 0).any())

    def toarray(self) -> np.ndarray:
        return self._m

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._m @ x


@dataclass
class SpectralSolution:
    """Dominant eigenpair with sum(psi^2) = 1 and psi >= 0 entrywise."""

    lam: float
    psi: np.ndarray
    iterations: int
    residual: float


def _symmetrize(x: np.ndarray, perms: list) -> np.ndarray:
    for p in perms:
        x = 0.5 * (x + x[p])
    n = np.linalg.norm(x)
    return x / n if n > 0 else x


def _check_irreducible(op) -> None:
    """Reachability over the nonzero structure from one live pattern.

    Only meaningful (and only run) when the operator has exact zero
    entries; isolated forbidden patterns (zero node weight) are fine,
    a disconnected graph over the live patterns is not.
    """
    d = getattr(op, "d", None)
    alive = d > 0 if d is not None else np.ones(op.dim, bool)
    if not alive.any():
        raise ReducibleOperatorError("every pattern is forbidden")
    reach = np.zeros(op.dim, bool)
    reach[int(np.argmax(alive))] = True
    for _ in range(op.dim):
        grown = reach | (op.matvec(reach.astype(float)) > 0)
        if (grown == reach).all():
            break
        reach = grown
    if not reach[alive].all():
        raise ReducibleOperatorError(
            "pattern graph is disconnected; the dominant eigenpair is not unique")


def dominant_eigenpair(op, tol: float = 1e-13, max_iter: int = 100000,
                       accelerate: bool = True) -> SpectralSolution:
    """Dominant eigenpair of a nonnegative operator.

    Power iteration from the uniform vector is the base method (it is
    exact after one step for the rank-one J=0 operator and converges to
    the Perron pair for primitive nonnegative matrices); when it has
    not converged an ARPACK accelerator is tried, and the result is
    always verified against `tol`, polished by further (shifted) power
    steps if necessary.  Known symmetry permutations of the operator
    are re-applied after every step, which keeps psi exactly symmetric
    even in quasi-degenerate regimes.

    Raises ConvergenceError when the residual cannot be brought below
    tol within max_iter matvecs, ReducibleOperatorError when the
    nonzero structure is disconnected.
    """
    n = op.dim
    perms = getattr(op, "symmetry_perms", [])
    if op.has_zero_entries and n <= (1 << DENSE_LIMIT):
        _check_irreducible(op)

    matvecs = 0

    def mv(v):
        nonlocal matvecs
        matvecs += 1
        return op.matvec(v)

    x = np.full(n, 1.0 / np.sqrt(n))
    for _ in range(2):
        y = mv(x)
        ny = np.linalg.norm(y)
        if ny == 0:
            raise ReducibleOperatorError("operator annihilates the uniform vector")
        x = _symmetrize(y / ny, perms)

    y = mv(x)
    lam = float(x @ y)
    res = np.linalg.norm(y - lam * x) / lam if lam > 0 else np.inf

    if res > tol and accelerate and n >= 8:
        from scipy.sparse.linalg import ArpackError, LinearOperator, eigsh

        try:
            lo = LinearOperator((n, n), matvec=mv, dtype=float)
            vals, vecs = eigsh(lo, k=1, which="LA", v0=x, tol=0,
                               maxiter=min(max_iter, 100 * n))
            cand = vecs[:, 0]
            if cand.sum() < 0:
                cand = -cand
            cand = _symmetrize(cand, perms)
            yc = mv(cand)
            lamc = float(cand @ yc)
            resc = np.linalg.norm(yc - lamc * cand) / lamc if lamc > 0 else np.inf
            if resc < res:
                x, y, lam, res = cand, yc, lamc, resc
        except ArpackError:
            pass

    while res > tol and matvecs < max_iter:
        # small positive shift keeps the iteration primitive even for
        # operators with a bipartite-like zero pattern
        z = y + (0.1 * lam) * x
        x = _symmetrize(z / np.linalg.norm(z), perms)
        y = mv(x)
        lam = float(x @ y)
        res = np.linalg.norm(y - lam * x) / lam if lam > 0 else np.inf

    if not np.isfinite(lam) or lam <= 0:
        raise ConvergenceError(f"no positive eigenvalue found (lambda={lam!r})")
    if res > tol:
        raise ConvergenceError(
            f"eigensolver did not reach tol={tol:g} after {matvecs} matvecs; "
            f"last residual {res:.3e}")

    if x.sum() < 0:
        x = -x
    neg = x < 0
    if neg.any():
        worst = float(-x[neg].min())
        if worst > np.sqrt(tol):
            raise ConvergenceError(
                f"eigenvector has a significant negative entry ({-worst:.3e}); "
                "operator may be reducible or degenerate")
        x = np.where(neg, 0.0, x)
        x /= np.linalg.norm(x)
        y = mv(x)
        lam = float(x @ y)
        res = np.linalg.norm(y - lam * x) / lam

    return SpectralSolution(lam=lam, psi=x, iterations=matvecs, residual=float(res))


def pattern_prob(sol: SpectralSolution) -> np.ndarray:
    """Pr(u) = psi_u^2."""
    return sol.psi ** 2


def pair_prob(sol: SpectralSolution, op) -> np.ndarray:
    """Dense Pr(u,v) = psi_u (M_uv/lambda) psi_v over adjacent stripes.

    Materializes a 2^w x 2^w array, so it is limited to small widths;
    larger widths must go through projected marginals instead.
    """
    w = getattr(op, "width", None)
    if w is not None and w > PAIR_DENSE_LIMIT:
        need = 8.0 * 4.0 ** w / 2 ** 30
        raise CapacityError(
            f"dense pair distribution at width {w} needs {need:.0f} GiB; "
            f"limit is width {PAIR_DENSE_LIMIT}")
    p = sol.psi[:, None] * op.toarray()
    p *= sol.psi[None, :]
    p /= sol.lam
    return p
