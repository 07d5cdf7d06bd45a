"""Boltzmann path ensembles over layered circuits of nonnegative gates.

A LayeredEnsemble assigns weight

    w(g) = psiL[g_1] * M1[g_1, g_2] * ... * M(l-1)[g_(l-1), g_l] * psiR[g_l]

to each state sequence g, normalized over all sequences.  Transition
matrices are stored action-side, shape (next_dim, prev_dim), so layers
compose like functions; a 1-D transition is shorthand for a diagonal
matrix.  Forward-backward products with per-layer renormalization (log
accumulators for the scale) give exact marginals without enumeration
and survive depths of order 10^3 without underflow.

Also hosts the stripe-sequence probabilities of the homogeneous lattice
operator (sequence_prob, projected_prob) and the demonstration
constructions built on the ensemble machinery: the Mermin three-party
probabilities and the 3-SAT filter.
"""

from __future__ import annotations

import functools
import json
import math

import numpy as np

from .operator import SpectralSolution
from .scan import mid_column

__all__ = [
    "EmptyEnsembleError",
    "GATE_KINDS",
    "gate_matrix",
    "layer_matrix",
    "LayeredEnsemble",
    "ensemble_distribution",
    "event_prob",
    "circuit_from_json",
    "mermin_pair_prob",
    "mermin_summary",
    "parse_dimacs",
    "clause_indicator",
    "sat3_ensemble",
    "sat3_posterior",
    "sequence_prob",
    "projected_prob",
    "vertical_context_model",
]


class EmptyEnsembleError(RuntimeError):
    """Every sequence has zero weight (over-constrained ensemble)."""


GATE_KINDS = ("X", "NOT", "SPLIT", "OR3", "CONTROLLED", "WIRE", "CUSTOM")

_X = np.array([[1.0, 1.0], [1.0, 1.0]])
_NOT = np.array([[0.0, 1.0], [1.0, 0.0]])
# SPLIT as printed: 2-in/1-out collapse keeping only equal inputs; the
# transpose is the 1-in/2-out exact copy.  Orientation is declared per
# circuit through the (inputs, outputs) arities.
_SPLIT = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]])
_OR3 = np.array([[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                 [0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]])


def gate_matrix(kind: str, inputs: int = 1, outputs: int = 1,
                weight: float | None = None, gate: np.ndarray | None = None,
                matrix=None) -> np.ndarray:
    """Gate as a (2^outputs, 2^inputs) nonnegative matrix.

    WIRE takes an optional ferromagnetic weight j (None means an exact
    copy, the j -> inf limit); CONTROLLED wraps another gate's matrix
    with an identity branch, control bit most significant; CUSTOM takes
    the matrix explicitly.
    """
    if kind not in GATE_KINDS:
        raise ValueError(f"unknown gate kind {kind!r}")
    shape = (1 << outputs, 1 << inputs)

    if kind == "X":
        m = _X
    elif kind == "NOT":
        m = _NOT
    elif kind == "SPLIT":
        if (inputs, outputs) == (2, 1):
            m = _SPLIT
        elif (inputs, outputs) == (1, 2):
            m = _SPLIT.T
        else:
            raise ValueError("SPLIT is 2-in/1-out or 1-in/2-out")
    elif kind == "OR3":
        if (inputs, outputs) != (3, 1):
            raise ValueError("OR3 is 3-in/1-out")
        m = _OR3
    elif kind == "WIRE":
        if weight is None:
            m = np.eye(2)
        else:
            j = float(weight)
            m = np.array([[math.exp(j), math.exp(-j)],
                          [math.exp(-j), math.exp(j)]])
    elif kind == "CONTROLLED":
        if gate is None:
            raise ValueError("CONTROLLED needs the wrapped gate's matrix")
        g = np.asarray(gate, float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("CONTROLLED wraps a square gate")
        m = np.zeros((2 * g.shape[0], 2 * g.shape[0]))
        m[:g.shape[0], :g.shape[0]] = np.eye(g.shape[0])
        m[g.shape[0]:, g.shape[0]:] = g
    else:
        if matrix is None:
            raise ValueError("CUSTOM needs an explicit matrix")
        m = np.asarray(matrix, float)

    if m.shape != shape:
        raise ValueError(f"{kind} with {inputs} input and {outputs} output bits "
                         f"needs shape {shape}, got {m.shape}")
    if (m < 0).any():
        raise ValueError("gate entries must be nonnegative")
    return m


def layer_matrix(gates) -> np.ndarray:
    """Tensor placement of gates side by side, first gate on the most
    significant bits."""
    mats = list(gates)
    if not mats:
        raise ValueError("a layer needs at least one gate")
    return functools.reduce(np.kron, mats)


class LayeredEnsemble:
    """Path ensemble over a chain of layers."""

    def __init__(self, psi_left, psi_right, transitions=()):
        self.psi_left = self._boundary(psi_left, "psiL")
        self.psi_right = self._boundary(psi_right, "psiR")
        self.transitions = []
        dim = self.psi_left.size
        self.dims = [dim]
        for i, m in enumerate(transitions):
            m = np.asarray(m, float)
            if (m < 0).any():
                raise ValueError(f"transition {i} has negative entries")
            if m.ndim == 1:
                if m.size != dim:
                    raise ValueError(f"diagonal transition {i} has size {m.size}, "
                                     f"layer has {dim}")
            elif m.ndim == 2:
                if m.shape[1] != dim:
                    raise ValueError(f"transition {i} expects input dim {m.shape[1]}, "
                                     f"layer has {dim}")
                dim = m.shape[0]
            else:
                raise ValueError("transitions must be 1-D (diagonal) or 2-D")
            self.transitions.append(m)
            self.dims.append(dim)
        if dim != self.psi_right.size:
            raise ValueError(f"psiR has dim {self.psi_right.size}, "
                             f"final layer has {dim}")

    @staticmethod
    def _boundary(v, name):
        v = np.asarray(v, float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError(f"{name} must be a nonempty vector")
        if (v < 0).any():
            raise ValueError(f"{name} must be entrywise nonnegative")
        norm = np.sqrt((v * v).sum())
        if norm == 0:
            raise ValueError(f"{name} is the zero vector")
        return v / norm

    def __len__(self):
        return len(self.dims)

    @staticmethod
    def _step(m, v, forward):
        if m.ndim == 1:
            return m * v
        return m @ v if forward else m.T @ v

    def _sweep(self, start, mats, forward):
        """Normalized partial products with a log of the total scale."""
        vecs = [start]
        log_scale = 0.0
        v = start
        for m in mats:
            v = self._step(m, v, forward)
            s = v.sum()
            if s <= 0:
                raise EmptyEnsembleError("ensemble weight vanished; "
                                         "constraints admit no sequence")
            v = v / s
            log_scale += math.log(s)
            vecs.append(v)
        return vecs, log_scale

    def forward(self):
        return self._sweep(self.psi_left, self.transitions, True)

    def backward(self):
        vecs, log_scale = self._sweep(self.psi_right, self.transitions[::-1], False)
        return vecs[::-1], log_scale

    def log_weight(self) -> float:
        """log of the total (unnormalized) ensemble weight."""
        f, log_f = self.forward()
        z = float(f[-1] @ self.psi_right)
        if z <= 0:
            raise EmptyEnsembleError("ensemble weight vanished; "
                                     "constraints admit no sequence")
        return log_f + math.log(z)

    def marginal(self, layer: int) -> np.ndarray:
        """Exact distribution of the state at one layer."""
        n = len(self.dims)
        if not -n <= layer < n:
            raise IndexError(f"layer {layer} out of range for {n} layers")
        layer %= n
        f, _ = self.forward()
        b, _ = self.backward()
        m = f[layer] * b[layer]
        s = m.sum()
        if s <= 0:
            raise EmptyEnsembleError("ensemble weight vanished; "
                                     "constraints admit no sequence")
        return m / s


def ensemble_distribution(e: LayeredEnsemble, layer: int = -1) -> np.ndarray:
    return e.marginal(layer)


def event_prob(e: LayeredEnsemble, layer: int, indices) -> float:
    """Probability that the layer's state lies in the index set."""
    return float(e.marginal(layer)[np.asarray(indices, int)].sum())


def circuit_from_json(text: str) -> LayeredEnsemble:
    """Build an ensemble from a circuit document.

    Schema: {"layers": [{"gates": [{"kind", "inputs", "outputs", ...}]}],
    "psiL": [...], "psiR": [...]}.  Gate extras: "weight" for WIRE,
    "matrix" for CUSTOM, "gate" (a nested gate object) for CONTROLLED.
    """
    doc = json.loads(text)
    if set(doc) != {"layers", "psiL", "psiR"}:
        raise ValueError('circuit document needs exactly the keys '
                         '"layers", "psiL", "psiR"')

    def build_gate(g):
        extra = set(g) - {"kind", "inputs", "outputs", "weight", "matrix", "gate"}
        if extra:
            raise ValueError(f"unknown gate fields {sorted(extra)}")
        wrapped = None
        if g.get("gate") is not None:
            wrapped = build_gate(g["gate"])
        return gate_matrix(g.get("kind", ""), int(g.get("inputs", 1)),
                           int(g.get("outputs", 1)), weight=g.get("weight"),
                           gate=wrapped, matrix=g.get("matrix"))

    transitions = []
    for entry in doc["layers"]:
        if set(entry) != {"gates"}:
            raise ValueError('each layer is an object with a "gates" list')
        transitions.append(layer_matrix(build_gate(g) for g in entry["gates"]))
    return LayeredEnsemble(doc["psiL"], doc["psiR"], transitions)


# --- Mermin three-party construction ---------------------------------------

# bit positions: A is the most significant bit, C the least; the pair
# names the measured bits, the remaining one gets mixed
_MERMIN_PAIRS = {"AB": 0, "AC": 1, "BC": 2}


def _mermin_boundary() -> np.ndarray:
    psi = np.ones(8)
    psi[0] = psi[7] = 0.0
    return psi / np.sqrt(6.0)


def mermin_pair_prob(pair: str) -> float:
    """Pr(the two named bits agree) in the three-bit ensemble with
    psi_000 = psi_111 = 0 and the remaining amplitudes equal, the third
    bit mixed by an X gate."""
    if pair not in _MERMIN_PAIRS:
        raise ValueError(f"pair must be one of {sorted(_MERMIN_PAIRS)}")
    mixed = _MERMIN_PAIRS[pair]
    gates = [gate_matrix("X") if p == mixed else gate_matrix("WIRE")
             for p in (2, 1, 0)]
    psi = _mermin_boundary()
    ens = LayeredEnsemble(psi, psi, [layer_matrix(gates)])
    keep = [p for p in (2, 1, 0) if p != mixed]
    idx = np.arange(8)
    agree = np.nonzero(((idx >> keep[0]) & 1) == ((idx >> keep[1]) & 1))[0]
    return event_prob(ens, 0, agree)


def mermin_summary() -> dict:
    probs = {pair: mermin_pair_prob(pair) for pair in ("AB", "AC", "BC")}
    total = sum(probs.values())
    return {**probs, "sum": total, "violated": total < 1.0}


# --- 3-SAT filter -----------------------------------------------------------

def parse_dimacs(text: str):
    """DIMACS CNF restricted to exactly 3 literals per clause.

    Returns (num_vars, clauses) with clauses as tuples of signed ints.
    """
    num_vars = None
    num_clauses = None
    lits = []
    clauses = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"bad problem line: {raw!r}")
            num_vars, num_clauses = int(parts[2]), int(parts[3])
            continue
        if num_vars is None:
            raise ValueError("clause data before the problem line")
        for tok in line.split():
            v = int(tok)
            if v == 0:
                if len(lits) != 3:
                    raise ValueError(f"clause {clauses + [lits]} does not have "
                                     "exactly 3 literals")
                clauses.append(tuple(lits))
                lits = []
            else:
                if not 1 <= abs(v) <= num_vars:
                    raise ValueError(f"literal {v} outside 1..{num_vars}")
                lits.append(v)
    if lits:
        raise ValueError("unterminated clause (missing trailing 0)")
    if num_vars is None:
        raise ValueError("missing problem line")
    if num_clauses is not None and len(clauses) != num_clauses:
        raise ValueError(f"problem line promises {num_clauses} clauses, "
                         f"found {len(clauses)}")
    return num_vars, clauses


def clause_indicator(num_vars: int, clause) -> np.ndarray:
    """0/1 vector over assignments; 1 where the clause is satisfied.

    Variable 1 occupies the most significant bit of the assignment
    index; a positive literal is satisfied by bit 1.
    """
    idx = np.arange(1 << num_vars)
    ok = np.zeros(idx.size, bool)
    for lit in clause:
        bit = (idx >> (num_vars - abs(lit))) & 1
        ok |= (bit == 1) if lit > 0 else (bit == 0)
    return ok.astype(float)


def sat3_ensemble(num_vars: int, clauses) -> LayeredEnsemble:
    """Mixing layer into the assignment layer, then one clause filter
    per clause.

    Equivalent to fanning each variable out through exact-copy wires
    into per-clause OR3 gates with outputs clamped to 1: marginalizing
    the clamped gadget leaves a diagonal clause indicator on the
    assignment layer.
    """
    if not 1 <= num_vars <= 20:
        raise ValueError("solver enumerates assignments; num_vars must be in 1..20")
    n = 1 << num_vars
    uniform = np.full(n, 1.0 / np.sqrt(n))
    mixing = layer_matrix([gate_matrix("X")] * num_vars)
    transitions = [mixing] + [clause_indicator(num_vars, c) for c in clauses]
    return LayeredEnsemble(uniform, uniform, transitions)


def sat3_posterior(num_vars: int, clauses):
    """Posterior over assignments given all clauses, plus the model
    count.  The ensemble's total weight equals the number of satisfying
    assignments exactly, so the count is exp(log_weight) rounded."""
    ens = sat3_ensemble(num_vars, clauses)
    posterior = ens.marginal(1)
    count = int(round(math.exp(ens.log_weight())))
    return posterior, count


# --- stripe-sequence probabilities ------------------------------------------

def projected_prob(sol: SpectralSolution, op, projections) -> float:
    """Pr of a run of per-stripe constraints under the stationary walk:

        psi^T P_1 (M/lam) P_2 (M/lam) ... P_l psi

    Each projection is a diagonal 0/1 matrix, given either as a 1-D
    diagonal or a full 2-D diagonal matrix.
    """
    mats = []
    for i, p in enumerate(projections):
        p = np.asarray(p, float)
        if p.ndim == 2:
            if np.count_nonzero(p - np.diag(np.diagonal(p))):
                raise ValueError(f"projection {i} is not diagonal")
            p = np.diagonal(p).copy()
        if p.ndim != 1 or p.size != op.dim:
            raise ValueError(f"projection {i} must have length {op.dim}")
        if not np.isin(p, (0.0, 1.0)).all():
            raise ValueError(f"projection {i} has entries outside {{0, 1}}")
        mats.append(p)
    if not mats:
        raise ValueError("need at least one projection")

    v = mats[-1] * sol.psi
    for p in mats[-2::-1]:
        v = p * (op.matvec(v) / sol.lam)
    return float(sol.psi @ v)


def sequence_prob(sol: SpectralSolution, op, fixed) -> float:
    """Pr of a stripe sequence with some positions pinned.

    fixed is a list over positions; each entry is a pattern index or
    None for an unconstrained position.
    """
    n = op.dim
    projections = []
    for u in fixed:
        if u is None:
            projections.append(np.ones(n))
        else:
            u = int(u)
            if not 0 <= u < n:
                raise ValueError(f"pattern {u} outside [0, {n})")
            p = np.zeros(n)
            p[u] = 1.0
            projections.append(p)
    return projected_prob(sol, op, projections)


def vertical_context_model(sol: SpectralSolution, op, before: int, after: int,
                           col: int | None = None) -> np.ndarray:
    """Scanning table derived the expensive way, from runs of stripes.

    The context is rotated a quarter turn relative to the scanning
    model: b cells directly above the '?' cell in its own column, and a
    cells in the previous column starting beside '?' and going down.
    Probabilities come from projected stripe runs of length b + a, so
    the cost scales with 2^(b+a+1) matvecs.  Agreement with the scan
    table is approximate: the two contexts truncate the lattice
    differently.
    """
    w = op.width
    if col is None:
        col = mid_column(w)
    if not 1 <= col < w:
        raise ValueError(f"need a column in 1..{w - 1} (the previous column "
                         "must exist)")
    if before < 1 or after < 1:
        raise ValueError("context needs before >= 1 and after >= 1")

    idx = np.arange(op.dim)
    bit_q = (idx >> (w - 1 - col)) & 1
    bit_p = (idx >> (w - 1 - (col - 1))) & 1

    def stripe_mask(q=None, p=None):
        m = np.ones(op.dim)
        if q is not None:
            m = m * (bit_q == q)
        if p is not None:
            m = m * (bit_p == p)
        return m

    table = np.empty(1 << (before + after))
    for key in range(1 << (before + after)):
        bits = [(key >> (before + after - 1 - i)) & 1
                for i in range(before + after)]
        bvals, avals = bits[:before], bits[before:]
        joint = []
        for q in (0, 1):
            runs = [stripe_mask(q=bb) for bb in bvals]
            runs.append(stripe_mask(q=q, p=avals[0]))
            runs.extend(stripe_mask(p=aa) for aa in avals[1:])
            joint.append(projected_prob(sol, op, runs))
        total = joint[0] + joint[1]
        table[key] = 0.5 if total <= 0 else joint[1] / total
    return table
