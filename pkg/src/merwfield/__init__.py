"""Nearly exact 2D lattice models via entropy-maximizing random walks.

Core pipeline: a stripe transfer operator (patterns, operator), its
dominant eigenpair, marginalization into causal scanning models (scan),
field generation from those models (sampler), and exact/stochastic
cross-checks (onsager, mc).  Side constructions: discretized-angle
chains (tfim) and layered path ensembles with gates (ensemble).  The
service module wraps everything in an HTTP app; cli is its thin client.
"""

from .ensemble import (EmptyEnsembleError, LayeredEnsemble, circuit_from_json,
                       ensemble_distribution, gate_matrix, mermin_summary,
                       parse_dimacs, projected_prob, sat3_posterior,
                       sequence_prob)
from .onsager import ExactUH, OracleMismatch, critical_coupling, exact_uh
from .operator import (CapacityError, ConvergenceError, DenseOperator,
                       ReducibleOperatorError, SpectralSolution,
                       TransferOperator, dominant_eigenpair, pair_prob,
                       pattern_prob)
from .patterns import InteractionSpec, ModelParams
from .sampler import (empirical_pattern_distribution, read_pbm, sample_field,
                      total_variation, write_pbm)
from .scan import (ContextShape, ScanModel, block2x2_prob, derive_model,
                   model_from_json, model_hash, model_to_json, observables,
                   pair_marginal, reduced_models)
from .tfim import AngleGrid, JointAngleDistribution, tfim_joint

__version__ = "0.1.0"

__all__ = [
    "AngleGrid",
    "CapacityError",
    "ContextShape",
    "ConvergenceError",
    "DenseOperator",
    "EmptyEnsembleError",
    "ExactUH",
    "InteractionSpec",
    "JointAngleDistribution",
    "LayeredEnsemble",
    "ModelParams",
    "OracleMismatch",
    "ReducibleOperatorError",
    "ScanModel",
    "SpectralSolution",
    "TransferOperator",
    "block2x2_prob",
    "circuit_from_json",
    "critical_coupling",
    "derive_model",
    "dominant_eigenpair",
    "empirical_pattern_distribution",
    "ensemble_distribution",
    "exact_uh",
    "gate_matrix",
    "mermin_summary",
    "model_from_json",
    "model_hash",
    "model_to_json",
    "observables",
    "pair_marginal",
    "pair_prob",
    "parse_dimacs",
    "pattern_prob",
    "projected_prob",
    "read_pbm",
    "reduced_models",
    "sample_field",
    "sat3_posterior",
    "sequence_prob",
    "total_variation",
    "write_pbm",
    "__version__",
]
