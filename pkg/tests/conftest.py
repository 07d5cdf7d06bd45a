import pytest

from merwfield import scan
from merwfield.operator import TransferOperator, dominant_eigenpair
from merwfield.patterns import ModelParams


@pytest.fixture(scope="session")
def w8_pair():
    """Converged width-8 cyclic ferromagnet, shared across test modules."""
    params = ModelParams(width=8, cyclic=True, beta=1.0, jh=0.3, jv=0.3)
    op = TransferOperator(params)
    return op, dominant_eigenpair(op)


@pytest.fixture(scope="session")
def w8_model(w8_pair):
    op, sol = w8_pair
    return scan.derive_model(sol, op, scan.ContextShape(3, 3))
