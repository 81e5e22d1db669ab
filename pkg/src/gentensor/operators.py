"""Activation-pooling operators.

Each operator is the composition ``g(a, b) = P(sigma(a), sigma(b))`` of an
activation and a size-2 pooling, restricted to the three closed forms that are
associative and commutative:

* ``product``  -- linear activation, product pooling: ``a * b``
* ``relu-max`` -- ReLU activation, max pooling: ``max(a, b, 0)``
* ``relu-sum`` -- ReLU activation, sum pooling: ``max(a, 0) + max(b, 0)``

Average pooling is modelled by ``relu-sum``; the ``1/window`` factor is absorbed
by the linear weights that follow pooling.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class PoolOperator(str, enum.Enum):
    PRODUCT = "product"
    RELU_MAX = "relu-max"
    RELU_SUM = "relu-sum"

    def __call__(self, a, b):
        """Evaluate ``g`` elementwise with numpy broadcasting."""
        if self is PoolOperator.PRODUCT:
            return np.multiply(a, b)
        if self is PoolOperator.RELU_MAX:
            return np.maximum(np.maximum(a, b), 0.0)
        return np.maximum(a, 0.0) + np.maximum(b, 0.0)

    @property
    def token(self) -> str:
        return self.value


OPERATOR_TOKENS = tuple(op.value for op in PoolOperator)


def get_operator(g) -> PoolOperator:
    """Resolve a token (``"product"``, ``"relu-max"``, ``"relu-sum"``) or operator."""
    if isinstance(g, PoolOperator):
        return g
    try:
        return PoolOperator(str(g))
    except ValueError:
        raise ValueError(
            f"unknown operator {g!r}; expected one of {', '.join(OPERATOR_TOKENS)}"
        ) from None


@dataclass(frozen=True)
class LawReport:
    operator: PoolOperator
    samples: int
    associativity_residual: float
    commutativity_residual: float
    identity_at_zero: bool


def check_operator_laws(g, samples: int = 1000, seed: int = 0) -> LawReport:
    """Measure associativity and commutativity residuals on random triples.

    Triples are drawn from a standard normal scaled by 10 so that both signs
    (and hence both ReLU branches) are exercised.
    """
    g = get_operator(g)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    a, b, c = 10.0 * rng.standard_normal((3, samples))
    left = g(g(a, b), c)
    right = g(a, g(b, c))
    assoc = float(np.max(np.abs(left - right)))
    comm = float(np.max(np.abs(g(a, b) - g(b, a))))
    return LawReport(
        operator=g,
        samples=samples,
        associativity_residual=assoc,
        commutativity_residual=comm,
        identity_at_zero=bool(g(0.0, 0.0) == 0.0),
    )
