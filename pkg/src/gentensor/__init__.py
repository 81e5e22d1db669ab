"""Generalized tensor decompositions of convolutional networks."""

from .operators import PoolOperator, check_operator_laws, get_operator
from .tensor_core import (
    fold_g,
    generalized_kronecker,
    generalized_tensor_product,
    kronecker,
    matricize,
    permute_modes,
    read_gten,
    tensor_product,
    write_gten,
)
from .decompositions import (
    CpParams,
    HtParams,
    SharedCpParams,
    SharedHtParams,
    cp_from_tensor,
    generalized_cp,
    generalized_ht,
    ht_from_cp,
    matricized_cp,
    matricized_ht,
    shared_cp,
    shared_ht,
)

__version__ = "0.1.0"
