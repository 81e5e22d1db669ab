"""Generalized CP and HT decompositions.

Shapes used throughout (0-based storage of the 1-based quantities):

* :class:`CpParams` -- ``conv`` is ``(Z, N, M)`` holding ``a^{z,i}``,
  ``output`` is ``(Z,)`` holding ``a^y``.
* :class:`HtParams` -- ``leaf`` is ``(N, r_0, M)`` holding ``a^{0,j,gamma}``,
  ``levels[l-1]`` is ``(N / 2**l, r_l, r_{l-1})`` holding ``a^{l,j,gamma}`` for
  ``l = 1 .. L-1``, and ``output`` is ``(r_{L-1},)`` holding ``a^{L,1,y}``.

The shared variants drop the location axis.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .operators import PoolOperator, get_operator
from .tensor_core import as_matrix, check_size, fold_g_axis

SOLVE_RESIDUAL_TOL = 1e-10


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a representation matrix ``F`` is numerically singular."""


def is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


def _check_f(F, m: int) -> np.ndarray:
    F = as_matrix(F)
    if F.shape != (m, m):
        raise ValueError(f"F must be {m}x{m}, got {F.shape}")
    return F


def solve_f(F, rhs) -> np.ndarray:
    """Solve ``F x = rhs`` and certify the residual; raises on singular ``F``.

    ``rhs`` may be a vector or a matrix of stacked right-hand sides (columns).
    """
    F = as_matrix(F)
    rhs = np.asarray(rhs, dtype=np.float64)
    try:
        x = np.linalg.solve(F, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"F is singular: {exc}") from None
    scale = max(1.0, float(np.max(np.abs(rhs), initial=0.0)))
    residual = float(np.max(np.abs(F @ x - rhs), initial=0.0)) / scale
    if not np.all(np.isfinite(x)) or residual > SOLVE_RESIDUAL_TOL:
        raise SingularMatrixError(f"F is numerically singular (residual {residual:.3e})")
    return x


@dataclass
class CpParams:
    conv: np.ndarray
    output: np.ndarray

    def __post_init__(self):
        self.conv = np.asarray(self.conv, dtype=np.float64)
        self.output = np.asarray(self.output, dtype=np.float64).reshape(-1)
        if self.conv.ndim != 3:
            raise ValueError("CP conv weights must have shape (Z, N, M)")
        if self.output.shape[0] != self.conv.shape[0]:
            raise ValueError("CP output weights must have length Z")

    @property
    def z(self) -> int:
        return self.conv.shape[0]

    @property
    def n(self) -> int:
        return self.conv.shape[1]

    @property
    def m(self) -> int:
        return self.conv.shape[2]


@dataclass
class SharedCpParams:
    conv: np.ndarray
    output: np.ndarray
    n: int

    def __post_init__(self):
        self.conv = np.asarray(self.conv, dtype=np.float64)
        self.output = np.asarray(self.output, dtype=np.float64).reshape(-1)
        if self.conv.ndim != 2:
            raise ValueError("shared CP conv weights must have shape (Z, M)")
        if self.output.shape[0] != self.conv.shape[0]:
            raise ValueError("CP output weights must have length Z")
        if self.n < 1:
            raise ValueError("N must be >= 1")

    @property
    def z(self) -> int:
        return self.conv.shape[0]

    @property
    def m(self) -> int:
        return self.conv.shape[1]

    def unshared(self) -> CpParams:
        return CpParams(np.repeat(self.conv[:, None, :], self.n, axis=1), self.output.copy())


@dataclass
class HtParams:
    leaf: np.ndarray
    levels: list
    output: np.ndarray

    def __post_init__(self):
        self.leaf = np.asarray(self.leaf, dtype=np.float64)
        self.levels = [np.asarray(w, dtype=np.float64) for w in self.levels]
        self.output = np.asarray(self.output, dtype=np.float64).reshape(-1)
        if self.leaf.ndim != 3:
            raise ValueError("HT leaf weights must have shape (N, r_0, M)")
        n = self.leaf.shape[0]
        if not is_power_of_two(n):
            raise ValueError(f"HT requires N to be a power of two >= 2, got {n}")
        if len(self.levels) != self.depth - 1:
            raise ValueError(f"expected {self.depth - 1} hidden levels, got {len(self.levels)}")
        prev = self.leaf.shape[1]
        for l, w in enumerate(self.levels, start=1):
            if w.ndim != 3 or w.shape[0] != n >> l or w.shape[2] != prev:
                raise ValueError(
                    f"level {l} weights must have shape ({n >> l}, r_{l}, {prev}), got {w.shape}"
                )
            prev = w.shape[1]
        if self.output.shape[0] != prev:
            raise ValueError(f"output weights must have length r_(L-1) = {prev}")

    @property
    def n(self) -> int:
        return self.leaf.shape[0]

    @property
    def m(self) -> int:
        return self.leaf.shape[2]

    @property
    def depth(self) -> int:
        return self.leaf.shape[0].bit_length() - 1

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.leaf.shape[1],) + tuple(w.shape[1] for w in self.levels)


@dataclass
class SharedHtParams:
    leaf: np.ndarray
    levels: list
    output: np.ndarray
    n: int

    def __post_init__(self):
        self.leaf = np.asarray(self.leaf, dtype=np.float64)
        self.levels = [np.asarray(w, dtype=np.float64) for w in self.levels]
        self.output = np.asarray(self.output, dtype=np.float64).reshape(-1)
        if not is_power_of_two(self.n):
            raise ValueError(f"HT requires N to be a power of two >= 2, got {self.n}")
        if self.leaf.ndim != 2:
            raise ValueError("shared HT leaf weights must have shape (r_0, M)")
        if len(self.levels) != self.depth - 1:
            raise ValueError(f"expected {self.depth - 1} hidden levels, got {len(self.levels)}")
        prev = self.leaf.shape[0]
        for l, w in enumerate(self.levels, start=1):
            if w.ndim != 2 or w.shape[1] != prev:
                raise ValueError(f"shared level {l} weights must have shape (r_{l}, {prev})")
            prev = w.shape[0]
        if self.output.shape[0] != prev:
            raise ValueError(f"output weights must have length r_(L-1) = {prev}")

    @property
    def m(self) -> int:
        return self.leaf.shape[1]

    @property
    def depth(self) -> int:
        return self.n.bit_length() - 1

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.leaf.shape[0],) + tuple(w.shape[0] for w in self.levels)

    def unshared(self) -> HtParams:
        n = self.n
        leaf = np.repeat(self.leaf[None], n, axis=0)
        levels = [np.repeat(w[None], n >> l, axis=0) for l, w in enumerate(self.levels, start=1)]
        return HtParams(leaf, levels, self.output.copy())


# ---------------------------------------------------------------------------
# random parameter draws


def random_cp_params(m: int, n: int, z: int, rng, low=-1.0, high=1.0) -> CpParams:
    return CpParams(rng.uniform(low, high, (z, n, m)), rng.uniform(low, high, z))


def random_shared_cp_params(m: int, n: int, z: int, rng, low=-1.0, high=1.0) -> SharedCpParams:
    return SharedCpParams(rng.uniform(low, high, (z, m)), rng.uniform(low, high, z), n)


def random_ht_params(m: int, n: int, widths: Sequence[int], rng, low=-1.0, high=1.0) -> HtParams:
    """Draw every HT weight independently from ``U[low, high]``."""
    depth = n.bit_length() - 1
    widths = _expand_widths(widths, depth)
    leaf = rng.uniform(low, high, (n, widths[0], m))
    levels = [
        rng.uniform(low, high, (n >> l, widths[l], widths[l - 1])) for l in range(1, depth)
    ]
    output = rng.uniform(low, high, widths[-1])
    return HtParams(leaf, levels, output)


def random_shared_ht_params(m: int, n: int, widths: Sequence[int], rng, low=-1.0, high=1.0):
    depth = n.bit_length() - 1
    widths = _expand_widths(widths, depth)
    leaf = rng.uniform(low, high, (widths[0], m))
    levels = [rng.uniform(low, high, (widths[l], widths[l - 1])) for l in range(1, depth)]
    return SharedHtParams(leaf, levels, rng.uniform(low, high, widths[-1]), n)


def _expand_widths(widths, depth: int) -> list[int]:
    widths = [int(w) for w in np.atleast_1d(widths)]
    if len(widths) == 1:
        widths = widths * depth
    if len(widths) != depth or min(widths) < 1:
        raise ValueError(f"need {depth} positive widths r_0..r_(L-1), got {widths}")
    return widths


# ---------------------------------------------------------------------------
# tensor-form evaluation


def _g_outer_flat(g: PoolOperator, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Batched generalized tensor product of flattened tensors along the last axis."""
    out = g(left[..., :, None], right[..., None, :])
    return out.reshape(out.shape[:-2] + (left.shape[-1] * right.shape[-1],))


def _unmatricize(mat: np.ndarray, m: int, n: int) -> np.ndarray:
    half = (m,) * (n // 2)
    # axes (odd_1..odd_h, even_1..even_h) -> (odd_1, even_1, odd_2, even_2, ...)
    order = [k for pair in zip(range(n // 2), range(n // 2, n)) for k in pair]
    return np.ascontiguousarray(mat.reshape(half + half).transpose(order))


def generalized_cp(p, F, g, max_elements: int | None = None) -> np.ndarray:
    """Tensor ``sum_z a^y_z (F a^{z,1}) (x)_g ... (x)_g (F a^{z,N})``.

    For even ``N`` the g-chain is grouped as (odd modes) g (even modes), the
    grouping the matricized form uses, so both agree bit for bit.
    """
    if isinstance(p, SharedCpParams):
        return shared_cp(p, F, g, max_elements)
    g = get_operator(g)
    F = _check_f(F, p.m)
    check_size(p.m**p.n * max(p.z, 1), max_elements)
    shape = (p.m,) * p.n
    if p.z == 0:
        return np.zeros(shape)
    if p.n % 2 == 0:
        return _unmatricize(_matricized_cp(p, F, g), p.m, p.n)
    vecs = np.einsum("ij,znj->zni", F, p.conv)
    acc = vecs[:, 0, :]
    for i in range(1, p.n):
        acc = _g_outer_flat(g, acc, vecs[:, i, :])
    return np.ascontiguousarray((p.output @ acc).reshape(shape))


def cp_entry(p: CpParams, F, g, index: Sequence[int]) -> float:
    """Single entry (1-based ``index``) of :func:`generalized_cp` without materializing."""
    g = get_operator(g)
    F = _check_f(F, p.m)
    rows = F[np.asarray(index) - 1]  # (N, M)
    vals = np.einsum("nm,znm->zn", rows, p.conv)
    return float(p.output @ fold_g_axis(vals, g, axis=1)) if p.z else 0.0


def generalized_ht(p, F, g, max_elements: int | None = None) -> np.ndarray:
    """Evaluate the generalized HT recursion level by level into an order-N tensor."""
    if isinstance(p, SharedHtParams):
        return shared_ht(p, F, g, max_elements)
    g = get_operator(g)
    F = _check_f(F, p.m)
    check_size(p.m**p.n, max_elements)
    phi = np.einsum("ij,nrj->nri", F, p.leaf)  # (locations, channels, flat tensor)
    for weights in p.levels + [p.output[None, None, :]]:
        pooled = _g_outer_flat(g, phi[0::2], phi[1::2])
        phi = np.einsum("jga,jat->jgt", weights, pooled)
    return np.ascontiguousarray(phi[0, 0].reshape((p.m,) * p.n))


def ht_entry(p: HtParams, F, g, index: Sequence[int]) -> float:
    """Single entry (1-based ``index``) of :func:`generalized_ht`."""
    g = get_operator(g)
    F = _check_f(F, p.m)
    rows = F[np.asarray(index) - 1]
    vals = np.einsum("nm,nrm->nr", rows, p.leaf)
    for weights in p.levels + [p.output[None, None, :]]:
        vals = np.einsum("jga,ja->jg", weights, g(vals[0::2], vals[1::2]))
    return float(vals[0, 0])


# ---------------------------------------------------------------------------
# matricized evaluation (never materializes the order-N tensor)


def matricized_cp(p, F, g, max_elements: int | None = None) -> np.ndarray:
    """Matricized generalized CP via generalized Kronecker products of odd/even chains."""
    if isinstance(p, SharedCpParams):
        p = p.unshared()
    g = get_operator(g)
    F = _check_f(F, p.m)
    if p.n % 2:
        raise ValueError("matricized forms require even N")
    side = p.m ** (p.n // 2)
    check_size(side * side, max_elements)
    if p.z == 0:
        return np.zeros((side, side))
    return _matricized_cp(p, F, g)


def _matricized_cp(p: CpParams, F: np.ndarray, g: PoolOperator) -> np.ndarray:
    vecs = np.einsum("ij,znj->zni", F, p.conv)
    rows = vecs[:, 0, :]
    cols = vecs[:, 1, :]
    for i in range(2, p.n, 2):
        rows = _g_outer_flat(g, rows, vecs[:, i, :])
        cols = _g_outer_flat(g, cols, vecs[:, i + 1, :])
    blocks = g(rows[:, :, None], cols[:, None, :])
    return np.ascontiguousarray(np.einsum("z,zrc->rc", p.output, blocks))


def _g_kron_batched(g: PoolOperator, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    r1, c1 = a.shape[-2:]
    r2, c2 = b.shape[-2:]
    out = g(a[..., :, None, :, None], b[..., None, :, None, :])
    return out.reshape(out.shape[:-4] + (r1 * r2, c1 * c2))


def matricized_ht(p, F, g, max_elements: int | None = None) -> np.ndarray:
    """Matricized generalized HT: order-2 leaves, then generalized Kronecker products."""
    if isinstance(p, SharedHtParams):
        p = p.unshared()
    g = get_operator(g)
    F = _check_f(F, p.m)
    side = p.m ** (p.n // 2)
    check_size(side * side, max_elements)
    vecs = np.einsum("ij,nrj->nri", F, p.leaf)
    # level-1 products are order-2 tensors: rows from location 2j-1, cols from 2j
    mats = g(vecs[0::2, :, :, None], vecs[1::2, :, None, :])
    weights = p.levels + [p.output[None, None, :]]
    mats = np.einsum("jga,jarc->jgrc", weights[0], mats)
    for w in weights[1:]:
        pooled = _g_kron_batched(g, mats[0::2], mats[1::2])
        mats = np.einsum("jga,jarc->jgrc", w, pooled)
    return np.ascontiguousarray(mats[0, 0])


# ---------------------------------------------------------------------------
# shared forms


def shared_cp(p: SharedCpParams, F, g, max_elements: int | None = None) -> np.ndarray:
    """``sum_z a^y_z (F a^z) (x)_g ... (x)_g (F a^z)`` with ``N`` factors."""
    return generalized_cp(p.unshared(), F, g, max_elements)


def shared_ht(p: SharedHtParams, F, g, max_elements: int | None = None) -> np.ndarray:
    g = get_operator(g)
    F = _check_f(F, p.m)
    check_size(p.m**p.n, max_elements)
    phi = p.leaf @ F.T  # (r_0, M)
    for weights in p.levels + [p.output[None, :]]:
        phi = weights @ _g_outer_flat(g, phi, phi)
    return np.ascontiguousarray(phi[0].reshape((p.m,) * p.n))


# ---------------------------------------------------------------------------
# structural conversions


def ht_from_cp(p: CpParams) -> HtParams:
    """Deep parameters reproducing a CP tensor: all widths ``Z``, identity mixing."""
    if not is_power_of_two(p.n):
        raise ValueError(f"N must be a power of two >= 2, got {p.n}")
    depth = p.n.bit_length() - 1
    leaf = np.transpose(p.conv, (1, 0, 2)).copy()  # (N, Z, M)
    eye = np.eye(p.z)
    levels = [np.repeat(eye[None], p.n >> l, axis=0) for l in range(1, depth)]
    return HtParams(leaf, levels, p.output.copy())


def cp_from_tensor(A, g, F, skip_zeros: bool = True) -> CpParams:
    """Exact CP parameters reproducing ``A`` under ``product`` or ``relu-max``.

    ``product``: one channel per entry (``Z = M**N``) with
    ``a^{z,i} = F^{-1} e_{d_i}`` and ``a^y_z = A[d]``.

    ``relu-max``: two channels per entry, ``(F^{-1} 1, F^{-1} ebar_{d_i})`` with
    output weights ``(+A[d], -A[d])``; each pair realizes ``A[d]`` times the
    indicator of ``d``.  Zero entries are skipped when ``skip_zeros`` is set.
    Entries are enumerated in row-major order.
    """
    g = get_operator(g)
    A = np.asarray(A, dtype=np.float64)
    n, m = A.ndim, A.shape[0]
    if any(d != m for d in A.shape):
        raise ValueError("all modes of A must share one dimension M")
    F = _check_f(F, m)
    eye = np.eye(m)
    if g is PoolOperator.PRODUCT:
        basis = solve_f(F, eye)  # column d is F^{-1} e_d
        idx = np.array(list(itertools.product(range(m), repeat=n)), dtype=int)
        conv = basis.T[idx]  # (M**N, N, M)
        return CpParams(conv, A.reshape(-1).copy())
    if g is PoolOperator.RELU_MAX:
        ones = solve_f(F, np.ones(m))
        ebar = solve_f(F, 1.0 - eye)  # column d is F^{-1} ebar_d
        flat = A.reshape(-1)
        keep = [k for k in range(flat.size) if not (skip_zeros and flat[k] == 0.0)]
        conv = np.empty((2 * len(keep), n, m))
        output = np.empty(2 * len(keep))
        for slot, k in enumerate(keep):
            d = np.unravel_index(k, A.shape)
            conv[2 * slot] = ones
            conv[2 * slot + 1] = ebar.T[list(d)]
            output[2 * slot] = flat[k]
            output[2 * slot + 1] = -flat[k]
        return CpParams(conv.reshape(-1, n, m), output)
    raise ValueError(f"cp_from_tensor supports product and relu-max, not {g.value}")
