"""Forward evaluation of the shallow, deep, windowed and fully-connected networks.

Inputs are 1-D sequences of ``N`` patches, ``X`` of shape ``(N, s)``.  The
representation layer maps each patch to ``M`` values ``f_{theta_d}(x)``; the
hidden layers are driven by the same parameter objects as the decompositions,
so evaluating a network on template grid points reproduces the matching
decomposition entrywise.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .decompositions import CpParams, HtParams, SharedCpParams, SharedHtParams, is_power_of_two
from .operators import PoolOperator, get_operator
from .tensor_core import check_size, fold_g_axis

REPR_KINDS = ("relu-neuron", "sigmoid-neuron", "raw-coordinates", "identity-onehot", "custom")
ARCHITECTURES = ("shallow", "deep", "shallow-wxh", "shallow-fc")


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


@dataclass
class ReprFamily:
    """``M`` representation functions ``f_{theta_d}: R^s -> R``.

    ``relu-neuron`` / ``sigmoid-neuron`` use ``weights`` (M, s) and ``biases``
    (M,); ``raw-coordinates`` returns the patch itself (``s == M``);
    ``identity-onehot`` returns the one-hot code of the matching template (zero
    off the template set); ``custom`` wraps arbitrary callables.
    """

    kind: str
    weights: np.ndarray | None = None
    biases: np.ndarray | None = None
    templates: np.ndarray | None = None
    functions: Sequence[Callable] = field(default_factory=tuple)
    size: int | None = None

    def __post_init__(self):
        if self.kind not in REPR_KINDS:
            raise ValueError(f"unknown representation kind {self.kind!r}")
        if self.kind in ("relu-neuron", "sigmoid-neuron"):
            self.weights = np.atleast_2d(np.asarray(self.weights, dtype=np.float64))
            self.biases = np.asarray(self.biases, dtype=np.float64).reshape(-1)
            if self.weights.shape[0] != self.biases.shape[0]:
                raise ValueError("neuron weights and biases disagree on M")
        if self.kind == "identity-onehot":
            self.templates = check_templates(self.templates)

    @property
    def m(self) -> int:
        if self.kind in ("relu-neuron", "sigmoid-neuron"):
            return self.weights.shape[0]
        if self.kind == "identity-onehot":
            return self.templates.shape[0]
        if self.kind == "custom":
            return len(self.functions)
        if self.size is None:
            raise ValueError("raw-coordinates family needs an explicit size")
        return self.size

    def __call__(self, x) -> np.ndarray:
        """Evaluate all ``M`` functions on patches ``x`` of shape (..., s) -> (..., M)."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "relu-neuron":
            return np.maximum(x @ self.weights.T + self.biases, 0.0)
        if self.kind == "sigmoid-neuron":
            return sigmoid(x @ self.weights.T + self.biases)
        if self.kind == "raw-coordinates":
            return x.copy()
        if self.kind == "identity-onehot":
            hits = np.all(x[..., None, :] == self.templates, axis=-1)
            return hits.astype(np.float64)
        return np.stack([np.asarray(f(x), dtype=np.float64) for f in self.functions], axis=-1)


def check_templates(t) -> np.ndarray:
    """Return templates as an (M, s) array; duplicates are rejected exactly."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 1:
        t = t[:, None]
    if t.ndim != 2 or t.shape[0] < 1:
        raise ValueError("templates must be an (M, s) array")
    if np.unique(t, axis=0).shape[0] != t.shape[0]:
        raise ValueError("templates must be pairwise distinct")
    return t


def build_repr_matrix(templates, reprs: ReprFamily) -> np.ndarray:
    """``F[i, j] = f_{theta_j}(x^(i))``."""
    t = check_templates(templates)
    F = np.asarray(reprs(t), dtype=np.float64)
    if F.shape != (t.shape[0], t.shape[0]):
        raise ValueError(
            f"{t.shape[0]} templates with {F.shape[-1]} representation functions; need equal counts"
        )
    return F


@dataclass
class NetworkConfig:
    architecture: str
    n: int
    m: int
    operator: PoolOperator = PoolOperator.PRODUCT
    widths: tuple = ()
    k: int = 1
    y: int = 1
    shared: bool = False
    allow_wide_window: bool = False

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        self.operator = get_operator(self.operator)
        self.widths = tuple(int(w) for w in np.atleast_1d(self.widths))
        if self.architecture == "deep" and not is_power_of_two(self.n):
            raise ValueError(f"deep architecture requires N to be a power of two, got {self.n}")
        if self.architecture == "shallow-wxh":
            if self.k >= self.n:
                raise ValueError("receptive width K must be smaller than N")
            limit = self.n / 2 + 1 - np.log(self.n) / np.log(self.m) if self.m > 1 else np.inf
            if not self.k < limit:
                msg = f"K={self.k} is outside the non-universality regime K < {limit:g}"
                if not self.allow_wide_window:
                    raise ValueError(msg + " (set allow_wide_window to override)")
                warnings.warn(msg, stacklevel=2)


def _output_rows(output: np.ndarray) -> np.ndarray:
    return np.atleast_2d(output)


def _patches(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return X[:, None] if X.ndim == 1 else X


def shallow_score(X, params, reprs: ReprFamily, g) -> np.ndarray:
    """Shallow network: 1x1 conv, activation, global pooling, dense output.

    ``params.output`` may be ``(Z,)`` or ``(Y, Z)``; returns ``Y`` scores.
    """
    g = get_operator(g)
    if isinstance(params, SharedCpParams):
        params = params.unshared()
    rep = reprs(_patches(X))  # (N, M)
    if rep.shape != (params.n, params.m):
        raise ValueError(f"expected {params.n} patches with {params.m} features, got {rep.shape}")
    conv = np.einsum("znm,nm->zn", params.conv, rep)
    pooled = fold_g_axis(conv, g, axis=1) if params.z else np.zeros(0)
    return _output_rows(params.output) @ pooled


def deep_score(X, params, reprs: ReprFamily, g) -> np.ndarray:
    """Deep network with size-2 pooling windows pairing locations (2j-1, 2j)."""
    g = get_operator(g)
    if isinstance(params, SharedHtParams):
        params = params.unshared()
    rep = reprs(_patches(X))
    if rep.shape != (params.n, params.m):
        raise ValueError(f"expected {params.n} patches with {params.m} features, got {rep.shape}")
    out = np.atleast_2d(params.output)
    conv = np.einsum("nrm,nm->nr", params.leaf, rep)
    for weights in params.levels:
        conv = np.einsum("jga,ja->jg", weights, g(conv[0::2], conv[1::2]))
    pooled = g(conv[0], conv[1])
    return out @ pooled


def window_offsets(k: int) -> np.ndarray:
    """Offsets of a width-``k`` window around a location; even ``k`` leans right."""
    return np.arange(k) - (k - 1) // 2


def wxh_score(X, conv: np.ndarray, output: np.ndarray, reprs: ReprFamily) -> np.ndarray:
    """Shallow network with 1-D receptive field ``K``, ReLU, average pooling.

    ``conv`` is ``(Z, N, M, K)`` holding ``A^{z,i}``; windows are zero padded.
    """
    conv = np.asarray(conv, dtype=np.float64)
    z, n, m, k = conv.shape
    rep = reprs(_patches(X))
    padded = np.zeros((n + k, m))
    offs = window_offsets(k)
    pad_lo = -offs[0]
    padded[pad_lo : pad_lo + n] = rep
    windows = np.stack([padded[pad_lo + i + offs] for i in range(n)])  # (N, K, M)
    act = np.maximum(np.einsum("zimk,ikm->zi", conv, windows), 0.0)
    return _output_rows(output) @ act.mean(axis=1)


def wxh_grid_tensor(conv: np.ndarray, output: np.ndarray, F, max_elements: int | None = None) -> np.ndarray:
    """Grid tensor ``sum_i B^i`` of the windowed network, built from ``F`` directly.

    ``B^i[c_1..c_K] = sum_z a^y_z / N * max(sum_j (F A^{z,i})[c_j, j], 0)``; a
    window slot outside ``[1, N]`` contributes zero.
    """
    conv = np.asarray(conv, dtype=np.float64)
    output = np.asarray(output, dtype=np.float64).reshape(-1)
    F = np.asarray(F, dtype=np.float64)
    z, n, m, k = conv.shape
    check_size(m**n, max_elements)
    fa = np.einsum("dm,zimk->zidk", F, conv)  # (Z, N, M rows, K)
    offs = window_offsets(k)
    grid = np.zeros((m,) * n)
    for i in range(n):
        locs = i + offs
        inside = [(j, int(loc)) for j, loc in enumerate(locs) if 0 <= loc < n]
        pre = np.zeros((z,) + (m,) * len(inside))
        for slot, (j, _) in enumerate(inside):
            shape = [1] * (len(inside) + 1)
            shape[0] = z
            shape[slot + 1] = m
            pre = pre + fa[:, i, :, j].reshape(shape)
        b = np.tensordot(output / n, np.maximum(pre, 0.0), axes=(0, 0))
        # window slots are in ascending location order, so B^i broadcasts directly
        shape = [1] * n
        for _, loc in inside:
            shape[loc] = m
        grid = grid + b.reshape(shape)
    return grid


def fc_score(X, conv: np.ndarray, output: np.ndarray, reprs: ReprFamily) -> np.ndarray:
    """Fully-connected shallow network: ``sum_z a^y_z max(0, <rep(X), A^z>)``.

    ``conv`` is ``(Z, N, M)`` holding ``A^z``.
    """
    conv = np.asarray(conv, dtype=np.float64)
    rep = reprs(_patches(X))
    if rep.shape != conv.shape[1:]:
        raise ValueError(f"expected representation of shape {conv.shape[1:]}, got {rep.shape}")
    hidden = np.maximum(np.einsum("znm,nm->z", conv, rep), 0.0)
    return _output_rows(output) @ hidden


def grid_tensor(score_fn: Callable, templates, n: int, max_elements: int | None = None) -> np.ndarray:
    """``A[d_1..d_N] = score_fn((x^(d_1), ..., x^(d_N)))`` over all template choices.

    ``score_fn`` may return a scalar or a length-1 array.
    """
    t = check_templates(templates)
    m = t.shape[0]
    check_size(m**n, max_elements)
    values = np.empty(m**n)
    for flat, idx in enumerate(itertools.product(range(m), repeat=n)):
        values[flat] = np.asarray(score_fn(t[list(idx)]), dtype=np.float64).reshape(-1)[0]
    return values.reshape((m,) * n)
