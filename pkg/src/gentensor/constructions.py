"""Explicit weight settings from the expressiveness proofs, each with a certificate.

Every "there exists" search is seeded and retried a bounded number of times:
the failure sets are measure zero, so a retry loop terminates in practice and
stays deterministic for a fixed seed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analysis import numerical_rank
from .decompositions import (
    CpParams,
    HtParams,
    SharedHtParams,
    SingularMatrixError,
    generalized_cp,
    generalized_ht,
    is_power_of_two,
    matricized_ht,
    shared_ht,
    solve_f,
)
from .networks import ReprFamily, build_repr_matrix, check_templates, fc_score
from .operators import PoolOperator, get_operator
from .tensor_core import matricize

SEPARATION_GAP = 1e-9
SEPARATION_RETRIES = 64
TEMPLATE_RETRIES = 256
SIGMOID_ALPHA_CAP = 2.0**40


class ConstructionError(RuntimeError):
    """A randomized construction exhausted its retries or met invalid input."""


@dataclass
class Certificate:
    claim: str
    passed: bool
    witnesses: dict = field(default_factory=dict)
    tolerance: float = 0.0

    def __bool__(self) -> bool:
        return self.passed


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def ebar(m: int, gamma: int) -> np.ndarray:
    """Vector of ones with a zero at 1-based position ``gamma``."""
    v = np.ones(m)
    v[gamma - 1] = 0.0
    return v


# ---------------------------------------------------------------------------
# representation / template non-degeneracy


def separating_direction(points, seed=0) -> np.ndarray:
    """Unit vector ``w`` whose projections ``w @ v_i`` are pairwise distinct.

    In one dimension ``w = [1]``.  Otherwise ``w`` is drawn from a standard
    normal and normalized, retrying until the smallest projection gap is at
    least ``1e-9``.
    """
    pts = check_templates(points)
    if pts.shape[1] == 1:
        return np.ones(1)
    rng = _rng(seed)
    for _ in range(SEPARATION_RETRIES):
        w = rng.standard_normal(pts.shape[1])
        w /= np.linalg.norm(w)
        proj = np.sort(pts @ w)
        if proj.size < 2 or np.min(np.diff(proj)) >= SEPARATION_GAP:
            return w
    raise ConstructionError(
        f"no separating direction after {SEPARATION_RETRIES} draws; points are near-duplicates"
    )


def nondegenerate_reprs(templates, kind: str = "relu", seed=0):
    """Neuron representation functions with a certified non-singular ``F``.

    ReLU: biases sit strictly between consecutive negated projections, making
    ``F`` lower triangular with a positive diagonal once templates are sorted by
    projection.  Sigmoid: the same neurons scaled by ``alpha``, doubled from 1
    until ``|det F| >= 1e-8``.

    Returns ``(ReprFamily, F, Certificate)``.
    """
    t = check_templates(templates)
    m = t.shape[0]
    w = separating_direction(t, seed)
    proj = np.sort(t @ w)
    first_half_gap = (proj[1] - proj[0]) / 2 if m > 1 else 0.5
    biases = np.empty(m)
    biases[0] = -proj[0] + first_half_gap
    biases[1:] = -(proj[:-1] + proj[1:]) / 2
    weights = np.tile(w, (m, 1))
    if kind == "relu":
        reprs = ReprFamily("relu-neuron", weights=weights, biases=biases)
        F = build_repr_matrix(t, reprs)
        det = float(np.linalg.det(F))
        cert = Certificate("nondegeneracy-relu", abs(det) > 0.0, {"det": det, "alpha": 1.0}, 0.0)
        return reprs, F, cert
    if kind == "sigmoid":
        alpha = 1.0
        while alpha <= SIGMOID_ALPHA_CAP:
            reprs = ReprFamily("sigmoid-neuron", weights=alpha * weights, biases=alpha * biases)
            F = build_repr_matrix(t, reprs)
            det = float(np.linalg.det(F))
            if abs(det) >= 1e-8:
                cert = Certificate("nondegeneracy-sigmoid", True, {"det": det, "alpha": alpha}, 1e-8)
                return reprs, F, cert
            alpha *= 2.0
        raise ConstructionError("sigmoid scaling exceeded 2**40 without a non-singular F")
    raise ValueError(f"kind must be 'relu' or 'sigmoid', got {kind!r}")


def templates_for_reprs(reprs: ReprFamily, dim: int, seed=0, scale: float = 1.0):
    """Random templates in ``R^dim`` for which ``F`` is non-singular (``|det| >= 1e-10``).

    Returns ``(templates, F)``.
    """
    rng = _rng(seed)
    m = reprs.m
    for _ in range(TEMPLATE_RETRIES):
        t = scale * rng.standard_normal((m, dim))
        if np.unique(t, axis=0).shape[0] != m:
            continue
        F = build_repr_matrix(t, reprs)
        if np.all(np.isfinite(F)) and abs(np.linalg.det(F)) >= 1e-10:
            return t, F
    raise ConstructionError(
        f"no templates with non-singular F after {TEMPLATE_RETRIES} draws; "
        "representation functions may be linearly dependent"
    )


# ---------------------------------------------------------------------------
# universality


def indicator_cp(index: Sequence[int], m: int, n: int, F) -> CpParams:
    """Two-channel relu-max CP realizing the indicator of the 1-based ``index``."""
    if len(index) != n or not all(1 <= d <= m for d in index):
        raise ValueError(f"index {tuple(index)} is not a valid multi-index for M={m}, N={n}")
    ones = solve_f(F, np.ones(m))
    conv = np.empty((2, n, m))
    conv[0] = ones
    for i, d in enumerate(index):
        conv[1, i] = solve_f(F, ebar(m, d))
    return CpParams(conv, np.array([1.0, -1.0]))


def indicator_tensor(index: Sequence[int], m: int) -> np.ndarray:
    a = np.zeros((m,) * len(index))
    a[tuple(d - 1 for d in index)] = 1.0
    return a


def certify_indicator(index, m, n, F) -> Certificate:
    A = generalized_cp(indicator_cp(index, m, n, F), F, PoolOperator.RELU_MAX)
    err = float(np.max(np.abs(A - indicator_tensor(index, m))))
    return Certificate("relu-max-universal", err <= 1e-9, {"max_error": err, "index": list(index)}, 1e-9)


def piecewise_affine_interpolate(points, targets, seed=0, direction=None):
    """Weights with ``sum_j a_j max(0, w_j @ v_i + b_j) = c_i`` for distinct points.

    All ``w_j`` equal one separating direction ``u``; points are processed in
    increasing order of ``u @ v``.  Returns ``(W, b, a, certificate)`` with ``W``
    of shape ``(k, D)``.
    """
    v = check_templates(points)
    c = np.asarray(targets, dtype=np.float64).reshape(-1)
    k, dim = v.shape
    if c.shape[0] != k:
        raise ValueError("need one target per point")
    u = separating_direction(v, seed) if direction is None else np.asarray(direction, dtype=np.float64)
    proj = v @ u
    order = np.argsort(proj, kind="stable")
    p, cs = proj[order], c[order]
    if k > 1 and np.min(np.diff(p)) <= 0:
        raise ConstructionError("direction does not separate the points")
    b = np.empty(k)
    a = np.empty(k)
    b[0] = -p[0] + 1.0
    b[1:] = 0.0 - p[:-1]
    a[0] = cs[0]
    running = a[0]
    for j in range(1, k):
        a[j] = (cs[j] - cs[j - 1]) / (p[j] - p[j - 1]) - running
        running += a[j]
    W = np.tile(u, (k, 1))
    pred = np.maximum(0.0, v @ W.T + b) @ a
    resid = float(np.max(np.abs(pred - c)) / max(1.0, float(np.max(np.abs(c)))))
    cert = Certificate("piecewise-affine-lemma", resid <= 1e-8, {"relative_residual": resid, "k": k}, 1e-8)
    return W, b, a, cert


def _grid_feature_matrices(F: np.ndarray, n: int) -> np.ndarray:
    m = F.shape[0]
    idx = np.array(list(itertools.product(range(m), repeat=n)), dtype=int)
    return F[idx]  # (M**N, N, M): rows d_1..d_N of F stacked


def fc_universal_weights(target, F, seed=0):
    """Fully-connected ReLU weights (``Z = M**N``) reproducing ``target`` on the grid.

    ``F`` must have a constant non-zero column ``j`` (value ``c``) and pairwise
    distinct rows.  Returns ``(conv (Z, N, M), output (Z,), certificate)``.
    """
    A = np.asarray(target, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    n, m = A.ndim, F.shape[0]
    if A.shape != (m,) * n:
        raise ValueError("target must have dimension M in every mode")
    const = [j for j in range(m) if np.all(F[:, j] == F[0, j]) and F[0, j] != 0.0]
    if not const:
        raise ValueError("F needs a constant non-zero column")
    if np.unique(F, axis=0).shape[0] != m:
        raise ValueError("F rows must be pairwise distinct")
    j = const[0]
    c_val = F[0, j]
    feats = _grid_feature_matrices(F, n)
    reduced = np.delete(feats, j, axis=2).reshape(feats.shape[0], -1)
    k = reduced.shape[0]
    if reduced.shape[1] == 0:
        W = np.zeros((k, 0))
        b = np.zeros(k)
        b[0] = 1.0
        a = np.zeros(k)
        a[0] = A.reshape(-1)[0]
    else:
        W, b, a, _ = piecewise_affine_interpolate(reduced, A.reshape(-1), seed)
    conv = np.zeros((k, n, m))
    keep = [col for col in range(m) if col != j]
    conv[:, :, keep] = W.reshape(k, n, m - 1)
    conv[:, 0, j] = b / c_val  # c * sum_i A^z_{i,j} = b_z
    grid = np.array([fc_score(x, conv, a, ReprFamily("raw-coordinates", size=m)) for x in feats]).reshape(A.shape)
    err = float(np.max(np.abs(grid - A)))
    cert = Certificate("fc-universal", err <= 1e-9, {"max_error": err, "z": k}, 1e-9)
    return conv, a, cert


# ---------------------------------------------------------------------------
# depth efficiency


def _widths(r0: int, n: int, widths) -> list[int]:
    depth = n.bit_length() - 1
    if widths is None:
        return [r0] * depth
    widths = [int(w) for w in widths]
    if len(widths) != depth or widths[0] != r0:
        raise ValueError(f"widths must have length {depth} and start with r0={r0}")
    return widths


def depth_eff_ht_weights(m: int, r0: int, n: int, F, widths=None) -> HtParams:
    """relu-max deep weights whose matricized grid tensor has rank >= min(r0, M)^(N/2).

    Leaf channel ``gamma <= M`` holds ``F^{-1} ebar_gamma`` (zero beyond ``M``),
    every hidden mixing keeps only channel 1 with all-ones weights, output all
    ones.
    """
    if not is_power_of_two(n):
        raise ValueError(f"N must be a power of two >= 2, got {n}")
    widths = _widths(r0, n, widths)
    leaf_vecs = np.zeros((r0, m))
    for gamma in range(1, min(r0, m) + 1):
        leaf_vecs[gamma - 1] = solve_f(F, ebar(m, gamma))
    leaf = np.repeat(leaf_vecs[None], n, axis=0)
    levels = []
    for l in range(1, len(widths)):
        w = np.zeros((n >> l, widths[l], widths[l - 1]))
        w[:, 0, :] = 1.0
        levels.append(w)
    return HtParams(leaf, levels, np.ones(widths[-1]))


def certify_depth_eff(m: int, r0: int, n: int, F, widths=None) -> Certificate:
    p = depth_eff_ht_weights(m, r0, n, F, widths)
    mat = matricized_ht(p, F, PoolOperator.RELU_MAX)
    c = min(r0, m)
    side = mat.shape[0]
    expected = np.full((side, side), float(c))
    # diagonal positions where every pooled pair (d_{2i-1}, d_{2i}) is equal and <= c
    for idx in itertools.product(range(c), repeat=n // 2):
        flat = 0
        for d in idx:
            flat = flat * m + d
        expected[flat, flat] = c - 1.0
    structure_err = float(np.max(np.abs(mat - expected)))
    rank = numerical_rank(mat).rank
    bound = c ** (n // 2)
    return Certificate(
        "relu-max-depth-eff-exist",
        structure_err <= 1e-9 and rank >= bound,
        {"rank": rank, "rank_lower_bound": bound, "structure_error": structure_err,
         "shallow_z_bound": bound * 2 / (m * n)},
        1e-9,
    )


def trivial_ht_weights(m: int, widths: Sequence[int], n: int, F, variant: str = "unshared"):
    """Deep relu-max weights whose grid tensor a single-channel shallow network reproduces.

    ``unshared``: odd locations carry ``F^{-1} 1`` and all-ones mixing, even
    locations zero; the deep tensor equals ``prod(widths)`` everywhere and the
    shallow realizer (relu-max) puts ``F^{-1} (prod(widths) 1)`` at location 1.

    ``cross-product``: same deep weights; the shallow realizer uses product
    pooling with ``F^{-1} 1`` at locations ``> 1``.

    ``shared``: leaf ``F^{-1} [1..M]``, all-ones mixing; the deep tensor is basic
    with generating vector ``prod(widths) * [1..M]``.

    Returns ``(deep_params, shallow_params)``.
    """
    if not is_power_of_two(n):
        raise ValueError(f"N must be a power of two >= 2, got {n}")
    depth = n.bit_length() - 1
    widths = [int(w) for w in np.atleast_1d(widths)]
    if len(widths) == 1:
        widths = widths * depth
    if len(widths) != depth:
        raise ValueError(f"need {depth} widths")
    total = float(np.prod(widths))
    if variant == "shared":
        leaf = np.tile(solve_f(F, np.arange(1.0, m + 1)), (widths[0], 1))
        levels = [np.ones((widths[l], widths[l - 1])) for l in range(1, depth)]
        deep = SharedHtParams(leaf, levels, np.ones(widths[-1]), n)
        u = total * np.arange(1.0, m + 1)
        return deep, basic_realizer(u, n, F)
    if variant not in ("unshared", "cross-product"):
        raise ValueError(f"unknown variant {variant!r}")
    odd = np.arange(n) % 2 == 0  # 0-based even offset == 1-based odd location
    leaf = np.zeros((n, widths[0], m))
    leaf[odd] = solve_f(F, np.ones(m))
    levels = []
    for l in range(1, depth):
        w = np.zeros((n >> l, widths[l], widths[l - 1]))
        w[np.arange(n >> l) % 2 == 0] = 1.0
        levels.append(w)
    deep = HtParams(leaf, levels, np.ones(widths[-1]))
    profile = np.full(m, total)
    return deep, first_mode_realizer(profile, n, F, variant)


def first_mode_realizer(profile, n: int, F, variant: str = "unshared") -> CpParams:
    """Z=1 CP reproducing a tensor that depends only on its first index via ``profile``.

    relu-max: exact when ``profile >= 0``; product: exact for any ``profile``.
    """
    m = len(profile)
    conv = np.zeros((1, n, m))
    conv[0, 0] = solve_f(F, np.asarray(profile, dtype=np.float64))
    if variant == "cross-product":
        conv[0, 1:] = solve_f(F, np.ones(m))
    return CpParams(conv, np.ones(1))


def basic_realizer(u, n: int, F) -> CpParams:
    """Z=1 relu-max CP for the basic tensor generated by ``u``."""
    conv = np.tile(solve_f(F, np.asarray(u, dtype=np.float64)), (1, n, 1))
    return CpParams(conv, np.ones(1))


def is_basic(A, g="relu-max", tol: float = 1e-9):
    """Generating vector ``u`` if ``A == u (x)_g ... (x)_g u`` under relu-max, else ``None``.

    The candidate is read off the diagonal, ``u_d = A[d, ..., d]``, clipped at
    zero (negative entries are invisible to ``max(., 0)``).
    """
    if get_operator(g) is not PoolOperator.RELU_MAX:
        raise ValueError("basic tensors are defined for relu-max")
    A = np.asarray(A, dtype=np.float64)
    m = A.shape[0]
    if any(d != m for d in A.shape):
        raise ValueError("all modes must share one dimension")
    u = np.maximum(A[(np.arange(m),) * A.ndim], 0.0)
    rebuilt = u
    for _ in range(A.ndim - 1):
        rebuilt = np.maximum.outer(rebuilt, u)
    rebuilt = np.maximum(rebuilt, 0.0)
    return u if np.max(np.abs(rebuilt - A)) <= tol else None


def _perturbed(params, rng, eps: float):
    noisy = lambda a: a + rng.uniform(-eps, eps, np.shape(a))
    if isinstance(params, SharedHtParams):
        return SharedHtParams(noisy(params.leaf), [noisy(w) for w in params.levels], noisy(params.output), params.n)
    return HtParams(noisy(params.leaf), [noisy(w) for w in params.levels], noisy(params.output))


def certify_incompleteness(
    m: int,
    widths,
    n: int,
    F,
    variant: str = "unshared",
    seeds: int = 20,
    eps: float = 1e-3,
    seed: int = 0,
) -> Certificate:
    """Exact Z=1 realization of the trivial deep tensor, before and after perturbation.

    Each perturbation adds ``U[-eps, eps]`` noise to every deep weight and to
    ``F``; the shallow realizer keeps the unperturbed ``F`` and is re-solved
    from the perturbed deep tensor.  A failing seed is retried once at
    ``eps / 2``.
    """
    F = np.asarray(F, dtype=np.float64)
    deep, shallow = trivial_ht_weights(m, widths, n, F, variant)
    shallow_g = PoolOperator.PRODUCT if variant == "cross-product" else PoolOperator.RELU_MAX
    claim = {
        "unshared": "relu-max-depth-eff-incomplete",
        "cross-product": "relu-max-depth-eff-incomplete-cross",
        "shared": "relu-max-depth-eff-incomplete-shared",
    }[variant]
    deep_t = generalized_ht(deep, F, PoolOperator.RELU_MAX)
    exact_err = float(np.max(np.abs(deep_t - generalized_cp(shallow, F, shallow_g))))
    rng = np.random.default_rng(seed)

    def one(eps_now):
        noisy_deep = _perturbed(deep, rng, eps_now)
        noisy_F = F + rng.uniform(-eps_now, eps_now, F.shape)
        t = generalized_ht(noisy_deep, noisy_F, PoolOperator.RELU_MAX)
        rank = numerical_rank(matricize(t)).rank
        if variant == "shared":
            u = is_basic(t)
            if u is None:
                return rank, np.inf
            realizer = basic_realizer(u, n, F)
        else:
            realizer = first_mode_realizer(t[(slice(None),) + (0,) * (n - 1)], n, F, variant)
        err = float(np.max(np.abs(t - generalized_cp(realizer, F, shallow_g))))
        return rank, err

    ranks, errors, retried = [], [], 0
    for _ in range(seeds):
        rank, err = one(eps)
        if err > 1e-6 or (variant != "shared" and rank != 1):
            retried += 1
            rank, err = one(eps / 2)
        ranks.append(rank)
        errors.append(err)
    rank_ok = variant == "shared" or all(r == 1 for r in ranks)
    passed = exact_err <= 1e-9 and max(errors) <= 1e-6 and rank_ok
    return Certificate(
        claim,
        passed,
        {
            "exact_error": exact_err,
            "max_perturbed_error": max(errors),
            "perturbed_ranks": sorted(set(ranks)),
            "seeds": seeds,
            "eps": eps,
            "retried": retried,
        },
        1e-6,
    )
