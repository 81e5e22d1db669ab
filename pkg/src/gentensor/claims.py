"""Registry of claim certificates run by ``gentensor verify``.

Each check takes a seed and returns a :class:`~gentensor.constructions.Certificate`.
Problem sizes are desk scale so that the full suite runs in seconds.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import constructions as cons
from .analysis import approx_gap, numerical_rank, rank_combination_test, rank_histogram
from .constructions import Certificate
from .decompositions import (
    cp_from_tensor,
    generalized_cp,
    generalized_ht,
    ht_from_cp,
    matricized_cp,
    matricized_ht,
    random_cp_params,
    random_ht_params,
    random_shared_cp_params,
    random_shared_ht_params,
    shared_cp,
    shared_ht,
)
from .networks import ReprFamily, build_repr_matrix, wxh_grid_tensor
from .operators import PoolOperator
from .tensor_core import matricize, permute_modes

PRODUCT, RELU_MAX, RELU_SUM = PoolOperator.PRODUCT, PoolOperator.RELU_MAX, PoolOperator.RELU_SUM


def _rng(seed):
    return np.random.default_rng(seed)


def _random_invertible(m, rng):
    return np.eye(m) + 0.3 * rng.uniform(-1, 1, (m, m))


def nondegeneracy_relu(seed):
    rng = _rng(seed)
    worst = np.inf
    for _ in range(10):
        t = rng.standard_normal((4, 3))
        _, _, cert = cons.nondegenerate_reprs(t, "relu", rng)
        worst = min(worst, abs(cert.witnesses["det"]))
    return Certificate("nondegeneracy-relu", worst > 0.0, {"min_abs_det": worst, "draws": 10}, 0.0)


def nondegeneracy_sigmoid(seed):
    rng = _rng(seed)
    dets, alphas = [], []
    for _ in range(10):
        _, _, cert = cons.nondegenerate_reprs(rng.standard_normal((4, 3)), "sigmoid", rng)
        dets.append(abs(cert.witnesses["det"]))
        alphas.append(cert.witnesses["alpha"])
    return Certificate(
        "nondegeneracy-sigmoid", min(dets) >= 1e-8, {"min_abs_det": min(dets), "max_alpha": max(alphas)}, 1e-8
    )


def templates_for_reprs_claim(seed):
    monomials = ReprFamily("custom", functions=[lambda x: np.ones(x.shape[:-1]), lambda x: x[..., 0], lambda x: x[..., 0] ** 2])
    t, F = cons.templates_for_reprs(monomials, 1, seed)
    det = float(np.linalg.det(F))
    return Certificate("templates-for-reprs", abs(det) >= 1e-10, {"det": det}, 1e-10)


def product_universal(seed):
    rng = _rng(seed)
    errs, deep_errs = [], []
    for _ in range(5):
        F = _random_invertible(2, rng)
        A = rng.standard_normal((2, 2, 2))
        errs.append(float(np.max(np.abs(generalized_cp(cp_from_tensor(A, PRODUCT, F), F, PRODUCT) - A))))
        B = rng.standard_normal((2, 2, 2, 2))
        deep = generalized_ht(ht_from_cp(cp_from_tensor(B, PRODUCT, F)), F, PRODUCT)
        deep_errs.append(float(np.max(np.abs(deep - B))))
    worst = max(errs + deep_errs)
    return Certificate(
        "product-universal", worst <= 1e-9, {"shallow_max_error": max(errs), "deep_max_error": max(deep_errs)}, 1e-9
    )


def relu_max_universal(seed):
    rng = _rng(seed)
    F = _random_invertible(2, rng)
    errs = [
        cons.certify_indicator(idx, 2, 4, F).witnesses["max_error"]
        for idx in itertools.product((1, 2), repeat=4)
    ]
    A = rng.standard_normal((2, 2, 2))
    p = cp_from_tensor(A, RELU_MAX, F)
    round_trip = float(np.max(np.abs(generalized_cp(p, F, RELU_MAX) - A)))
    worst = max(max(errs), round_trip)
    return Certificate(
        "relu-max-universal", worst <= 1e-9, {"indicator_max_error": max(errs), "round_trip_error": round_trip}, 1e-9
    )


def relu_avg_nonuniversal(seed):
    rng = _rng(seed)
    m, n_shallow, n_deep = 2, 4, 8
    shallow_ranks = [
        numerical_rank(matricized_cp(random_cp_params(m, n_shallow, 4, rng), np.eye(m), RELU_SUM)).rank
        for _ in range(50)
    ]
    deep_ranks = [
        numerical_rank(matricized_ht(random_ht_params(m, n_deep, [4], rng), np.eye(m), RELU_SUM)).rank
        for _ in range(50)
    ]
    shallow_ceiling, deep_ceiling = 2, 2 * m ** (n_deep // 4)
    return Certificate(
        "relu-avg-nonuniversal",
        max(shallow_ranks) <= shallow_ceiling and max(deep_ranks) <= deep_ceiling,
        {
            "shallow_max_rank": max(shallow_ranks),
            "shallow_ceiling": shallow_ceiling,
            "deep_max_rank": max(deep_ranks),
            "deep_ceiling": deep_ceiling,
            "m": m,
            "n": n_deep,
        },
        0.0,
    )


def relu_avg_wxh_nonuniversal(seed):
    rng = _rng(seed)
    m, n, k = 2, 8, 2
    ceiling = n * m ** (k - 1)
    ranks = []
    for _ in range(20):
        grid = wxh_grid_tensor(rng.uniform(-1, 1, (3, n, m, k)), rng.uniform(-1, 1, 3), _random_invertible(m, rng))
        ranks.append(numerical_rank(matricize(grid)).rank)
    return Certificate("relu-avg-wxh-nonuniversal", max(ranks) <= ceiling, {"max_rank": max(ranks), "ceiling": ceiling}, 0.0)


def fc_universal(seed):
    rng = _rng(seed)
    F = np.array([[1.0, 0.0], [1.0, 1.0]])
    errs = [cons.fc_universal_weights(rng.standard_normal((2, 2, 2)), F, rng)[2].witnesses["max_error"] for _ in range(5)]
    return Certificate("fc-universal", max(errs) <= 1e-9, {"max_error": max(errs), "z": 8}, 1e-9)


def piecewise_affine_lemma(seed):
    rng = _rng(seed)
    worst = 0.0
    for _ in range(20):
        k, d = int(rng.integers(1, 17)), int(rng.integers(1, 5))
        *_, cert = cons.piecewise_affine_interpolate(rng.standard_normal((k, d)), rng.standard_normal(k), rng)
        worst = max(worst, cert.witnesses["relative_residual"])
    _, b, a, _ = cons.piecewise_affine_interpolate([[1.0], [2.0]], [5.0, 7.0])
    worked = bool(np.array_equal(b, [0.0, -1.0]) and np.array_equal(a, [5.0, -3.0]))
    return Certificate("piecewise-affine-lemma", worst <= 1e-8 and worked, {"max_relative_residual": worst, "worked_example": worked}, 1e-8)


def _product_ranks(seed, n, trials=50, shared=False):
    rng = _rng(seed)
    m, r0 = 2, 2
    ranks = []
    for _ in range(trials):
        draw = random_shared_ht_params if shared else random_ht_params
        ranks.append(numerical_rank(matricized_ht(draw(m, n, [r0], rng), np.eye(m), PRODUCT)).rank)
    return ranks, min(r0, m) ** (n // 2)


def product_depth_eff_complete(seed):
    ranks, bound = _product_ranks(seed, 8)
    hits = sum(r >= bound for r in ranks)
    return Certificate(
        "product-depth-eff-complete", hits >= 0.99 * len(ranks), {"hits": hits, "trials": len(ranks), "rank_bound": bound}, 0.99
    )


def product_depth_eff_complete_shared(seed):
    # at N=8 the shared Kronecker squares drive sigma_min/sigma_max below double precision
    ranks, bound = _product_ranks(seed, 4, trials=100, shared=True)
    hits = sum(r >= bound for r in ranks)
    return Certificate(
        "product-depth-eff-complete-shared", hits >= 0.99 * len(ranks), {"hits": hits, "trials": len(ranks), "rank_bound": bound}, 0.99
    )


def product_depth_eff_complete_cross(seed):
    m, n = 2, 8
    ranks, bound = _product_ranks(seed, n)
    z_bound = bound * 2 / (m * n)
    z_below = [z for z in range(0, int(np.ceil(z_bound))) if z < z_bound]
    ceilings = [z * m * n // 2 for z in z_below]
    ok = all(r > max(ceilings) for r in ranks)
    return Certificate(
        "product-depth-eff-complete-cross",
        ok,
        {"min_rank": min(ranks), "shallow_z_bound": z_bound, "max_ceiling_below_bound": max(ceilings)},
        0.0,
    )


def relu_max_depth_eff_exist(seed):
    c1 = cons.certify_depth_eff(2, 2, 4, np.eye(2))
    rng = _rng(seed)
    c2 = cons.certify_depth_eff(3, 3, 8, _random_invertible(3, rng))
    return Certificate(
        "relu-max-depth-eff-exist",
        c1.passed and c2.passed,
        {"rank_m2_n4": c1.witnesses["rank"], "rank_m3_n8": c2.witnesses["rank"], "shallow_z_bound_m3_n8": c2.witnesses["shallow_z_bound"]},
        1e-9,
    )


def relu_max_depth_eff_exist_shared(seed):
    # the witness weights do not depend on location, so they are valid shared weights
    F = _random_invertible(3, _rng(seed))
    p = cons.depth_eff_ht_weights(3, 3, 8, F)
    location_invariant = all(np.array_equal(w, w[:1].repeat(w.shape[0], 0)) for w in [p.leaf] + p.levels)
    cert = cons.certify_depth_eff(3, 3, 8, F)
    return Certificate(
        "relu-max-depth-eff-exist-shared",
        cert.passed and location_invariant,
        {"rank": cert.witnesses["rank"], "location_invariant": location_invariant},
        1e-9,
    )


def relu_max_depth_eff_incomplete(seed):
    return cons.certify_incompleteness(2, [2, 2], 4, np.eye(2), "unshared", seed=seed)


def relu_max_depth_eff_incomplete_cross(seed):
    return cons.certify_incompleteness(2, [2, 2], 4, np.eye(2), "cross-product", seed=seed)


def relu_max_depth_eff_incomplete_shared(seed):
    return cons.certify_incompleteness(3, [2, 2], 4, np.eye(3), "shared", seed=seed)


def approximation_gap(seed):
    m, n = 3, 8
    p = cons.depth_eff_ht_weights(m, m, n, np.eye(m))
    mat = matricized_ht(p, np.eye(m), RELU_MAX)
    bound = m ** (n // 2) * 2 / (m * n)
    z = int(np.ceil(bound)) - 1
    ceiling = z * m * n // 2
    gap = approx_gap(mat, ceiling)
    return Certificate("approximation-gap", gap > 1e-6, {"gap": gap, "shallow_ceiling": ceiling, "z": z}, 1e-6)


def matrix_sum_rank(seed):
    rng = _rng(seed)
    mats = [rng.standard_normal((4, r)) @ rng.standard_normal((r, 4)) for r in (1, 2, 3)]
    res = rank_combination_test(mats, 200, seed)
    return Certificate("matrix-sum-rank", res.passed, {"target_rank": res.target_rank, "min_rank": res.min_rank, "failures": res.failures}, 0.0)


def shared_nonuniversal(seed):
    rng = _rng(seed)
    sym_err, swap_err = 0.0, 0.0
    for _ in range(10):
        F = _random_invertible(2, rng)
        A = shared_cp(random_shared_cp_params(2, 4, 3, rng), F, RELU_MAX)
        for perm in itertools.permutations(range(4)):
            sym_err = max(sym_err, float(np.max(np.abs(permute_modes(A, perm) - A))))
        B = shared_ht(random_shared_ht_params(2, 4, [2], rng), F, RELU_MAX)
        swap_err = max(swap_err, float(np.max(np.abs(permute_modes(B, (2, 3, 0, 1)) - B))))
    return Certificate(
        "shared-nonuniversal", max(sym_err, swap_err) <= 1e-12, {"symmetry_error": sym_err, "half_swap_error": swap_err}, 1e-12
    )


def relu_max_rank_incidence(seed):
    medians = [rank_histogram(3, 3, [r], 200, seed, RELU_MAX).median() for r in (2, 4, 8)]
    increasing = all(a < b for a, b in zip(medians, medians[1:]))
    return Certificate("relu-max-rank-incidence", increasing, {"medians": medians, "trials": 200}, 0.0)


CLAIMS = {
    "nondegeneracy-relu": nondegeneracy_relu,
    "nondegeneracy-sigmoid": nondegeneracy_sigmoid,
    "templates-for-reprs": templates_for_reprs_claim,
    "product-universal": product_universal,
    "relu-max-universal": relu_max_universal,
    "relu-avg-nonuniversal": relu_avg_nonuniversal,
    "relu-avg-wxh-nonuniversal": relu_avg_wxh_nonuniversal,
    "fc-universal": fc_universal,
    "piecewise-affine-lemma": piecewise_affine_lemma,
    "product-depth-eff-complete": product_depth_eff_complete,
    "relu-max-depth-eff-exist": relu_max_depth_eff_exist,
    "relu-max-depth-eff-incomplete": relu_max_depth_eff_incomplete,
    "product-depth-eff-complete-cross": product_depth_eff_complete_cross,
    "relu-max-depth-eff-incomplete-cross": relu_max_depth_eff_incomplete_cross,
    "approximation-gap": approximation_gap,
    "relu-max-rank-incidence": relu_max_rank_incidence,
    "matrix-sum-rank": matrix_sum_rank,
    "shared-nonuniversal": shared_nonuniversal,
    "product-depth-eff-complete-shared": product_depth_eff_complete_shared,
    "relu-max-depth-eff-exist-shared": relu_max_depth_eff_exist_shared,
    "relu-max-depth-eff-incomplete-shared": relu_max_depth_eff_incomplete_shared,
}


def _run(args):
    claim, seed, timing = args
    start = time.perf_counter()
    try:
        cert = CLAIMS[claim](seed)
        passed, witnesses, tol = bool(cert.passed), cert.witnesses, cert.tolerance
    except Exception as exc:  # a crashing certificate is a failing certificate
        passed, witnesses, tol = False, {"error": f"{type(exc).__name__}: {exc}"}, None
    millis = round((time.perf_counter() - start) * 1000.0, 3) if timing else None
    return {
        "claim": claim,
        "pass": passed,
        "witnesses": _jsonable(witnesses),
        "tolerance": tol,
        "seed": seed,
        "millis": millis,
    }


def run_claims(claims, seed: int = 42, jobs: int = 1, timing: bool = False) -> list[dict]:
    """Run the named certificates; report order follows ``claims`` regardless of ``jobs``."""
    unknown = [c for c in claims if c not in CLAIMS]
    if unknown:
        raise KeyError(", ".join(unknown))
    tasks = [(c, seed, timing) for c in claims]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run, tasks))
    return [_run(t) for t in tasks]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if np.isfinite(value) else repr(value)
    return obj
