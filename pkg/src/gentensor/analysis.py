"""Numerical rank, low-rank approximation gaps and Monte Carlo rank experiments."""

from __future__ import annotations

import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decompositions import matricized_ht, random_ht_params
from .operators import get_operator
from .tensor_core import as_matrix, check_size

RANK_FLOOR = 1e-12


@dataclass(frozen=True)
class RankResult:
    rank: int
    singular_values: np.ndarray
    tolerance: float


def numerical_rank(m, tol: float | None = None) -> RankResult:
    """Count singular values above ``tol``.

    The default tolerance is ``max(rows, cols) * eps * sigma_max`` with an
    absolute floor of ``1e-12``.
    """
    m = as_matrix(m)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    s = np.linalg.svd(m, compute_uv=False)
    if tol is None:
        sigma_max = float(s[0]) if s.size else 0.0
        tol = max(max(m.shape) * np.finfo(np.float64).eps * sigma_max, RANK_FLOOR)
    return RankResult(int(np.sum(s > tol)), s, float(tol))


def approx_gap(m, r: int) -> float:
    """Squared Frobenius distance from ``m`` to the nearest matrix of rank <= ``r``."""
    m = as_matrix(m)
    if not 0 <= r <= min(m.shape):
        raise ValueError(f"r must lie in [0, {min(m.shape)}], got {r}")
    s = np.linalg.svd(m, compute_uv=False)
    return float(np.sum(s[r:] ** 2))


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Independent per-trial generator derived from ``(seed, index)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


@dataclass
class Histogram:
    levels: int
    m: int
    widths: tuple
    trials: int
    seed: int
    operator: str
    f: str = "identity"
    bins: dict = field(default_factory=dict)
    ranks: list = field(default_factory=list)
    spectra: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return 2**self.levels

    def median(self) -> float:
        return float(np.median(self.ranks))

    def fraction_above(self, rank: float) -> float:
        return float(np.mean(np.asarray(self.ranks) > rank))

    def config(self) -> dict:
        return {
            "levels": self.levels,
            "n": self.n,
            "m": self.m,
            "widths": ",".join(str(w) for w in self.widths),
            "trials": self.trials,
            "seed": self.seed,
            "operator": self.operator,
            "f": self.f,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, value in self.config().items():
            buf.write(f"# {key}={value}\n")
        buf.write("rank,count\n")
        for rank in sorted(self.bins):
            buf.write(f"{rank},{self.bins[rank]}\n")
        return buf.getvalue()

    def spectra_csv(self) -> str:
        buf = io.StringIO()
        buf.write("trial,rank,singular_values\n")
        for t, (rank, s) in enumerate(zip(self.ranks, self.spectra)):
            buf.write(f"{t},{rank},{' '.join(repr(float(v)) for v in s)}\n")
        return buf.getvalue()


def _one_trial(args):
    seed, index, levels, m, widths, operator, F = args
    rng = trial_rng(seed, index)
    p = random_ht_params(m, 2**levels, widths, rng)
    res = numerical_rank(matricized_ht(p, F, operator))
    return res.rank, res.singular_values


def rank_histogram(
    levels: int,
    m: int,
    widths: Sequence[int],
    trials: int,
    seed: int,
    operator="relu-max",
    F=None,
    f_label: str = "identity",
    jobs: int = 1,
    max_elements: int | None = None,
) -> Histogram:
    """Histogram of matricized HT ranks under weights drawn from ``U[-1, 1]``.

    Trial ``t`` draws from :func:`trial_rng` ``(seed, t)``, so bins do not depend
    on ``jobs`` or on the order in which trials run.
    """
    g = get_operator(operator)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    n = 2**levels
    side = m ** (n // 2)
    check_size(side * side, max_elements)
    F = np.eye(m) if F is None else as_matrix(F)
    widths = tuple(int(w) for w in np.atleast_1d(widths))
    if len(widths) == 1:
        widths = widths * levels
    tasks = [(seed, t, levels, m, widths, g, F) for t in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_one_trial, tasks, chunksize=max(1, trials // (4 * jobs))))
    else:
        results = [_one_trial(t) for t in tasks]
    hist = Histogram(levels, m, widths, trials, seed, g.value, f_label)
    for rank, s in results:
        hist.bins[rank] = hist.bins.get(rank, 0) + 1
        hist.ranks.append(rank)
        hist.spectra.append(s)
    return hist


@dataclass(frozen=True)
class CombinationResult:
    passed: bool
    target_rank: int
    min_rank: int
    failures: int
    trials: int


def rank_combination_test(matrices: Sequence, trials: int, seed: int) -> CombinationResult:
    """Check ``rank(sum_i alpha_i A_i) >= max_i rank(A_i)`` for random ``alpha ~ U[-1,1]^m``."""
    mats = [as_matrix(a) for a in matrices]
    if not mats:
        raise ValueError("need at least one matrix")
    if any(a.shape != mats[0].shape for a in mats):
        raise ValueError("all matrices must have the same shape")
    stack = np.stack(mats)
    target = max(numerical_rank(a).rank for a in mats)
    rng = np.random.default_rng(seed)
    ranks = []
    for _ in range(trials):
        alpha = rng.uniform(-1.0, 1.0, len(mats))
        ranks.append(numerical_rank(np.tensordot(alpha, stack, axes=1)).rank)
    failures = sum(r < target for r in ranks)
    return CombinationResult(failures == 0, target, min(ranks) if ranks else target, failures, trials)
