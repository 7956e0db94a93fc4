"""Coreset selection for thinned particle interactions.

Strategies:
  * `Full` - every particle interacts with every other particle.
  * `KTSplitCompress` - the divide-and-conquer compress recursion over the
    self-balancing halving walk; output size 2^g * sqrt(N).
  * `KTCompress` - the same, followed by one greedy swap-refinement pass
    that exchanges coreset points against the final halve's candidate pool
    to reduce the squared MMD to the full point set.
  * `UniformRandom` - 2^g * ceil(sqrt(N)) indices sampled i.i.d. with
    replacement.
  * `RandomBatch` - a fresh random partition into batches of size p; each
    particle interacts only within its own batch.

The per-iteration selection owns its RNG stream, so selections are
reproducible independently of scheduling.
"""

import math
from dataclasses import dataclass, field
from typing import List, Union

import numpy as np

from . import accel, kernels
from .kernels import KernelSpec


@dataclass(frozen=True)
class Full:
    pass


@dataclass(frozen=True)
class KTSplitCompress:
    kernel: KernelSpec
    g: int = 0
    delta: float = 0.5

    def __post_init__(self):
        _check_kt_fields(self.g, self.delta)


@dataclass(frozen=True)
class KTCompress:
    kernel: KernelSpec
    g: int = 0
    delta: float = 0.5

    def __post_init__(self):
        _check_kt_fields(self.g, self.delta)


@dataclass(frozen=True)
class UniformRandom:
    g: int = 0

    def __post_init__(self):
        if self.g < 0:
            raise ValueError("oversampling exponent g must be nonnegative")


@dataclass(frozen=True)
class RandomBatch:
    p: int

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"batch size must be positive, got {self.p}")


InteractionStrategy = Union[Full, KTSplitCompress, KTCompress, UniformRandom, RandomBatch]


def _check_kt_fields(g: int, delta: float) -> None:
    if g < 0:
        raise ValueError("oversampling exponent g must be nonnegative")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"failure probability delta must lie in (0,1), got {delta}")


@dataclass(frozen=True)
class Coreset:
    """Selected interaction subset: indices into the particle array.

    Indices may repeat (uniform subsampling is with replacement); weights are
    implicitly uniform 1/M.  `full_pair_evals` records kernel-pair
    evaluations against the full particle set spent during selection (the
    swap stage's cached sums), for the cost audit.
    """

    indices: np.ndarray
    full_pair_evals: int = 0

    @property
    def size(self) -> int:
        return int(self.indices.shape[0])


@dataclass(frozen=True)
class BatchPartition:
    """Disjoint index batches covering {0..n-1}; the last may be smaller."""

    batches: List[np.ndarray] = field(default_factory=list)


class ConfigurationError(ValueError):
    """Raised for strategy/particle-count combinations that cannot run."""


def theoretical_delta(n: int) -> float:
    """The (log2 N)^3 / N failure-probability schedule, clipped to (0, 1)."""
    val = math.log2(n) ** 3 / n
    return min(max(val, 1e-12), 0.999)


def _raw_size(g: int, n: int) -> int:
    """2^g * ceil(sqrt(n)), before the never-exceeds-n degeneration."""
    return 2**g * (math.isqrt(n - 1) + 1)


def target_size(strategy: InteractionStrategy, n: int) -> int:
    """Coreset size the strategy produces on n points."""
    if isinstance(strategy, Full):
        return n
    if isinstance(strategy, (KTSplitCompress, KTCompress, UniformRandom)):
        return min(_raw_size(strategy.g, n), n)
    raise ValueError(f"no single coreset size for {strategy!r}")


def _is_power_of_four(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0 and (n.bit_length() - 1) % 2 == 0


def kt_split_halve(points: np.ndarray, kernel: KernelSpec, delta_halve: float, rng: np.random.Generator) -> np.ndarray:
    """Halve an even-length point sequence with the self-balancing walk.

    Returns indices (one per consecutive pair) of the selected half.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < 2 or n % 2:
        raise ValueError(f"halving needs an even number of points >= 2, got {n}")
    if not 0.0 < delta_halve < 1.0:
        raise ValueError("delta_halve must lie in (0,1)")
    gram = kernels.cross(kernel, points, points)
    delta_i = delta_halve / (n // 2)
    log_term = 2.0 * math.log(2.0 / delta_i)
    uniforms = rng.random(n // 2)
    return accel.halve_walk(np.ascontiguousarray(gram), log_term, uniforms)


def compress(points: np.ndarray, kernel: KernelSpec, g: int, delta: float, rng: np.random.Generator):
    """Divide-and-conquer thinning of n = 4^k points down to 2^g * sqrt(n).

    The input is split into 4 consecutive blocks, each compressed
    recursively, and the concatenated result (2^(g+1) sqrt(n) points) is
    halved once.  The failure budget delta is spread over the recursion tree
    by a union bound, geometrically by depth: the 4^l halve calls at depth l
    below the root share a budget of delta * 2^-(l+1), so halves near the
    root (whose imbalance feeds straight into the output) run with the
    tightest thresholds.

    Returns (coreset_indices, final_pool_indices) where the pool is the
    2^(g+1) sqrt(n) input of the final halve (the swap stage's candidates).
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = points.shape[0]
    if not _is_power_of_four(n):
        raise ConfigurationError(
            f"KT thinning needs a power-of-4 particle count; got {n} "
            "(choose N from 4, 16, 64, 256, 1024, 4096, ...)"
        )
    base = 4**g
    if n <= base:
        idx = np.arange(n, dtype=np.intp)
        return idx, idx
    levels = (n.bit_length() - 1) // 2 - g  # log4(n) - g halving levels

    # Bottom-up sweep over the recursion tree.  At each level the blocks are
    # independent, so their halves run as one batched walk per level.
    cores = np.arange(n, dtype=np.intp).reshape(n // base, base)
    pool = cores.reshape(-1)
    for level in range(levels):
        nb, width = cores.shape
        cores = cores.reshape(nb // 4, 4 * width)
        pool = cores[0] if cores.shape[0] == 1 else pool
        blocks = points[cores.reshape(-1)].reshape(nb // 4, 4 * width, -1)
        gram = np.ascontiguousarray(kernels.cross_batch(kernel, blocks))
        m = 4 * width
        depth = levels - 1 - level  # 0 at the root
        delta_halve = delta * 2.0 ** (-(depth + 1)) / 4**depth
        delta_i = delta_halve / (m // 2)
        log_term = 2.0 * math.log(2.0 / delta_i)
        uniforms = rng.random((nb // 4, m // 2))
        kept = accel.halve_walk_batch(gram, log_term, uniforms)
        cores = np.take_along_axis(cores, kept, axis=1)
    return cores[0], pool


def kt_swap_refine(points_full: np.ndarray, candidate_pool: np.ndarray, coreset: Coreset, kernel: KernelSpec) -> Coreset:
    """One greedy exchange pass reducing MMD^2(full set, coreset).

    Each coreset position is scanned against every pool candidate and
    replaced by the minimiser of the squared MMD between the coreset
    empirical measure and the full-input empirical measure, keeping the
    incumbent on ties.  Candidates already holding another coreset position
    are inadmissible, so the refined coreset stays duplicate-free.  Uses
    cached full-set kernel sums S(z).
    """
    points_full = np.asarray(points_full, dtype=np.float64)
    pool = np.asarray(candidate_pool, dtype=np.intp)
    n = points_full.shape[0]
    msize = coreset.size
    pos_of = {int(ix): p for p, ix in enumerate(pool)}
    try:
        core_pos = np.array([pos_of[int(ix)] for ix in coreset.indices], dtype=np.intp)
    except KeyError as exc:
        raise ValueError("coreset must be a subset of the candidate pool") from exc

    pool_pts = points_full[pool]
    kpool = kernels.cross(kernel, pool_pts, pool_pts)
    kdiag = np.diagonal(kpool).copy()
    # S(z) = sum over the full set of k(z, .), cached once: |pool| * n pairs.
    full_sums = kernels.cross(kernel, pool_pts, points_full).sum(axis=1)

    # Minimising MMD^2 over the replacement of position j is equivalent to
    # minimising, over candidates z,
    #   (2/M^2) sum_{a != j} k(z, c_a) + k(z, z)/M^2 - (2/(M n)) S(z).
    colsum = kpool[:, core_pos].sum(axis=1)
    base = kdiag / msize**2 - 2.0 / (msize * n) * full_sums
    occupied = np.zeros(pool.shape[0], dtype=bool)
    occupied[core_pos] = True
    for j in range(msize):
        cur = core_pos[j]
        scores = 2.0 / msize**2 * (colsum - kpool[:, cur]) + base
        incumbent_score = scores[cur]
        scores[occupied] = np.inf
        best = int(np.argmin(scores))
        if incumbent_score <= scores[best]:
            continue
        colsum += kpool[:, best] - kpool[:, cur]
        occupied[cur] = False
        occupied[best] = True
        core_pos[j] = best
    return Coreset(indices=pool[core_pos], full_pair_evals=int(pool.shape[0]) * n)


def select_coreset(strategy: InteractionStrategy, points: np.ndarray, rng: np.random.Generator) -> Coreset:
    """Select the iteration's interaction coreset under the given strategy."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if isinstance(strategy, RandomBatch):
        raise ValueError("RandomBatch produces partitions, not coresets; use rbm_partition")
    if isinstance(strategy, Full) or _raw_size(strategy.g, n) > n:
        return Coreset(indices=np.arange(n, dtype=np.intp))
    if isinstance(strategy, UniformRandom):
        m = target_size(strategy, n)
        return Coreset(indices=rng.integers(0, n, size=m).astype(np.intp))
    idx, pool = compress(points, strategy.kernel, strategy.g, strategy.delta, rng)
    core = Coreset(indices=idx)
    if isinstance(strategy, KTCompress):
        core = kt_swap_refine(points, pool, core, strategy.kernel)
    return core


def rbm_partition(n: int, p: int, rng: np.random.Generator) -> BatchPartition:
    """Uniformly random partition of {0..n-1} into consecutive chunks of size p."""
    if not 1 <= p <= n:
        raise ValueError(f"batch size must satisfy 1 <= p <= n, got p={p}, n={n}")
    perm = rng.permutation(n).astype(np.intp)
    return BatchPartition(batches=[perm[i : i + p] for i in range(0, n, p)])


def integration_error(f_values_full: np.ndarray, coreset: Coreset) -> float:
    """|full-set mean - coreset mean (with multiplicity)| of given f values."""
    vals = np.asarray(f_values_full, dtype=np.float64)
    return float(abs(vals.mean() - vals[coreset.indices].mean()))


def mmd_sq_to_full(points: np.ndarray, indices: np.ndarray, kernel: KernelSpec) -> float:
    """Squared MMD between the coreset and full-set empirical measures."""
    pts = np.asarray(points, dtype=np.float64)
    sub = pts[np.asarray(indices, dtype=np.intp)]
    kcc = kernels.cross(kernel, sub, sub).mean()
    kcf = kernels.cross(kernel, sub, pts).mean()
    kff = kernels.cross(kernel, pts, pts).mean()
    return float(kcc - 2.0 * kcf + kff)
