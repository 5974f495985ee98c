"""Componentwise ranks and the sub-sampled rank-grid estimator.

For a sub-sample of m observations the d rank columns are permutations of
1..m, so the m rank vectors are pairwise distinct and the indicator array
over {1..m}^d holds exactly m ones.  Estimation therefore reduces to
counting (subset, observation) incidences per cell and dividing by
m * (#subsets): unordered subsets suffice because the indicator is symmetric
in the sub-sample's observations, so enumerating the m! orderings of each
subset would be pure waste.

Sub-sample enumeration is blocked and fully vectorized: for each block we
gather the pre-computed integer rank matrix, re-rank inside the block with a
double argsort, flatten rank vectors to mixed-radix cell indices and
bincount.  Random sub-sampling draws each block from its own seed stream
``SeedSequence(seed).spawn(...)[block]``, so results are bit-identical for
any worker count or block schedule.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .grid import DENSE_CELL_LIMIT, RankGrid

BLOCK_SIZE = 4096
DEFAULT_ENUMERATION_CAP = 10**8


class TiesDetected(ValueError):
    """A column contains duplicated values under the reject tie policy."""

    def __init__(self, column: int, value: float) -> None:
        super().__init__(f"ties detected in column {column} at value {value!r}")
        self.column = column
        self.value = value


class EnumerationTooLarge(ValueError):
    """C(n, m) exceeds the configured exhaustive-enumeration cap."""

    def __init__(self, n_subsets: int, cap: int) -> None:
        super().__init__(f"C(n, m) = {n_subsets} exceeds the enumeration cap {cap}")
        self.n_subsets = n_subsets
        self.cap = cap


@dataclass(frozen=True)
class SampleMatrix:
    """n x d real observations; marginals assumed continuous (no ties)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"SampleMatrix needs a 2-D n x d array, got shape {np.shape(self.values)}")
        if not np.isfinite(v).all():
            raise ValueError("SampleMatrix rejects NaN/inf entries")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_csv(cls, path: str | Path) -> "SampleMatrix":
        """Read one observation per row, one column per dimension.

        A first row that does not parse as floats is treated as a header.
        Empty cells and NaNs are rejected.
        """
        path = Path(path)
        with path.open() as fh:
            first = fh.readline()
            rows: list[list[float]] = []
            try:
                rows.append([float(x) for x in first.strip().split(",")])
            except ValueError:
                pass  # header
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                cells = line.split(",")
                if any(c.strip() == "" for c in cells):
                    raise ValueError(f"empty cell in {path}: {line!r}")
                rows.append([float(x) for x in cells])
        if not rows:
            raise ValueError(f"no data rows in {path}")
        return cls(np.array(rows, dtype=float))

    def to_csv(self, path: str | Path, header: bool = True) -> None:
        path = Path(path)
        with path.open("w") as fh:
            if header:
                fh.write(",".join(f"x{l + 1}" for l in range(self.d)) + "\n")
            for row in self.values:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")


# -- tie policies / strategies -----------------------------------------------


@dataclass(frozen=True)
class Reject:
    """Fail loudly on tied values (the continuous-marginal contract)."""


@dataclass(frozen=True)
class RandomBreak:
    """Break ties uniformly at random with a fixed seed."""

    seed: int = 0


TiePolicy = Reject | RandomBreak


@dataclass(frozen=True)
class Exhaustive:
    """Enumerate all C(n, m) sub-samples."""


@dataclass(frozen=True)
class Random:
    """Draw ``count`` independent uniform m-subsets, seeded."""

    count: int
    seed: int

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError(f"sub-sample count must be >= 1, got {self.count}")


Strategy = Exhaustive | Random


@dataclass(frozen=True)
class EstimatorConfig:
    m: int
    strategy: Strategy = field(default_factory=Exhaustive)
    tie_policy: TiePolicy = field(default_factory=Reject)

    def __post_init__(self) -> None:
        if self.m < 2:
            raise ValueError(f"sub-sample size must be >= 2, got m={self.m}")


def default_subsample_count(m: int, d: int) -> int:
    """Default random sub-sample budget max(1e5, 30 m^d).

    Keeps the expected per-cell hit count b * m^(1-d) at the uniform level
    above the ~30 needed for the binomial-to-normal approximation.
    """
    return max(10**5, 30 * m**d)


# -- ranking -------------------------------------------------------------------


def component_ranks(
    sample: SampleMatrix, tie_policy: TiePolicy = Reject()
) -> np.ndarray:
    """Componentwise ranks, 1-based: each column a permutation of 1..n.

    Rank 1 is the smallest value.  Under ``Reject`` a duplicated value in any
    column raises :class:`TiesDetected`; ``RandomBreak`` resolves ties by a
    seeded uniform shuffle among the tied entries.
    """
    values = sample.values
    n, d = values.shape
    if isinstance(tie_policy, RandomBreak):
        rng = np.random.default_rng(tie_policy.seed)
        jitter = rng.random((n, d))
        ranks = np.empty((n, d), dtype=np.int64)
        for l in range(d):
            o = np.lexsort((jitter[:, l], values[:, l]))
            ranks[o, l] = np.arange(1, n + 1)
        return ranks
    ranks = np.empty((n, d), dtype=np.int64)
    for l in range(d):
        col = values[:, l]
        o = np.argsort(col, kind="stable")
        srt = col[o]
        dup = np.nonzero(srt[1:] == srt[:-1])[0]
        if dup.size:
            raise TiesDetected(l, float(srt[dup[0]]))
        ranks[o, l] = np.arange(1, n + 1)
    return ranks


def subsample_rank_set(
    sample: SampleMatrix,
    subset: Sequence[int],
    tie_policy: TiePolicy = Reject(),
) -> set[tuple[int, ...]]:
    """The m rank vectors of the sub-sample at the given observation indices.

    All m vectors are distinct (every rank column is a permutation); they are
    exactly the cells where the sub-sample's indicator array equals 1.
    """
    idx = np.asarray(subset, dtype=np.int64)
    if idx.ndim != 1 or len(set(idx.tolist())) != idx.size:
        raise ValueError("subset must be distinct observation indices")
    if idx.size < 1 or idx.min() < 0 or idx.max() >= sample.n:
        raise ValueError("subset indices out of range")
    sub = SampleMatrix(sample.values[idx])
    ranks = component_ranks(sub, tie_policy)
    return {tuple(int(x) for x in row) for row in ranks}


# -- vectorized accumulation ---------------------------------------------------


def _rank_blocks(rank_matrix: np.ndarray, subset_block: np.ndarray, m: int) -> np.ndarray:
    """0-based within-subsample ranks for a (B, m) block of index rows."""
    sub = rank_matrix[subset_block]  # (B, m, d)
    order = np.argsort(sub, axis=1)
    ranks = np.empty_like(order)
    np.put_along_axis(
        ranks, order, np.broadcast_to(np.arange(m)[None, :, None], order.shape), axis=1
    )
    return ranks


def _accumulate_dense(rank_matrix, subset_block, m, d, radix, counts) -> None:
    ranks = _rank_blocks(rank_matrix, subset_block, m)
    lin = (ranks * radix).sum(axis=2)
    counts += np.bincount(lin.ravel(), minlength=m**d)


def _accumulate_sparse(rank_matrix, subset_block, m, d, counts: dict) -> None:
    ranks = _rank_blocks(rank_matrix, subset_block, m) + 1
    rows, inv_counts = np.unique(ranks.reshape(-1, d), axis=0, return_counts=True)
    for row, c in zip(rows, inv_counts):
        key = tuple(int(x) for x in row)
        counts[key] = counts.get(key, 0) + int(c)


def _iter_combination_blocks(n: int, m: int, block: int) -> Iterator[np.ndarray]:
    it = itertools.combinations(range(n), m)
    while True:
        chunk = list(itertools.islice(it, block))
        if not chunk:
            return
        yield np.array(chunk, dtype=np.int64)


def estimate_exhaustive(
    sample: SampleMatrix,
    m: int,
    *,
    tie_policy: TiePolicy = Reject(),
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP,
) -> RankGrid:
    """Exact rank-grid estimate over all C(n, m) sub-samples.

    Cell weight = (#incidences at r) / (m C(n, m)); the integer incidence
    counts are kept on the grid so every cell is an exact rational and the
    weights sum to 1 exactly.
    """
    if not 2 <= m <= sample.n:
        raise ValueError(f"need 2 <= m <= n, got m={m}, n={sample.n}")
    n_subsets = math.comb(sample.n, m)
    if n_subsets > enumeration_cap:
        raise EnumerationTooLarge(n_subsets, enumeration_cap)
    rank_matrix = component_ranks(sample, tie_policy) - 1
    d = sample.d
    dense = m**d <= DENSE_CELL_LIMIT
    if dense:
        radix = np.array([m ** (d - 1 - l) for l in range(d)], dtype=np.int64)
        counts = np.zeros(m**d, dtype=np.int64)
        for block in _iter_combination_blocks(sample.n, m, BLOCK_SIZE):
            _accumulate_dense(rank_matrix, block, m, d, radix, counts)
        return RankGrid.from_counts(
            m, d, counts.reshape((m,) * d), m * n_subsets, total_draws=n_subsets
        )
    sparse: dict[tuple[int, ...], int] = {}
    for block in _iter_combination_blocks(sample.n, m, BLOCK_SIZE):
        _accumulate_sparse(rank_matrix, block, m, d, sparse)
    return RankGrid.from_counts(m, d, sparse, m * n_subsets, total_draws=n_subsets)


def _random_subset_block(rng: np.random.Generator, bsize: int, n: int, m: int) -> np.ndarray:
    if m == n:
        return np.broadcast_to(np.arange(n, dtype=np.int64), (bsize, n))
    keys = rng.random((bsize, n))
    # indices of the m smallest iid-uniform keys per row = uniform m-subset
    return np.argpartition(keys, m - 1, axis=1)[:, :m]


def estimate_random(
    sample: SampleMatrix,
    m: int,
    count: int,
    seed: int | np.random.SeedSequence,
    *,
    tie_policy: TiePolicy = Reject(),
    threads: int = 1,
    block_size: int = BLOCK_SIZE,
) -> RankGrid:
    """Rank-grid estimate from ``count`` independent uniform m-subsets.

    Subsets are drawn without replacement inside a subset and with
    replacement across subsets; conditionally on the sample every cell is an
    unbiased estimate of the exhaustive value.  Output depends only on
    (seed, count), never on ``threads`` or ``block_size`` scheduling.
    """
    if not 2 <= m <= sample.n:
        raise ValueError(f"need 2 <= m <= n, got m={m}, n={sample.n}")
    if count < 1:
        raise ValueError(f"sub-sample count must be >= 1, got {count}")
    rank_matrix = component_ranks(sample, tie_policy) - 1
    n, d = sample.n, sample.d
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    n_blocks = (count + block_size - 1) // block_size
    children = ss.spawn(n_blocks)
    dense = m**d <= DENSE_CELL_LIMIT

    if dense:
        radix = np.array([m ** (d - 1 - l) for l in range(d)], dtype=np.int64)

        def run_block(i: int) -> np.ndarray:
            bsize = min(block_size, count - i * block_size)
            rng = np.random.default_rng(children[i])
            block = _random_subset_block(rng, bsize, n, m)
            local = np.zeros(m**d, dtype=np.int64)
            _accumulate_dense(rank_matrix, block, m, d, radix, local)
            return local

        if threads > 1 and n_blocks > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                partials = list(pool.map(run_block, range(n_blocks)))
            counts = np.sum(partials, axis=0)
        else:
            counts = np.zeros(m**d, dtype=np.int64)
            for i in range(n_blocks):
                counts += run_block(i)
        return RankGrid.from_counts(
            m, d, counts.reshape((m,) * d), m * count, total_draws=count
        )

    sparse: dict[tuple[int, ...], int] = {}
    for i in range(n_blocks):
        bsize = min(block_size, count - i * block_size)
        rng = np.random.default_rng(children[i])
        block = _random_subset_block(rng, bsize, n, m)
        _accumulate_sparse(rank_matrix, block, m, d, sparse)
    return RankGrid.from_counts(m, d, sparse, m * count, total_draws=count)


def estimate(sample: SampleMatrix, cfg: EstimatorConfig, *, threads: int = 1) -> RankGrid:
    """Dispatch on the configured strategy."""
    if isinstance(cfg.strategy, Exhaustive):
        return estimate_exhaustive(sample, cfg.m, tie_policy=cfg.tie_policy)
    return estimate_random(
        sample,
        cfg.m,
        cfg.strategy.count,
        cfg.strategy.seed,
        tie_policy=cfg.tie_policy,
        threads=threads,
    )


def pseudo_observations(sample: SampleMatrix, tie_policy: TiePolicy = Reject()) -> np.ndarray:
    """ranks / (n + 1): the sample mapped strictly inside (0, 1)^d."""
    return component_ranks(sample, tie_policy) / (sample.n + 1)
