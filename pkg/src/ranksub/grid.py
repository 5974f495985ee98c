"""The rank grid: a probability mass function over {1..m}^d rank vectors.

A grid is stored either as a dense float array of shape (m,)*d (when
m^d <= DENSE_CELL_LIMIT) or as a sparse dict keyed by rank tuples.  Grids
produced by the estimators additionally carry exact integer incidence
counts with denominator m * total_draws, so small exhaustive computations
(and merges of such grids) stay exact rationals end to end.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

DENSE_CELL_LIMIT = 2**24  # ~128 MiB of float64 weights

RankVector = tuple[int, ...]


class ShapeMismatch(ValueError):
    """Two grids with incompatible (m, d) were combined."""


def _cell_count(m: int, d: int) -> int:
    return m**d


class RankGrid:
    """Nonnegative weight per rank vector r in {1..m}^d, total weight 1.

    Estimator-built grids carry exact integer ``counts`` (incidences) and a
    ``denominator`` (m * total_draws); ``weight(r)`` is the float ratio and
    ``fraction(r)`` the exact one.  Purely theoretical or merged-float grids
    have ``counts is None`` and float weights only.
    """

    def __init__(
        self,
        m: int,
        d: int,
        *,
        counts: np.ndarray | dict[RankVector, int] | None = None,
        denominator: int | None = None,
        weights: np.ndarray | dict[RankVector, float] | None = None,
        total_draws: int | None = None,
    ) -> None:
        if m < 1 or d < 1:
            raise ValueError(f"RankGrid requires m >= 1 and d >= 1, got m={m}, d={d}")
        self.m = int(m)
        self.d = int(d)
        self.total_draws = total_draws
        if counts is not None:
            if denominator is None or denominator <= 0:
                raise ValueError("counts require a positive denominator")
            self._counts = counts
            self.denominator: int | None = int(denominator)
            self._weights = None
        elif weights is not None:
            self._counts = None
            self.denominator = None
            self._weights = weights
        else:
            raise ValueError("RankGrid needs counts or weights")

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_counts(
        cls,
        m: int,
        d: int,
        counts: np.ndarray | dict[RankVector, int],
        denominator: int,
        total_draws: int | None = None,
    ) -> "RankGrid":
        return cls(m, d, counts=counts, denominator=denominator, total_draws=total_draws)

    @classmethod
    def from_weights(
        cls,
        m: int,
        d: int,
        weights: np.ndarray | dict[RankVector, float],
        total_draws: int | None = None,
    ) -> "RankGrid":
        if isinstance(weights, np.ndarray):
            weights = np.asarray(weights, dtype=float).reshape((m,) * d)
        return cls(m, d, weights=weights, total_draws=total_draws)

    @classmethod
    def constant(cls, m: int, d: int) -> "RankGrid":
        """The uniform grid m^-d per cell (dense representation required)."""
        cells = _cell_count(m, d)
        if cells > DENSE_CELL_LIMIT:
            raise ValueError(f"m^d = {cells} exceeds the dense cell limit {DENSE_CELL_LIMIT}")
        return cls(m, d, counts=np.ones((m,) * d, dtype=np.int64), denominator=cells)

    # -- representation -----------------------------------------------------

    @property
    def is_dense(self) -> bool:
        store = self._counts if self._counts is not None else self._weights
        return isinstance(store, np.ndarray)

    @property
    def is_exact(self) -> bool:
        return self._counts is not None

    def weights_dense(self) -> np.ndarray:
        """Float weights as a dense (m,)*d array; cached for exact grids."""
        if self._weights is None:
            if isinstance(self._counts, np.ndarray):
                self._weights = self._counts / float(self.denominator)
            else:
                cells = _cell_count(self.m, self.d)
                if cells > DENSE_CELL_LIMIT:
                    raise ValueError("grid is too large to densify")
                w = np.zeros((self.m,) * self.d, dtype=float)
                for r, c in self._counts.items():
                    w[tuple(ri - 1 for ri in r)] = c / float(self.denominator)
                self._weights = w
        if isinstance(self._weights, np.ndarray):
            return self._weights
        cells = _cell_count(self.m, self.d)
        if cells > DENSE_CELL_LIMIT:
            raise ValueError("grid is too large to densify")
        w = np.zeros((self.m,) * self.d, dtype=float)
        for r, v in self._weights.items():
            w[tuple(ri - 1 for ri in r)] = v
        return w

    def weight(self, r: RankVector) -> float:
        """Weight at rank vector r (1-based components)."""
        self._check_vector(r)
        if self._counts is not None:
            if isinstance(self._counts, np.ndarray):
                return float(self._counts[tuple(ri - 1 for ri in r)]) / self.denominator
            return self._counts.get(tuple(r), 0) / self.denominator
        if isinstance(self._weights, np.ndarray):
            return float(self._weights[tuple(ri - 1 for ri in r)])
        return float(self._weights.get(tuple(r), 0.0))

    def fraction(self, r: RankVector) -> Fraction:
        """Exact weight at r; requires an exact (counts-backed) grid."""
        if self._counts is None:
            raise ValueError("grid has no exact counts")
        self._check_vector(r)
        if isinstance(self._counts, np.ndarray):
            c = int(self._counts[tuple(ri - 1 for ri in r)])
        else:
            c = self._counts.get(tuple(r), 0)
        return Fraction(c, self.denominator)

    def _check_vector(self, r: RankVector) -> None:
        if len(r) != self.d or any(not 1 <= ri <= self.m for ri in r):
            raise ValueError(f"rank vector {r} not in {{1..{self.m}}}^{self.d}")

    def nonzero_items(self) -> Iterator[tuple[RankVector, float]]:
        """Iterate (rank vector, float weight) over cells with weight != 0."""
        if self._counts is not None and not isinstance(self._counts, np.ndarray):
            den = float(self.denominator)
            for r, c in self._counts.items():
                if c:
                    yield r, c / den
            return
        if self._weights is not None and not isinstance(self._weights, np.ndarray):
            for r, v in self._weights.items():
                if v:
                    yield r, v
            return
        w = self.weights_dense()
        for idx in np.argwhere(w != 0.0):
            r = tuple(int(i) + 1 for i in idx)
            yield r, float(w[tuple(idx)])

    @property
    def total_weight(self) -> float:
        if self._counts is not None:
            if isinstance(self._counts, np.ndarray):
                return float(self._counts.sum() / self.denominator)
            return float(sum(self._counts.values()) / self.denominator)
        if isinstance(self._weights, np.ndarray):
            return float(self._weights.sum())
        return float(sum(self._weights.values()))

    def __repr__(self) -> str:
        kind = "exact" if self.is_exact else "float"
        layout = "dense" if self.is_dense else "sparse"
        return f"RankGrid(m={self.m}, d={self.d}, {kind}/{layout}, draws={self.total_draws})"

    # -- I/O ------------------------------------------------------------------

    def to_csv(self, path: str | Path, metadata: Mapping[str, object] | None = None) -> None:
        """Write cells as CSV (r_1..r_d, weight) plus a JSON sidecar.

        Dense grids write every cell; sparse grids only the nonzero ones.
        The sidecar lands next to the CSV with extension ``.json``.
        """
        path = Path(path)
        with path.open("w") as fh:
            fh.write(",".join(f"r_{l + 1}" for l in range(self.d)) + ",weight\n")
            if self.is_dense:
                w = self.weights_dense()
                for idx in np.ndindex(*w.shape):
                    fh.write(",".join(str(i + 1) for i in idx) + f",{float(w[idx])!r}\n")
            else:
                for r, v in sorted(self.nonzero_items()):
                    fh.write(",".join(str(i) for i in r) + f",{float(v)!r}\n")
        side = {
            "m": self.m,
            "d": self.d,
            "total_draws": self.total_draws,
            "total_weight": self.total_weight,
        }
        if metadata:
            side.update(metadata)
        path.with_suffix(".json").write_text(json.dumps(side, indent=2) + "\n")

    @classmethod
    def from_csv(cls, path: str | Path) -> "RankGrid":
        """Read a grid written by :meth:`to_csv` (sidecar supplies m, d)."""
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        m, d = int(meta["m"]), int(meta["d"])
        entries: dict[RankVector, float] = {}
        with path.open() as fh:
            next(fh)
            for line in fh:
                parts = line.strip().split(",")
                r = tuple(int(p) for p in parts[:d])
                entries[r] = float(parts[d])
        if _cell_count(m, d) <= DENSE_CELL_LIMIT:
            w = np.zeros((m,) * d)
            for r, v in entries.items():
                w[tuple(ri - 1 for ri in r)] = v
            return cls.from_weights(m, d, w, total_draws=meta.get("total_draws"))
        return cls.from_weights(m, d, entries, total_draws=meta.get("total_draws"))


def merge_grids(grids: list[RankGrid]) -> RankGrid:
    """Draw-count-weighted average of compatible grids.

    Exact when every input carries integer counts (the counts simply add);
    otherwise a float average, commutative up to ~1e-12 reassociation.
    """
    if not grids:
        raise ValueError("merge_grids needs at least one grid")
    m, d = grids[0].m, grids[0].d
    for g in grids[1:]:
        if (g.m, g.d) != (m, d):
            raise ShapeMismatch(f"cannot merge (m={g.m}, d={g.d}) into (m={m}, d={d})")
    if any(g.total_draws is None for g in grids):
        raise ValueError("merge_grids requires total_draws on every grid")
    draws = sum(g.total_draws for g in grids)

    if all(g.is_exact for g in grids):
        # exact path: denominators are m * draws, so counts add directly
        if all(g.denominator == m * g.total_draws for g in grids):
            if all(g.is_dense for g in grids):
                counts = np.zeros((m,) * d, dtype=np.int64)
                for g in grids:
                    counts += g._counts
                return RankGrid.from_counts(m, d, counts, m * draws, total_draws=draws)
            acc: dict[RankVector, int] = {}
            for g in grids:
                if isinstance(g._counts, np.ndarray):
                    items = (
                        (tuple(int(i) + 1 for i in idx), int(g._counts[tuple(idx)]))
                        for idx in np.argwhere(g._counts != 0)
                    )
                else:
                    items = g._counts.items()
                for r, c in items:
                    acc[r] = acc.get(r, 0) + c
            return RankGrid.from_counts(m, d, acc, m * draws, total_draws=draws)

    if all(g.is_dense or g.is_exact for g in grids) and _cell_count(m, d) <= DENSE_CELL_LIMIT:
        w = np.zeros((m,) * d)
        for g in grids:
            w += g.total_draws * g.weights_dense()
        return RankGrid.from_weights(m, d, w / draws, total_draws=draws)

    acc_f: dict[RankVector, float] = {}
    for g in grids:
        for r, v in g.nonzero_items():
            acc_f[r] = acc_f.get(r, 0.0) + g.total_draws * v
    return RankGrid.from_weights(m, d, {r: v / draws for r, v in acc_f.items()}, total_draws=draws)
