"""Test statistics on rank grids and the Monte-Carlo-calibrated test.

Both statistics depend on the data only through ranks, so under any
continuous independent marginals the null law of the statistic is the one
obtained from standard Gaussian samples; calibration therefore simulates
Gaussians once per (m, d, n, b, statistic, seed, n_sims) and is cached as
JSON.  Thresholds are empirical quantiles of the simulated null draws and
p-values use the add-one rule (1 + #{null >= stat}) / (1 + n_sims), which
never returns an exact zero from finite simulation.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine import SampleMatrix, estimate_random
from .grid import RankGrid, ShapeMismatch
from .nulltheory import independence_pmf, l2_pmf_distance


class NullHasZeroCell(ValueError):
    """The observed grid puts mass on a cell where the null grid is zero."""


def kl_statistic(grid: RankGrid, null_grid: RankGrid) -> float:
    """Kullback-Leibler divergence sum_r Phat(r) log(Phat(r) / P0(r)).

    Convention 0 log 0 = 0; nonnegative, zero iff the grids agree cellwise
    (Gibbs).  Requires P0 > 0 wherever Phat > 0.
    """
    if (grid.m, grid.d) != (null_grid.m, null_grid.d):
        raise ShapeMismatch(
            f"grid shapes differ: ({grid.m},{grid.d}) vs ({null_grid.m},{null_grid.d})"
        )
    total = 0.0
    for r, p in grid.nonzero_items():
        q = null_grid.weight(r)
        if q <= 0.0:
            raise NullHasZeroCell(f"observed mass {p} at {r} where the null grid is zero")
        total += p * math.log(p / q)
    return total


def l2_statistic(grid: RankGrid, null_grid: RankGrid) -> float:
    """The L^2 statistic m^d sum_r (Phat - P0)^2 (same as the grid distance)."""
    return l2_pmf_distance(grid, null_grid)


_STATISTICS = {"kl": kl_statistic, "l2": l2_statistic}


@dataclass(frozen=True)
class NullCalibration:
    """Sorted null draws of one statistic under independence.

    Simulation i uses the derived stream SeedSequence(seed, spawn_key=(i,)),
    so the calibration is reproducible draw by draw and independent of any
    parallel schedule.
    """

    m: int
    d: int
    n: int
    b: int
    seed: int
    statistic_kind: str
    null_draws: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        draws = np.sort(np.asarray(self.null_draws, dtype=float))
        if draws.size < 100:
            raise ValueError(f"need at least 100 null draws, got {draws.size}")
        object.__setattr__(self, "null_draws", draws)

    @property
    def n_sims(self) -> int:
        return int(self.null_draws.size)

    def threshold(self, level: float) -> float:
        """Empirical (1 - level)-quantile: the ceil((1-level) n_sims)-th order stat."""
        if not 0.0 < level < 1.0:
            raise ValueError(f"level must be in (0, 1), got {level}")
        k = math.ceil((1.0 - level) * self.n_sims)
        k = min(max(k, 1), self.n_sims)
        return float(self.null_draws[k - 1])

    def p_value(self, statistic: float) -> float:
        n_ge = int(self.n_sims - np.searchsorted(self.null_draws, statistic, side="left"))
        return (1.0 + n_ge) / (1.0 + self.n_sims)

    # -- persistence ------------------------------------------------------------

    def to_json(self, path: str | Path) -> None:
        payload = {
            "m": self.m,
            "d": self.d,
            "n": self.n,
            "b": self.b,
            "seed": self.seed,
            "statistic_kind": self.statistic_kind,
            "n_sims": self.n_sims,
            "null_draws": self.null_draws.tolist(),
        }
        Path(path).write_text(json.dumps(payload) + "\n")

    @classmethod
    def from_json(cls, path: str | Path) -> "NullCalibration":
        payload = json.loads(Path(path).read_text())
        return cls(
            m=payload["m"],
            d=payload["d"],
            n=payload["n"],
            b=payload["b"],
            seed=payload["seed"],
            statistic_kind=payload["statistic_kind"],
            null_draws=np.asarray(payload["null_draws"], dtype=float),
        )

    def cache_key(self) -> str:
        raw = f"{self.m}-{self.d}-{self.n}-{self.b}-{self.statistic_kind}-{self.seed}-{self.n_sims}"
        return hashlib.sha256(raw.encode()).hexdigest()[:16]


def calibration_cache_path(
    cache_dir: str | Path, m: int, d: int, n: int, b: int, statistic_kind: str, seed: int, n_sims: int
) -> Path:
    raw = f"{m}-{d}-{n}-{b}-{statistic_kind}-{seed}-{n_sims}"
    digest = hashlib.sha256(raw.encode()).hexdigest()[:16]
    return Path(cache_dir) / f"calibration_{statistic_kind}_m{m}_d{d}_n{n}_b{b}_{digest}.json"


def simulated_statistic(
    stream: np.random.SeedSequence, m: int, d: int, n: int, b: int, statistic_kind: str
) -> float:
    """One null draw: Gaussian n x d sample, b random sub-samples, statistic."""
    data_ss, est_ss = stream.spawn(2)
    values = np.random.default_rng(data_ss).standard_normal((n, d))
    grid = estimate_random(SampleMatrix(values), m, b, est_ss)
    return _STATISTICS[statistic_kind](grid, independence_pmf(m, d))


def calibrate_null(
    m: int,
    d: int,
    n: int,
    b: int,
    n_sims: int,
    seed: int,
    statistic_kind: str = "kl",
    *,
    threads: int = 1,
    cache_dir: str | Path | None = None,
) -> NullCalibration:
    """Simulate the null distribution of the statistic under independence.

    With ``cache_dir`` set, a previously computed calibration with the same
    (m, d, n, b, statistic, seed, n_sims) key is loaded instead of rerun.
    """
    if statistic_kind not in _STATISTICS:
        raise ValueError(f"statistic_kind must be one of {sorted(_STATISTICS)}, got {statistic_kind!r}")
    if n < m:
        raise ValueError(f"need n >= m, got n={n}, m={m}")
    if n_sims < 100:
        raise ValueError(f"need n_sims >= 100, got {n_sims}")
    cache_path = None
    if cache_dir is not None:
        cache_path = calibration_cache_path(cache_dir, m, d, n, b, statistic_kind, seed, n_sims)
        if cache_path.exists():
            return NullCalibration.from_json(cache_path)

    streams = [
        np.random.SeedSequence(entropy=seed, spawn_key=(i,)) for i in range(n_sims)
    ]

    def one(i: int) -> float:
        return simulated_statistic(streams[i], m, d, n, b, statistic_kind)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            draws = np.fromiter(pool.map(one, range(n_sims)), dtype=float, count=n_sims)
    else:
        draws = np.fromiter((one(i) for i in range(n_sims)), dtype=float, count=n_sims)
    calib = NullCalibration(
        m=m, d=d, n=n, b=b, seed=seed, statistic_kind=statistic_kind, null_draws=draws
    )
    if cache_path is not None:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        calib.to_json(cache_path)
    return calib


@dataclass(frozen=True)
class TestResult:
    """Observed statistic versus the simulated null.

    reject <=> statistic > threshold_at_level; p_value in (0, 1] by the
    add-one rule.
    """

    statistic: float
    p_value: float
    threshold_at_level: float
    reject: bool
    level: float
    statistic_kind: str
    m: int
    d: int
    n: int
    b: int
    n_sims: int

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "threshold_at_level": self.threshold_at_level,
            "reject": self.reject,
            "level": self.level,
            "statistic_kind": self.statistic_kind,
            "m": self.m,
            "d": self.d,
            "n": self.n,
            "b": self.b,
            "n_sims": self.n_sims,
        }


def independence_test(
    sample: SampleMatrix,
    calibration: NullCalibration,
    level: float = 0.05,
    *,
    estimator_seed: int | np.random.SeedSequence | None = None,
) -> TestResult:
    """Test global independence of the sample's components.

    The sample is estimated with the calibration's (m, b) using random
    sub-sampling (seed defaults to the calibration seed shifted to a
    dedicated stream), the statistic is compared against the simulated
    null, and the decision is taken at the requested level.
    """
    if sample.d != calibration.d or sample.n != calibration.n:
        raise ShapeMismatch(
            f"sample is {sample.n} x {sample.d} but calibration expects "
            f"{calibration.n} x {calibration.d}"
        )
    if estimator_seed is None:
        estimator_seed = np.random.SeedSequence(entropy=calibration.seed, spawn_key=(2**31,))
    grid = estimate_random(sample, calibration.m, calibration.b, estimator_seed)
    stat = _STATISTICS[calibration.statistic_kind](grid, independence_pmf(calibration.m, calibration.d))
    thr = calibration.threshold(level)
    return TestResult(
        statistic=float(stat),
        p_value=calibration.p_value(float(stat)),
        threshold_at_level=thr,
        reject=bool(stat > thr),
        level=level,
        statistic_kind=calibration.statistic_kind,
        m=calibration.m,
        d=calibration.d,
        n=calibration.n,
        b=calibration.b,
        n_sims=calibration.n_sims,
    )
