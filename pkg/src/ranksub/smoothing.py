"""Bernstein/Beta smoothing of a rank grid into densities on [0,1]^d and R^d.

The smoother replaces each grid cell r by a product of Beta(r_l, m - r_l + 1)
densities (the normalized Bernstein polynomials m * b_{m-1, r_l-1}), so the
result is a bona fide copula-scale density: nonnegative everywhere and
integrating to exactly 1 for any normalized grid.  Sampling is the two-stage
mixture draw the construction implies: pick a cell with probability Phat(r),
then draw each coordinate from its Beta.

Marginals are estimated by Gaussian-kernel KDE with the Silverman bandwidth
1.06 sigma_hat n^(-1/5); the kernel CDF is analytic (a mean of normal CDFs)
and its pseudo-inverse is interpolated on a cached grid.  The joint density
on R^d is c_hat(F_hat(x)) prod_l f_hat_l(x_l).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtr

from .engine import SampleMatrix
from .grid import RankGrid

_POINT_CHUNK = 512


def _beta_basis(m: int, x: np.ndarray) -> np.ndarray:
    """Matrix B[i, r-1] = Beta(r, m-r+1) density at x_i = m * b_{m-1,r-1}(x_i)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((x.size, m))
    for r in range(1, m + 1):
        out[:, r - 1] = m * math.comb(m - 1, r - 1) * x ** (r - 1) * (1.0 - x) ** (m - r)
    return out


class SmoothedCopula:
    """Beta-kernel mixture density on [0,1]^d built from a rank grid."""

    def __init__(self, grid: RankGrid) -> None:
        total = grid.total_weight
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"grid is not normalized: total weight {total}")
        self.grid = grid
        self.m = grid.m
        self.d = grid.d
        self._dense_weights: np.ndarray | None = None
        self._sparse_cells: tuple[np.ndarray, np.ndarray] | None = None
        if grid.is_dense or grid.m**grid.d <= 2**20:
            self._dense_weights = grid.weights_dense()
        else:
            items = list(grid.nonzero_items())
            ranks = np.array([r for r, _ in items], dtype=np.int64)
            weights = np.array([w for _, w in items], dtype=float)
            self._sparse_cells = (ranks, weights)

    def density(self, points: np.ndarray) -> np.ndarray:
        """c_hat at points of shape (k, d) (or a single d-vector)."""
        pts = np.asarray(points, dtype=float)
        scalar = pts.ndim == 1
        if scalar:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[1] != self.d:
            raise ValueError(f"points must have shape (k, {self.d})")
        if (pts < 0).any() or (pts > 1).any():
            raise ValueError("points must lie in [0, 1]^d")
        out = np.empty(pts.shape[0])
        for lo in range(0, pts.shape[0], _POINT_CHUNK):
            chunk = pts[lo : lo + _POINT_CHUNK]
            bases = [_beta_basis(self.m, chunk[:, l]) for l in range(self.d)]
            out[lo : lo + chunk.shape[0]] = self._eval_chunk(bases)
        return float(out[0]) if scalar else out

    def _eval_chunk(self, bases: list[np.ndarray]) -> np.ndarray:
        m, d = self.m, self.d
        if self._dense_weights is not None:
            t = self._dense_weights.reshape(-1, m) @ bases[-1].T  # (m^(d-1), k)
            for l in range(d - 2, -1, -1):
                t = t.reshape(m**l, m, -1)
                t = np.einsum("ajk,kj->ak", t, bases[l])
            return t.reshape(-1)
        ranks, weights = self._sparse_cells
        k = bases[0].shape[0]
        prod = np.ones((k, ranks.shape[0]))
        for l in range(d):
            prod *= bases[l][:, ranks[:, l] - 1]
        return prod @ weights

    def sample(
        self, k: int, seed: int | np.random.SeedSequence, *, return_cells: bool = False
    ) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
        """k mixture draws: cell ~ Phat, then coordinate-wise Beta(r_l, m-r_l+1)."""
        if k < 1:
            raise ValueError(f"need k >= 1, got {k}")
        rng = np.random.default_rng(seed)
        m, d = self.m, self.d
        if self._dense_weights is not None:
            flat = self._dense_weights.reshape(-1)
            flat = np.maximum(flat, 0.0)
            flat = flat / flat.sum()
            lin = rng.choice(flat.size, size=k, p=flat)
            cells = np.empty((k, d), dtype=np.int64)
            rem = lin
            for l in range(d - 1, -1, -1):
                cells[:, l] = rem % m + 1
                rem = rem // m
        else:
            ranks, weights = self._sparse_cells
            w = np.maximum(weights, 0.0)
            idx = rng.choice(ranks.shape[0], size=k, p=w / w.sum())
            cells = ranks[idx]
        pts = rng.beta(cells.astype(float), m - cells + 1.0)
        if return_cells:
            return pts, cells
        return pts


def smooth(grid: RankGrid) -> SmoothedCopula:
    """Smooth a normalized rank grid into its Beta-mixture copula density."""
    return SmoothedCopula(grid)


def sample_copula(
    sc: SmoothedCopula, k: int, seed: int | np.random.SeedSequence
) -> np.ndarray:
    """k points of [0,1]^d drawn from the smoothed copula (see ``SmoothedCopula.sample``)."""
    return sc.sample(k, seed)


@dataclass(frozen=True)
class MarginalModel:
    """Gaussian-kernel KDE of one coordinate with analytic CDF and cached inverse."""

    data: np.ndarray
    bandwidth: float
    grid_x: np.ndarray
    grid_cdf: np.ndarray

    def _kernel_mean(self, x, fn) -> np.ndarray | float:
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(xs.size)
        for lo in range(0, xs.size, _POINT_CHUNK):
            chunk = xs[lo : lo + _POINT_CHUNK]
            z = (chunk[:, None] - self.data[None, :]) / self.bandwidth
            out[lo : lo + chunk.size] = fn(z).mean(axis=1)
        return float(out[0]) if np.isscalar(x) or np.ndim(x) == 0 else out

    def density(self, x: np.ndarray | float) -> np.ndarray | float:
        norm_const = self.bandwidth * math.sqrt(2.0 * math.pi)
        return self._kernel_mean(x, lambda z: np.exp(-0.5 * z * z) / norm_const)

    def cdf(self, x: np.ndarray | float) -> np.ndarray | float:
        return self._kernel_mean(x, ndtr)

    def ppf(self, u: np.ndarray | float) -> np.ndarray | float:
        """Pseudo-inverse CDF by monotone interpolation on the cached grid."""
        us = np.atleast_1d(np.asarray(u, dtype=float))
        if (us < 0).any() or (us > 1).any():
            raise ValueError("quantile levels must lie in [0, 1]")
        out = np.interp(us, self.grid_cdf, self.grid_x)
        return float(out[0]) if np.isscalar(u) or np.ndim(u) == 0 else out


def silverman_bandwidth(column: np.ndarray) -> float:
    """1.06 sigma_hat n^(-1/5) with the sample standard deviation."""
    column = np.asarray(column, dtype=float)
    sd = float(column.std(ddof=1)) if column.size > 1 else 0.0
    if sd == 0.0:
        raise ValueError("zero-variance column: kernel bandwidth undefined")
    return 1.06 * sd * column.size ** (-0.2)


def fit_marginals(sample: SampleMatrix, *, inverse_grid_size: int = 2048) -> list[MarginalModel]:
    """Fit one kernel marginal per coordinate (n >= 2 required)."""
    if sample.n < 2:
        raise ValueError(f"need n >= 2 observations, got {sample.n}")
    models = []
    for l in range(sample.d):
        col = np.sort(sample.values[:, l])
        h = silverman_bandwidth(col)
        lo, hi = col[0] - 6.0 * h, col[-1] + 6.0 * h
        grid_x = np.linspace(lo, hi, inverse_grid_size)
        z = (grid_x[:, None] - col[None, :]) / h
        grid_cdf = ndtr(z).mean(axis=1)
        models.append(MarginalModel(data=col, bandwidth=h, grid_x=grid_x, grid_cdf=grid_cdf))
    return models


@dataclass(frozen=True)
class JointDensityModel:
    """Joint density on R^d: smoothed copula composed with kernel marginals."""

    copula: SmoothedCopula
    marginals: list[MarginalModel]

    @property
    def d(self) -> int:
        return self.copula.d

    def density(self, x: np.ndarray) -> np.ndarray | float:
        """c_hat(F_hat_1(x_1), ..., F_hat_d(x_d)) * prod_l f_hat_l(x_l)."""
        pts = np.asarray(x, dtype=float)
        scalar = pts.ndim == 1
        if scalar:
            pts = pts[None, :]
        if pts.shape[1] != self.d:
            raise ValueError(f"points must have {self.d} coordinates")
        u = np.column_stack([self.marginals[l].cdf(pts[:, l]) for l in range(self.d)])
        np.clip(u, 0.0, 1.0, out=u)
        dens = self.copula.density(u)
        for l in range(self.d):
            dens = dens * self.marginals[l].density(pts[:, l])
        return float(dens[0]) if scalar else dens

    def sample(self, k: int, seed: int | np.random.SeedSequence) -> np.ndarray:
        """Synthetic observations: copula draws pushed through the marginal inverses."""
        u = self.copula.sample(k, seed)
        return np.column_stack([self.marginals[l].ppf(u[:, l]) for l in range(self.d)])


def joint_density(model: JointDensityModel, x: np.ndarray) -> np.ndarray | float:
    """Joint density at x (see ``JointDensityModel.density``)."""
    return model.density(x)


def fit_joint_model(
    sample: SampleMatrix,
    m: int,
    b: int,
    seed: int | np.random.SeedSequence,
    *,
    threads: int = 1,
) -> JointDensityModel:
    """Estimate the rank grid (b random sub-samples), smooth it, fit marginals."""
    from .engine import estimate_random

    grid = estimate_random(sample, m, b, seed, threads=threads)
    return JointDensityModel(copula=smooth(grid), marginals=fit_marginals(sample))


def conditional_slice(
    model: JointDensityModel,
    fixed: Mapping[int, float],
    xs: np.ndarray | Sequence[float],
    ys: np.ndarray | Sequence[float],
) -> tuple[tuple[int, int], np.ndarray]:
    """Conditional density over the two free coordinates on a grid.

    ``fixed`` maps 0-based coordinate indices to their conditioning values;
    exactly two coordinates must remain free.  The joint density is evaluated
    on the (xs x ys) mesh with the fixed coordinates substituted and is
    normalized to unit mass on the grid (a conditional density up to
    discretization).  Returns the free coordinate pair and the (len(xs),
    len(ys)) field.
    """
    d = model.d
    fixed = dict(fixed)
    for idx in fixed:
        if not 0 <= idx < d:
            raise ValueError(f"fixed coordinate {idx} out of range for d={d}")
    free = tuple(l for l in range(d) if l not in fixed)
    if len(free) != 2:
        raise ValueError(f"exactly two coordinates must stay free, got {len(free)}")
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    mesh_x, mesh_y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.empty((mesh_x.size, d))
    pts[:, free[0]] = mesh_x.ravel()
    pts[:, free[1]] = mesh_y.ravel()
    for idx, val in fixed.items():
        pts[:, idx] = val
    field = np.asarray(model.density(pts), dtype=float).reshape(len(xs), len(ys))
    total = field.sum()
    if total <= 0.0:
        raise ValueError("conditional slice is identically zero on the grid")
    return free, field / total
