"""Seeded generators for every simulated data-generating process.

All processes produce iid observations (rows), which is what lets the
Monte Carlo oracles draw R m-samples as one (R*m, d) block.  Marginals are
continuous, so rank ties occur with probability zero.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .engine import SampleMatrix

GeneratorKind = Literal[
    "independent_gaussian",
    "polynomial",
    "random_volatility",
    "comonotone",
    "sphere_noise",
    "gaussian_copula",
]


@dataclass(frozen=True)
class GeneratorSpec:
    """One simulated process: which kind, its parameters, shape, and seed.

    polynomial         x2 = coef * x1^p + eps; x1, eps and all other
                       coordinates independent standard Gaussian (d >= 2)
    random_volatility  per observation V ~ lognormal(0, a) with a the
                       log-scale standard deviation; coordinates <= dep_dim
                       are N(0, V) (V a variance), the rest N(0, 1)
    comonotone         every coordinate equals one shared N(0, 1) draw
    sphere_noise       a * N1/|N1| + N2 with N1, N2 independent standard
                       Gaussian d-vectors (noisy uniform sphere of radius a)
    gaussian_copula    equicorrelated Gaussian with correlation rho
    """

    kind: GeneratorKind
    n: int
    d: int
    seed: int = 0
    p: int = 1
    coef: float = 0.5
    a: float = 0.0
    dep_dim: int = 2
    rho: float = 0.0

    def __post_init__(self) -> None:
        if self.n < 1 or self.d < 1:
            raise ValueError(f"need n >= 1 and d >= 1, got n={self.n}, d={self.d}")
        if self.kind == "polynomial":
            if self.d < 2:
                raise ValueError("polynomial dependence requires d >= 2")
            if self.p < 1:
                raise ValueError(f"polynomial power must be >= 1, got {self.p}")
        elif self.kind == "random_volatility":
            if not 2 <= self.dep_dim <= self.d:
                raise ValueError(f"need 2 <= dep_dim <= d, got dep_dim={self.dep_dim}, d={self.d}")
            if self.a < 0:
                raise ValueError(f"volatility scale must be >= 0, got {self.a}")
        elif self.kind == "sphere_noise":
            if self.a < 0:
                raise ValueError(f"sphere radius must be >= 0, got {self.a}")
        elif self.kind == "gaussian_copula":
            if not -1.0 < self.rho < 1.0:
                raise ValueError(f"need |rho| < 1, got {self.rho}")
            if self.d > 1 and 1.0 + (self.d - 1) * self.rho <= 0.0:
                raise ValueError(f"equicorrelation rho={self.rho} is singular at d={self.d}")
        elif self.kind not in ("independent_gaussian", "comonotone"):
            raise ValueError(f"unknown generator kind {self.kind!r}")

    def with_shape(self, n: int | None = None, d: int | None = None) -> "GeneratorSpec":
        return replace(self, n=self.n if n is None else n, d=self.d if d is None else d)


def draw_rows(spec: GeneratorSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw ``count`` iid observations using the supplied generator state."""
    d = spec.d
    if spec.kind == "independent_gaussian":
        return rng.standard_normal((count, d))
    if spec.kind == "polynomial":
        x = rng.standard_normal((count, d))
        eps = rng.standard_normal(count)
        x[:, 1] = spec.coef * x[:, 0] ** spec.p + eps
        return x
    if spec.kind == "random_volatility":
        x = rng.standard_normal((count, d))
        if spec.a > 0:
            v = rng.lognormal(mean=0.0, sigma=spec.a, size=count)
            x[:, : spec.dep_dim] *= np.sqrt(v)[:, None]
        return x
    if spec.kind == "comonotone":
        z = rng.standard_normal(count)
        return np.repeat(z[:, None], d, axis=1)
    if spec.kind == "sphere_noise":
        n1 = rng.standard_normal((count, d))
        n2 = rng.standard_normal((count, d))
        norms = np.linalg.norm(n1, axis=1, keepdims=True)
        return spec.a * n1 / norms + n2
    if spec.kind == "gaussian_copula":
        z = rng.standard_normal((count, d))
        if d == 1 or spec.rho == 0.0:
            return z
        cov = np.full((d, d), spec.rho)
        np.fill_diagonal(cov, 1.0)
        return z @ np.linalg.cholesky(cov).T
    raise ValueError(f"unknown generator kind {spec.kind!r}")


def generate(spec: GeneratorSpec) -> SampleMatrix:
    """Deterministic n x d sample: identical spec (incl. seed) => identical matrix."""
    rng = np.random.default_rng(spec.seed)
    return SampleMatrix(draw_rows(spec, rng, spec.n))


def gaussian_copula_density(rho: float, x: np.ndarray) -> float | np.ndarray:
    """Density of the equicorrelated Gaussian copula at points of [0, 1]^d.

    c(u) = phi_Sigma(z) / prod_l phi(z_l) with z = Phi^-1(u) and
    Sigma = (1 - rho) I + rho J.  Smooth on (0, 1)^d; used as the continuous
    oracle for the m -> infinity convergence of the rank-vector law.
    """
    from scipy.stats import norm

    pts = np.asarray(x, dtype=float)
    scalar = pts.ndim == 1
    if scalar:
        pts = pts[None, :]
    d = pts.shape[1]
    if not -1.0 < rho < 1.0 or (d > 1 and 1.0 + (d - 1) * rho <= 0.0):
        raise ValueError(f"equicorrelation rho={rho} is singular at d={d}")
    if (pts <= 0).any() or (pts >= 1).any():
        raise ValueError("points must lie strictly inside (0, 1)^d")
    z = norm.ppf(pts)
    cov = np.full((d, d), rho)
    np.fill_diagonal(cov, 1.0)
    prec = np.linalg.inv(cov)
    _, logdet = np.linalg.slogdet(cov)
    quad = np.einsum("ij,jk,ik->i", z, prec - np.eye(d), z)
    out = np.exp(-0.5 * (logdet + quad))
    return float(out[0]) if scalar else out
