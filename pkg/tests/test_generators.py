import itertools
import math

import numpy as np
import pytest

from ranksub import (
    GeneratorSpec,
    comonotone_pmf,
    estimate_exhaustive,
    gaussian_copula_density,
    generate,
)


def test_determinism():
    spec = GeneratorSpec(kind="polynomial", n=50, d=3, seed=123, p=2)
    a = generate(spec).values
    b = generate(spec).values
    assert (a == b).all()
    c = generate(GeneratorSpec(kind="polynomial", n=50, d=3, seed=124, p=2)).values
    assert not (a == c).all()


@pytest.mark.parametrize(
    "spec,gaussian_cols",
    [
        (GeneratorSpec(kind="independent_gaussian", n=100_000, d=3, seed=1), [0, 1, 2]),
        (GeneratorSpec(kind="polynomial", n=100_000, d=3, seed=2, p=2), [0, 2]),
        (GeneratorSpec(kind="random_volatility", n=100_000, d=4, seed=3, a=1.0, dep_dim=2), [2, 3]),
    ],
)
def test_declared_gaussian_marginals(spec, gaussian_cols):
    values = generate(spec).values
    n = spec.n
    for l in gaussian_cols:
        col = values[:, l]
        assert abs(col.mean()) < 4 / math.sqrt(n)
        assert abs(col.var(ddof=1) - 1.0) < 4 * math.sqrt(2 / n)


def test_polynomial_residual_uncorrelated():
    spec = GeneratorSpec(kind="polynomial", n=100_000, d=2, seed=4, p=2, coef=0.5)
    values = generate(spec).values
    resid = values[:, 1] - 0.5 * values[:, 0] ** 2
    corr = np.corrcoef(values[:, 0], resid)[0, 1]
    assert abs(corr) < 4 / math.sqrt(spec.n)


def test_polynomial_matches_figure_model_family():
    # 30 observations of Y = 0.5 X^2 + eps with standard Gaussian X, eps
    spec = GeneratorSpec(kind="polynomial", n=30, d=2, seed=5, p=2, coef=0.5)
    sample = generate(spec)
    assert sample.values.shape == (30, 2)
    # the quadratic signal is visible: corr(X^2, Y) strongly positive
    x, y = sample.values[:, 0], sample.values[:, 1]
    assert np.corrcoef(x**2, y)[0, 1] > 0.2


def test_random_volatility_a0_degenerates_to_independent():
    dep = generate(GeneratorSpec(kind="random_volatility", n=500, d=3, seed=6, a=0.0))
    ind = generate(GeneratorSpec(kind="independent_gaussian", n=500, d=3, seed=6))
    assert (dep.values == ind.values).all()


def test_comonotone_sample_gives_comonotone_grid():
    for m in (2, 4, 6):
        sample = generate(GeneratorSpec(kind="comonotone", n=9, d=2, seed=7))
        grid = estimate_exhaustive(sample, m)
        expected = comonotone_pmf(m)
        for cell in itertools.product(range(1, m + 1), repeat=2):
            assert grid.fraction(cell) == expected.fraction(cell)


def test_sphere_noise_squared_norm():
    # E |a U + N|^2 = a^2 + d; Var = 4 a^2 + 2 d
    spec = GeneratorSpec(kind="sphere_noise", n=10_000, d=5, seed=8, a=6.0)
    values = generate(spec).values
    sq = (values**2).sum(axis=1)
    se = math.sqrt((4 * 36 + 2 * 5) / spec.n)
    assert abs(sq.mean() - 41.0) < 4 * se


def test_gaussian_copula_rho0_is_independent_density():
    pts = np.random.default_rng(9).random((50, 3)) * 0.98 + 0.01
    dens = gaussian_copula_density(0.0, pts)
    assert np.abs(dens - 1.0).max() < 1e-12


def test_gaussian_copula_density_symmetry():
    for u, v in [(0.2, 0.7), (0.45, 0.9), (0.01, 0.99)]:
        a = gaussian_copula_density(0.5, np.array([u, v]))
        b = gaussian_copula_density(0.5, np.array([v, u]))
        assert a == pytest.approx(b, rel=1e-12)


def test_gaussian_copula_density_integrates_to_one():
    # quadrature in z-space: int c(Phi(z)) phi_2(z) dz over R^2 with the
    # *independent* phi factors is exactly int c(u) du after substitution
    from scipy.stats import norm

    nodes, weights = np.polynomial.legendre.leggauss(80)
    lo, hi = -8.5, 8.5
    z = 0.5 * (nodes + 1) * (hi - lo) + lo
    w = 0.5 * weights * (hi - lo)
    zz1, zz2 = np.meshgrid(z, z, indexing="ij")
    pts = np.column_stack([norm.cdf(zz1.ravel()), norm.cdf(zz2.ravel())])
    pts = np.clip(pts, 1e-15, 1 - 1e-15)
    c = gaussian_copula_density(0.5, pts).reshape(len(z), len(z))
    integral = float((np.outer(w, w) * c * norm.pdf(zz1) * norm.pdf(zz2)).sum())
    assert abs(integral - 1.0) < 1e-6


def test_gaussian_copula_rejects_singular_correlation():
    with pytest.raises(ValueError):
        GeneratorSpec(kind="gaussian_copula", n=10, d=3, rho=-0.6)
    with pytest.raises(ValueError):
        gaussian_copula_density(1.0, np.array([0.5, 0.5]))


def test_invalid_specs():
    with pytest.raises(ValueError):
        GeneratorSpec(kind="polynomial", n=10, d=1)
    with pytest.raises(ValueError):
        GeneratorSpec(kind="random_volatility", n=10, d=3, dep_dim=4)
    with pytest.raises(ValueError):
        GeneratorSpec(kind="nonsense", n=10, d=2)  # type: ignore[arg-type]


def test_gaussian_copula_generator_matches_target_correlation():
    spec = GeneratorSpec(kind="gaussian_copula", n=200_000, d=3, seed=11, rho=0.5)
    values = generate(spec).values
    corr = np.corrcoef(values.T)
    off = corr[np.triu_indices(3, 1)]
    assert np.abs(off - 0.5).max() < 0.01
