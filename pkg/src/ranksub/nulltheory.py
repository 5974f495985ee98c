"""Closed-form null objects of the rank grid under independence.

Under globally independent components every rank vector has probability
m^-d, and the grid estimator is a non-degenerate U-statistic whose cellwise
fluctuations are governed by the conditional kernel mean

    h(r, x) = (1/m) prod_l b_{m-1, r_l-1}(x_l)
            + 1/(m (m-1)^(d-1)) prod_l (1 - b_{m-1, r_l-1}(x_l)),

the expected per-cell contribution of an observation pinned at x.  Its
integral is the unconditional m^-d, and in one dimension h is identically
1/m, which forces every covariance (and both limiting moments of the L^2
statistic) to vanish at d = 1.

Writing sigma(r, s) = cov(h(r, X), h(s, X)), the limits of the L^2
statistic T = m^d sum_r (Phat(r) - m^-d)^2 are

    E(T) * n    ->  m^(d+2) sum_r sigma(r, r)
    Var(T) * n^2 -> 2 m^(2d+4) sum_{r,s} sigma(r, s)^2.

`aggregate_moments` evaluates these exactly by factorizing each sum into
per-coordinate sums over the m x m table of Bernstein overlaps (cost
O(m^2 d), never O(m^(2d))); `closed_form_moments` evaluates the closed
forms built from the constants S1, S2.  The two must agree exactly in the
sign-corrected variant.

Sign ambiguity: writing the grand sum over D_22 D_12 with "+R2" instead of
the exact per-coordinate expansion

    sum_{r,s} (1 - 2/m + a)(1/m - a) = m - 3 + 3/m - R2

propagates to "+S2" in the final closed-form variance term where "-S2" is
required.  Both variants are kept: `PRINTED` carries the +S2 form for
comparison and reporting, `SIGN_CORRECTED` is the one that matches the
exact aggregation, the quadrature oracle, and the d = 1 degeneracy (the
+S2 form leaves a spurious 16 S2 at d = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Literal

import numpy as np

from .exact import concordance_integral, s_constants
from .grid import DENSE_CELL_LIMIT, RankGrid, ShapeMismatch

Variant = Literal["printed", "sign_corrected"]
PRINTED: Variant = "printed"
SIGN_CORRECTED: Variant = "sign_corrected"


def _check_variant(variant: str) -> Variant:
    if variant not in (PRINTED, SIGN_CORRECTED):
        raise ValueError(f"variant must be 'printed' or 'sign_corrected', got {variant!r}")
    return variant  # type: ignore[return-value]


# -- null grids ---------------------------------------------------------------


def independence_pmf(m: int, d: int) -> RankGrid:
    """The constant grid m^-d: the rank-vector law under independence."""
    if m < 2 or d < 1:
        raise ValueError(f"independence_pmf requires m >= 2, d >= 1, got m={m}, d={d}")
    if m**d > DENSE_CELL_LIMIT:
        raise ValueError(f"m^d = {m**d} cells exceed the representable size {DENSE_CELL_LIMIT}")
    return RankGrid.constant(m, d)


def comonotone_pmf(m: int) -> RankGrid:
    """d = 2 grid of a comonotone pair: weight 1/m on the diagonal r1 = r2."""
    if m < 2:
        raise ValueError(f"comonotone_pmf requires m >= 2, got {m}")
    counts = np.zeros((m, m), dtype=np.int64)
    np.fill_diagonal(counts, 1)
    return RankGrid.from_counts(m, 2, counts, m)


# -- conditional kernel and covariances ----------------------------------------


def conditional_kernel_mean(r: tuple[int, ...], x: tuple[float, ...] | np.ndarray, m: int) -> float:
    """h(r, x): expected per-cell grid contribution given one observation at x.

    x lives in [0, 1]^d (copula scale).  Integrates to m^-d; constant 1/m
    when d = 1 by the partition of unity.
    """
    if m < 2:
        raise ValueError(f"conditional_kernel_mean requires m >= 2, got m={m}")
    x_arr = np.asarray(x, dtype=float)
    d = len(r)
    if x_arr.shape != (d,):
        raise ValueError(f"x must have the dimension of r ({d}), got shape {x_arr.shape}")
    if (x_arr < 0).any() or (x_arr > 1).any():
        raise ValueError("x must lie in [0, 1]^d")
    if any(not 1 <= ri <= m for ri in r):
        raise ValueError(f"rank vector {r} not in {{1..{m}}}^{d}")
    prod_b = 1.0
    prod_1mb = 1.0
    for ri, xi in zip(r, x_arr):
        b = math.comb(m - 1, ri - 1) * xi ** (ri - 1) * (1.0 - xi) ** (m - ri)
        prod_b *= b
        prod_1mb *= 1.0 - b
    return prod_b / m + prod_1mb / (m * (m - 1) ** (d - 1))


@dataclass(frozen=True)
class CovarianceTerms:
    """The six distinct products in the expansion of sigma(r, s).

    Splitting h - m^-d into (T1, T2, -m^-d) with T1 the prod-b term and T2
    the prod-(1-b) term, D_ij is the integral of the i-th factor of
    h(r, .) times the j-th of h(s, .), signs dropped:

        sigma(r, s) = d11 + 2 d12 + d22 - m^-2d,

    and identically d33 - 2 d13 - 2 d23 = -m^-2d.
    """

    d11: Fraction
    d12: Fraction
    d13: Fraction
    d22: Fraction
    d23: Fraction
    d33: Fraction


def covariance_terms(r: tuple[int, ...], s: tuple[int, ...], m: int, d: int) -> CovarianceTerms:
    """Exact D-terms for rank vectors r, s via per-coordinate overlaps.

    Per coordinate, with a = A(m-1, r_l - 1, s_l - 1) / (2m - 1) the exact
    integral of b_{m-1,r_l-1} b_{m-1,s_l-1}:

        d11 = 1/m^2                    prod_l a
        d12 = 1/(m^2 (m-1)^(d-1))      prod_l (1/m - a)
        d22 = 1/(m^2 (m-1)^(2d-2))     prod_l (1 - 2/m + a)
        d13 = m^-(2d+1),  d23 = (m-1) m^-(2d+1),  d33 = m^-2d.
    """
    if len(r) != d or len(s) != d:
        raise ValueError(f"rank vectors must have length d={d}")
    if m < 2:
        raise ValueError(f"covariance_terms requires m >= 2, got m={m}")
    for v in (r, s):
        if any(not 1 <= vi <= m for vi in v):
            raise ValueError(f"rank vector {v} not in {{1..{m}}}^{d}")
    p1 = p2 = p3 = Fraction(1)
    inv_m = Fraction(1, m)
    for rl, sl in zip(r, s):
        a = concordance_integral(m - 1, rl - 1, sl - 1) / (2 * m - 1)
        p1 *= a
        p2 *= inv_m - a
        p3 *= 1 - 2 * inv_m + a
    mm = m * m
    return CovarianceTerms(
        d11=p1 / mm,
        d12=p2 / (mm * (m - 1) ** (d - 1)),
        d13=Fraction(1, m ** (2 * d + 1)),
        d22=p3 / (mm * (m - 1) ** (2 * d - 2)),
        d23=Fraction(m - 1, m ** (2 * d + 1)),
        d33=Fraction(1, m ** (2 * d)),
    )


def sigma_cov(r: tuple[int, ...], s: tuple[int, ...], m: int, d: int) -> Fraction:
    """sigma(r, s) = cov(h(r, X), h(s, X)) = d11 + 2 d12 + d22 - m^-2d, exact."""
    t = covariance_terms(r, s, m, d)
    return t.d11 + 2 * t.d12 + t.d22 - t.d33


# -- limiting moments -----------------------------------------------------------


@dataclass(frozen=True)
class NullMoments:
    """Exact limits of E(T) * n and Var(T) * n^2 under independence."""

    m: int
    d: int
    mean_limit: Fraction
    var_limit: Fraction
    variant: Variant

    def as_floats(self) -> tuple[float, float]:
        return float(self.mean_limit), float(self.var_limit)


def aggregate_moments(m: int, d: int) -> NullMoments:
    """Moments by exact aggregation of sigma over the grid, factorized.

    sigma(r, s) is a sum of four coordinate-product terms, so every grid
    sum splits into d-th powers of per-coordinate sums over the m x m table
    a(j, k) = A(m-1, j, k)/(2m-1):

        sum_r sigma(r, r)        from the three diagonal sums,
        sum_{r,s} sigma(r, s)^2  from the ten pairwise product sums.

    Cost O(m^2) exact rationals; always equals the sign-corrected closed form.
    """
    if m < 2 or d < 1:
        raise ValueError(f"aggregate_moments requires m >= 2, d >= 1, got m={m}, d={d}")
    inv_m = Fraction(1, m)
    a = [
        [concordance_integral(m - 1, j, k) / (2 * m - 1) for k in range(m)]
        for j in range(m)
    ]
    factors: list[Callable[[int, int], Fraction]] = [
        lambda j, k: a[j][k],
        lambda j, k: inv_m - a[j][k],
        lambda j, k: 1 - 2 * inv_m + a[j][k],
        lambda j, k: Fraction(1),
    ]
    coefs = [
        Fraction(1, m * m),
        Fraction(2, m * m * (m - 1) ** (d - 1)),
        Fraction(1, m * m * (m - 1) ** (2 * d - 2)),
        -Fraction(1, m ** (2 * d)),
    ]
    diag = [sum(f(j, j) for j in range(m)) for f in factors]
    mean_sum = sum(c * s**d for c, s in zip(coefs, diag))
    mean_limit = Fraction(m) ** (d + 2) * mean_sum

    pair = [
        [
            sum(factors[i](j, k) * factors[q](j, k) for j in range(m) for k in range(m))
            for q in range(4)
        ]
        for i in range(4)
    ]
    var_sum = sum(coefs[i] * coefs[q] * pair[i][q] ** d for i in range(4) for q in range(4))
    var_limit = 2 * Fraction(m) ** (2 * d + 4) * var_sum
    return NullMoments(m=m, d=d, mean_limit=mean_limit, var_limit=var_limit, variant=SIGN_CORRECTED)


def closed_form_moments(m: int, d: int, variant: Variant = SIGN_CORRECTED) -> NullMoments:
    """Published closed forms of the limiting moments, exact rationals.

    The mean formula is variant-independent.  The variance's final term is
    8 (m-1)^3 ((m^3 - 3m^2 + 3m -+ S2)/(m-1)^3)^d with "+S2" in the printed
    variant and "-S2" in the sign-corrected one; only the latter vanishes
    at d = 1 and matches :func:`aggregate_moments`.
    """
    variant = _check_variant(variant)
    if m < 2 or d < 1:
        raise ValueError(f"closed_form_moments requires m >= 2, d >= 1, got m={m}, d={d}")
    sc = s_constants(m)
    s1, s2 = sc.s1, sc.s2
    mm = Fraction(m)
    mean = (
        s1**d
        - mm**2
        + (m - 1) ** 2 * ((mm**2 - 2 * m + s1) / (m - 1) ** 2) ** d
        + 2 * (m - 1) * ((mm - s1) / (m - 1)) ** d
    )
    last_num = mm**3 - 3 * mm**2 + 3 * m + (s2 if variant == PRINTED else -s2)
    var = (
        2 * s2**d
        - 2 * mm**4
        + 2 * (m - 1) ** 4 * ((mm**4 - 4 * mm**3 + 6 * mm**2 - 4 * m + s2) / (m - 1) ** 4) ** d
        + 12 * (m - 1) ** 2 * ((mm**2 - 2 * m + s2) / (m - 1) ** 2) ** d
        + 8 * (m - 1) * ((mm - s2) / (m - 1)) ** d
        + 8 * (m - 1) ** 3 * (last_num / (m - 1) ** 3) ** d
    )
    return NullMoments(m=m, d=d, mean_limit=mean, var_limit=var, variant=variant)


def variance_approx(m: int, d: int) -> float:
    """Large-m variance approximation 2 (pi m / 8)^(d/2) + 7 sqrt(pi/2) d sqrt(m).

    Taylor-expanded from the printed closed form, so it tracks the
    `PRINTED` variance (ratio ~0.9 at m = 20), not the corrected one.
    """
    if m < 2:
        raise ValueError(f"variance_approx requires m >= 2, got {m}")
    return 2.0 * math.sqrt(math.pi * m / 8.0) ** d + 7.0 * math.sqrt(math.pi / 2.0) * d * math.sqrt(m)


def linear_variance_part(m: int, d: int) -> float:
    """The linear-in-d part 7 sqrt(pi/2) d sqrt(m) of the variance approximation."""
    return 7.0 * math.sqrt(math.pi / 2.0) * d * math.sqrt(m)


def border_dimension(m: int, variant: Variant = SIGN_CORRECTED, d_max: int = 64) -> int:
    """First dimension at which the exact null variance outgrows half the
    linear part 7 sqrt(pi/2) d sqrt(m).

    Returns min{d >= 1 : var_limit(m, d) / linear(m, d) > 1/2}; beyond this
    d the exponential component of the variance dominates and the
    almost-linear growth regime ends.  The crossing reading is the only
    monotone-consistent one (a sup over d would be unbounded since the
    ratio increases without bound); under the sign-corrected variance it
    gives 10 -> 5, 15 -> 4, 20 -> 4.
    """
    variant = _check_variant(variant)
    for d in range(1, d_max + 1):
        v = float(closed_form_moments(m, d, variant).var_limit)
        if v / linear_variance_part(m, d) > 0.5:
            return d
    raise RuntimeError(f"no border crossing found for m={m} below d={d_max}")


# -- grid distances and Monte Carlo oracle --------------------------------------


def l2_pmf_distance(p: RankGrid, q: RankGrid) -> float:
    """m^d sum_r (p(r) - q(r))^2: the squared L^2 rank-grid distance."""
    if (p.m, p.d) != (q.m, q.d):
        raise ShapeMismatch(f"grid shapes differ: ({p.m},{p.d}) vs ({q.m},{q.d})")
    cells = p.m**p.d
    if cells <= DENSE_CELL_LIMIT:
        diff = p.weights_dense() - q.weights_dense()
        return float(cells * (diff * diff).sum())
    support: dict[tuple[int, ...], float] = {}
    for r, w in p.nonzero_items():
        support[r] = w
    total = 0.0
    for r, wq in q.nonzero_items():
        total += (support.pop(r, 0.0) - wq) ** 2
    total += sum(w * w for w in support.values())
    return cells * total


def mc_rank_pmf(
    generator,
    m: int,
    d: int,
    reps: int,
    seed: int | np.random.SeedSequence,
    *,
    block_size: int = 4096,
) -> RankGrid:
    """Brute-force Monte Carlo estimate of the rank-vector law P(r, c).

    Draws ``reps`` independent m-samples from the generator (a
    ``GeneratorSpec`` or a callable ``(rng, count) -> (count, d) array`` of
    iid rows), ranks each, and averages the 0/(1/m) indicator grids.
    Serves as the model-free oracle for the closed-form grids and for the
    m -> infinity copula-convergence checks.
    """
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    if m < 2 or d < 1:
        raise ValueError(f"mc_rank_pmf requires m >= 2, d >= 1, got m={m}, d={d}")
    if callable(generator):
        draw_fn = generator
    else:
        from .generators import draw_rows

        if generator.d != d:
            raise ValueError(f"generator dimension {generator.d} != requested d={d}")
        draw_fn = lambda rng, count: draw_rows(generator, rng, count)

    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    n_blocks = (reps + block_size - 1) // block_size
    children = ss.spawn(n_blocks)
    radix = np.array([m ** (d - 1 - l) for l in range(d)], dtype=np.int64)
    counts = np.zeros(m**d, dtype=np.int64)
    for i in range(n_blocks):
        bsize = min(block_size, reps - i * block_size)
        rng = np.random.default_rng(children[i])
        values = np.asarray(draw_fn(rng, bsize * m), dtype=float).reshape(bsize, m, d)
        order = np.argsort(values, axis=1)
        ranks = np.empty(order.shape, dtype=np.int64)
        np.put_along_axis(
            ranks, order, np.broadcast_to(np.arange(m)[None, :, None], order.shape), axis=1
        )
        lin = (ranks * radix).sum(axis=2)
        counts += np.bincount(lin.ravel(), minlength=m**d)
    return RankGrid.from_counts(m, d, counts.reshape((m,) * d), m * reps, total_draws=reps)


def moment_summary(m: int, d: int) -> dict:
    """Both moment variants, the approximation, and border diagnostics for one (m, d)."""
    corrected = closed_form_moments(m, d, SIGN_CORRECTED)
    printed = closed_form_moments(m, d, PRINTED)
    return {
        "m": m,
        "d": d,
        "mean_limit": str(corrected.mean_limit),
        "mean_limit_float": float(corrected.mean_limit),
        "var_limit_sign_corrected": str(corrected.var_limit),
        "var_limit_sign_corrected_float": float(corrected.var_limit),
        "var_limit_printed": str(printed.var_limit),
        "var_limit_printed_float": float(printed.var_limit),
        "variance_variant_discrepancy_float": float(printed.var_limit - corrected.var_limit),
        "variance_approx": variance_approx(m, d),
        "linear_part": linear_variance_part(m, d),
        "border_dimension_sign_corrected": border_dimension(m, SIGN_CORRECTED),
        "border_dimension_printed": border_dimension(m, PRINTED),
    }
