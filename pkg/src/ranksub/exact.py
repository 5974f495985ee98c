"""Exact integer/rational combinatorics for the rank-grid null theory.

Everything here is computed in arbitrary precision (Python ints and
`fractions.Fraction`), because the downstream variance constants are built
from binomial coefficients like C(4m+1, 2m) that overflow 64 bits already
for m >= 16, and because the identity checks are only meaningful when they
are exact.  Floats appear solely at explicit conversion points
(`bernstein_value`, `stirling_bound_check`) and the rounding there is the
usual round-to-nearest of `float(Fraction)`.

Core objects:

    binomial(n, k)                C(n, k), exact, 0 outside the range
    bernstein_value(idx, x)       b_{m,r}(x) = C(m,r) x^r (1-x)^(m-r)
    concordance_integral(m, r, s) A(m,r,s) = C(m,r)C(m,s)/C(2m,r+s),
                                  the normalized overlap of two Bernstein
                                  polynomials: int b_{m,r} b_{m,s} = A/(2m+1)
    identity_suite(m)             exact verification of the three summation
                                  identities used by the variance algebra
    s_constants(m)                S1, S2, R1, R2 (S1 = m R1, S2 = m^2 R2)
    stirling_bound_check(m_max)   the central-binomial correction c_m with
                                  its 1/9 < c_m < 1/8 envelope
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

ExactRational = Fraction
"""Exact rational scalar.  `fractions.Fraction` already guarantees the
reduced-form / positive-denominator invariants; float round-trips are lossy."""


def binomial(n: int, k: int) -> int:
    """Binomial coefficient C(n, k), exactly; 0 when k < 0 or k > n."""
    if n < 0:
        raise ValueError(f"binomial requires n >= 0, got n={n}")
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


@dataclass(frozen=True)
class BernsteinIndex:
    """Index (degree m, position r) of the Bernstein polynomial b_{m,r}."""

    m: int
    r: int

    def __post_init__(self) -> None:
        if self.m < 0:
            raise ValueError(f"Bernstein degree must be >= 0, got {self.m}")
        if not 0 <= self.r <= self.m:
            raise ValueError(f"Bernstein index must satisfy 0 <= r <= m, got r={self.r}, m={self.m}")


def bernstein_value(idx: BernsteinIndex, x: float) -> float:
    """Evaluate b_{m,r}(x) = C(m,r) x^r (1-x)^(m-r) for x in [0, 1].

    The family is a partition of unity (sum_r b_{m,r}(x) = 1) and each
    member integrates to 1/(m+1) over [0, 1].
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"bernstein_value requires x in [0, 1], got {x}")
    m, r = idx.m, idx.r
    return math.comb(m, r) * x**r * (1.0 - x) ** (m - r)


def bernstein(m: int, r: int, x: float) -> float:
    """Shorthand for ``bernstein_value(BernsteinIndex(m, r), x)``."""
    return bernstein_value(BernsteinIndex(m, r), x)


def concordance_integral(m: int, r: int, s: int) -> Fraction:
    """A(m, r, s) = C(m,r) C(m,s) / C(2m, r+s), exactly.

    Equivalently C(r+s, r) C(2m-r-s, m-r) / C(2m, m), and
    (2m+1) * int_0^1 b_{m,r}(x) b_{m,s}(x) dx.
    """
    if m < 1:
        raise ValueError(f"concordance_integral requires m >= 1, got {m}")
    if not (0 <= r <= m and 0 <= s <= m):
        raise ValueError(f"indices out of range: r={r}, s={s}, m={m}")
    return Fraction(math.comb(m, r) * math.comb(m, s), math.comb(2 * m, r + s))


def bernstein_product_integral(m: int, r: int, s: int) -> Fraction:
    """int_0^1 b_{m,r}(x) b_{m,s}(x) dx = A(m,r,s) / (2m+1), exactly."""
    return concordance_integral(m, r, s) / (2 * m + 1)


@dataclass(frozen=True)
class IdentityCheck:
    """One exactly evaluated identity: both sides plus the verdict."""

    name: str
    lhs: int
    rhs: int

    @property
    def passed(self) -> bool:
        return self.lhs == self.rhs


@dataclass(frozen=True)
class IdentitySuiteReport:
    """Exact verification of the three binomial summation identities.

    For every 0 <= s <= m:   sum_r C(r+s,r) C(2m-r-s,m-r)      = C(2m+1, m)
    Diagonal:                sum_r C(2r,r) C(2m-2r,m-r)        = 4^m
    Squares:                 sum_{r,s} (C(r+s,r)C(2m-r-s,m-r))^2 = C(4m+1, 2m)

    A failed identity is recorded, not raised, so the suite doubles as a
    regression harness.
    """

    m: int
    checks: tuple[IdentityCheck, ...]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[IdentityCheck]:
        return [c for c in self.checks if not c.passed]


def identity_suite(m: int) -> IdentitySuiteReport:
    """Verify the three summation identities for degree m by exact summation."""
    if m < 1:
        raise ValueError(f"identity_suite requires m >= 1, got {m}")
    checks: list[IdentityCheck] = []
    row_rhs = math.comb(2 * m + 1, m)
    for s in range(m + 1):
        lhs = sum(math.comb(r + s, r) * math.comb(2 * m - r - s, m - r) for r in range(m + 1))
        checks.append(IdentityCheck(f"row_sum[s={s}]", lhs, row_rhs))
    diag = sum(math.comb(2 * r, r) * math.comb(2 * m - 2 * r, m - r) for r in range(m + 1))
    checks.append(IdentityCheck("diagonal_sum", diag, 4**m))
    sq = sum(
        (math.comb(r + s, r) * math.comb(2 * m - r - s, m - r)) ** 2
        for r in range(m + 1)
        for s in range(m + 1)
    )
    checks.append(IdentityCheck("square_sum", sq, math.comb(4 * m + 1, 2 * m)))
    return IdentitySuiteReport(m=m, checks=tuple(checks))


@dataclass(frozen=True)
class SConstants:
    """The exact variance/mean constants of the null moment limits.

    S1 = m 4^(m-1) / ((2m-1) C(2m-2, m-1))
    S2 = m^2 C(4m-3, 2m-2) / ((2m-1) C(2m-2, m-1))^2
    R1 = S1 / m,  R2 = S2 / m^2

    R1 is the summed squared-overlap of the degree-(m-1) Bernstein family
    (sum_k int b_{m-1,k}^2), R2 the grand sum of squared cross overlaps.
    For large m, S2 ~ sqrt(pi m / 8).
    """

    m: int
    s1: Fraction
    s2: Fraction
    r1: Fraction
    r2: Fraction


def s_constants(m: int) -> SConstants:
    """Exact S1, S2, R1, R2 for sub-sample size m >= 2."""
    if m < 2:
        raise ValueError(f"s_constants requires m >= 2, got {m}")
    den = (2 * m - 1) * math.comb(2 * m - 2, m - 1)
    r1 = Fraction(4 ** (m - 1), den)
    r2 = Fraction(math.comb(4 * m - 3, 2 * m - 2), den * den)
    return SConstants(m=m, s1=m * r1, s2=m * m * r2, r1=r1, r2=r2)


@dataclass(frozen=True)
class StirlingBoundReport:
    """c_m = m (1 - C(2m,m) sqrt(pi m) / 4^m) for m = 1..m_max.

    The asymptotic expansion gives c_m = 1/8 - 1/(128 m) + O(m^-2), so each
    c_m should sit strictly inside (1/9, 1/8).
    """

    m_max: int
    c_min: float
    c_max: float
    violations: tuple[int, ...]

    @property
    def all_within_bounds(self) -> bool:
        return not self.violations


def stirling_bound_check(m_max: int) -> StirlingBoundReport:
    """Check 1/9 < c_m < 1/8 for every m <= m_max.

    The central binomial ratio C(2m,m)/4^m is carried as an exact Fraction
    (updated incrementally) and converted to float only at the comparison;
    the margin to both bounds is ~1e-2/m, far above float rounding.
    """
    if m_max < 1:
        raise ValueError(f"stirling_bound_check requires m_max >= 1, got {m_max}")
    violations: list[int] = []
    c_min, c_max = math.inf, -math.inf
    ratio = Fraction(1)  # C(2m,m)/4^m at m=0
    for m in range(1, m_max + 1):
        ratio *= Fraction((2 * m - 1) * 2 * m, 4 * m * m)
        c = m * (1.0 - float(ratio) * math.sqrt(math.pi * m))
        c_min = min(c_min, c)
        c_max = max(c_max, c)
        if not 1.0 / 9.0 < c < 1.0 / 8.0:
            violations.append(m)
    return StirlingBoundReport(m_max=m_max, c_min=c_min, c_max=c_max, violations=tuple(violations))
