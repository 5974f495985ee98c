"""Acceptance suite: every criterion at its stated tolerance.

Each criterion prints one PASS/FAIL line (run with ``pytest -s`` to see
them).  Criterion 6 runs its reduced smoke profile by default; set
``RANKSUB_ACCEPT_PROFILE=full`` for the full power reproduction (about an
hour) and ``RANKSUB_ACCEPT_THREADS`` to adjust worker threads.
"""

import itertools
import math
import os
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest
from scipy.interpolate import RegularGridInterpolator

from ranksub import (
    PRINTED,
    SIGN_CORRECTED,
    GeneratorSpec,
    MomentConfig,
    PowerRow,
    SampleMatrix,
    aggregate_moments,
    border_dimension,
    comonotone_pmf,
    conditional_slice,
    covariance_terms,
    estimate_exhaustive,
    estimate_random,
    fit_joint_model,
    generate,
    identity_suite,
    independence_pmf,
    kl_statistic,
    l2_statistic,
    mc_rank_pmf,
    run_moment_study,
    run_power_study,
    smooth,
    stirling_bound_check,
    closed_form_moments,
)

THREADS = int(os.environ.get("RANKSUB_ACCEPT_THREADS", "4"))
PROFILE = os.environ.get("RANKSUB_ACCEPT_PROFILE", "smoke")


@contextmanager
def criterion(number: int, description: str, budget_s: float | None = None):
    t0 = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - t0
        if budget_s is not None:
            assert elapsed < budget_s, (
                f"criterion {number} exceeded its {budget_s}s budget: {elapsed:.2f}s"
            )
    except Exception:
        print(f"ACCEPTANCE {number}: FAIL - {description} ({time.perf_counter() - t0:.2f} s)")
        raise
    print(f"ACCEPTANCE {number}: PASS - {description} ({elapsed:.2f} s)")


def test_criterion_1_worked_example_exact(table1_sample, table2_expected):
    with criterion(1, "worked example reproduced as exact rationals, < 1 ms"):
        grid = estimate_exhaustive(table1_sample, 3)
        for cell, expected in table2_expected.items():
            assert grid.fraction(cell) == expected
        assert sum(grid.fraction(c) for c in itertools.product((1, 2, 3), repeat=2)) == 1
        # timing: warm, then best of 5
        estimate_exhaustive(table1_sample, 3)
        best = min(
            _timed(lambda: estimate_exhaustive(table1_sample, 3)) for _ in range(5)
        )
        assert best < 1e-3, f"exhaustive worked example took {best * 1e3:.3f} ms"


def _timed(fn) -> float:
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def test_criterion_2_identities_and_stirling():
    with criterion(2, "identity suite m=1..30 and stirling bound m<=1000, exact", budget_s=5.0):
        for m in range(1, 31):
            report = identity_suite(m)
            assert report.all_passed, f"identity failure at m={m}: {report.failures()}"
        stirling = stirling_bound_check(1000)
        assert stirling.all_within_bounds, stirling.violations
        assert 1 / 9 < stirling.c_min <= stirling.c_max < 1 / 8


def test_criterion_3_null_theory_consistency():
    with criterion(
        3, "aggregate == closed form (sign-corrected), variants reported, D-terms vs quadrature",
        budget_s=30.0,
    ):
        for m in range(2, 11):
            for d in range(1, 6):
                agg = aggregate_moments(m, d)
                closed = closed_form_moments(m, d, SIGN_CORRECTED)
                assert agg.mean_limit == closed.mean_limit, (m, d)
                assert agg.var_limit == closed.var_limit, (m, d)
        assert aggregate_moments(2, 2).mean_limit == Fraction(4, 9)
        corrected_d1 = closed_form_moments(5, 1, SIGN_CORRECTED)
        assert corrected_d1.mean_limit == 0 and corrected_d1.var_limit == 0
        # the printed/sign-corrected variance discrepancy is a reported quantity
        for m, d in [(2, 2), (10, 2), (10, 5)]:
            printed = closed_form_moments(m, d, PRINTED).var_limit
            corrected = closed_form_moments(m, d, SIGN_CORRECTED).var_limit
            assert printed != corrected
            print(
                f"    variance variants (m={m}, d={d}): printed={float(printed):.6g}, "
                f"sign-corrected={float(corrected):.6g}, discrepancy={float(printed - corrected):.6g}"
            )
        _check_covariance_quadrature()


def _bern(m, r, x):
    return math.comb(m, r) * x**r * (1.0 - x) ** (m - r)


def _check_covariance_quadrature():
    # every closed-form D-term vs honest 2-D Gauss-Legendre quadrature, m <= 6
    nodes, weights = np.polynomial.legendre.leggauss(48)
    x = 0.5 * (nodes + 1.0)
    w2 = np.outer(0.5 * weights, 0.5 * weights)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    d = 2
    for m in range(2, 7):
        inv_md = 1.0 / m**d
        coef2 = 1.0 / (m * (m - 1) ** (d - 1))
        basis = {r: _bern(m - 1, r - 1, x) for r in range(1, m + 1)}
        for r in itertools.product(range(1, m + 1), repeat=2):
            t1 = np.outer(basis[r[0]], basis[r[1]]) / m
            t2 = coef2 * np.outer(1 - basis[r[0]], 1 - basis[r[1]])
            for s in itertools.product(range(1, m + 1), repeat=2):
                u1 = np.outer(basis[s[0]], basis[s[1]]) / m
                u2 = coef2 * np.outer(1 - basis[s[0]], 1 - basis[s[1]])
                t = covariance_terms(r, s, m, d)
                for exact, grid_vals in (
                    (t.d11, t1 * u1),
                    (t.d12, t1 * u2),
                    (t.d22, t2 * u2),
                    (t.d13, t1 * inv_md),
                    (t.d23, t2 * inv_md),
                ):
                    assert abs(float((w2 * grid_vals).sum()) - float(exact)) < 1e-8, (m, r, s)


def test_criterion_4_border_table():
    with criterion(4, "border dimensions 10->5, 15->4, 20->4 (printed variant reported)", budget_s=1.0):
        assert border_dimension(10, SIGN_CORRECTED) == 5
        assert border_dimension(15, SIGN_CORRECTED) == 4
        assert border_dimension(20, SIGN_CORRECTED) == 4
        for m in (10, 15, 20):
            printed = border_dimension(m, PRINTED)
            corrected = border_dimension(m, SIGN_CORRECTED)
            print(
                f"    border m={m}: sign-corrected={corrected}, printed-variant={printed}"
                + ("  (deviation)" if printed != corrected else "")
            )


def test_criterion_5_moment_study_desk_scale():
    with criterion(
        5, "moment study m=10, d in {2,3}, n=100, b=1.5e5, 200 reps: mean ratio in [1.0, 1.6]",
        budget_s=600.0,
    ):
        report = run_moment_study(
            [
                MomentConfig(m=10, d=2, n=100, b=150_000),
                MomentConfig(m=10, d=3, n=100, b=150_000),
            ],
            replications=200,
            seed=20250808,
            threads=THREADS,
        )
        for row in report.rows:
            assert "error" not in row, row
            ratio = row["mean_ratio"]
            print(
                f"    m=10 d={row['d']}: mean_ratio={ratio:.3f} (se {row['se_mean_ratio']:.3f}), "
                f"var_ratio={row['var_ratio']:.3f} (reported without tolerance), "
                f"mean_T={row['mean_T']:.3e}"
            )
            assert 1.0 <= ratio <= 1.6, f"d={row['d']} mean ratio {ratio}"


def test_criterion_6_power_reproduction(tmp_path):
    if PROFILE == "full":
        reps, b, budget = 300, 10**5, 3600.0
        bands = {
            "quadratic_d2_n30": (0.34, 0.54),
            "linear_d2_n30": (0.44, 0.64),
            "quadratic_d3_n45": (0.31, 0.51),
        }
        level_tol = 0.02
    else:
        reps, b, budget = 100, 10**4, 300.0
        bands = {
            "quadratic_d2_n30": (0.29, 0.59),
            "linear_d2_n30": (0.39, 0.69),
            "quadratic_d3_n45": (0.26, 0.56),
        }
        level_tol = 0.15
    with criterion(
        6, f"power reproduction ({PROFILE} profile: {reps} reps, b={b}, 1000 null draws)",
        budget_s=budget,
    ):
        rows = [
            PowerRow(GeneratorSpec(kind="polynomial", n=30, d=2, p=2), "quadratic_d2_n30"),
            PowerRow(GeneratorSpec(kind="polynomial", n=30, d=2, p=1), "linear_d2_n30"),
            PowerRow(GeneratorSpec(kind="polynomial", n=45, d=3, p=2), "quadratic_d3_n45"),
            PowerRow(GeneratorSpec(kind="independent_gaussian", n=30, d=2), "null_level_check"),
        ]
        report = run_power_study(
            rows,
            m=8,
            b=b,
            level=0.05,
            n_sims=1000,
            replications=reps,
            seed=20250808,
            cache_dir=tmp_path,
            threads=THREADS,
        )
        results = {row["label"]: row for row in report.rows}
        for label, (lo, hi) in bands.items():
            row = results[label]
            assert "error" not in row, row
            print(f"    {label}: power={row['power']:.3f} (se {row['se_power']:.3f}), band [{lo}, {hi}]")
            assert lo <= row["power"] <= hi, f"{label} power {row['power']} outside [{lo}, {hi}]"
        level_row = results["null_level_check"]
        print(f"    null level: rejection rate {level_row['power']:.3f} (target 0.05 +/- {level_tol})")
        assert abs(level_row["power"] - 0.05) <= level_tol


def test_criterion_7_estimator_properties():
    with criterion(7, "estimator properties: normalization, invariance, laws, unbiasedness", budget_s=120.0):
        rng = np.random.default_rng(31)
        # normalization and nonnegativity
        sample = SampleMatrix(rng.standard_normal((25, 3)))
        grid = estimate_random(sample, 5, 20_000, seed=1)
        w = grid.weights_dense()
        assert (w >= 0).all() and abs(w.sum() - 1.0) < 1e-12
        # monotone-transform bit invariance
        values = rng.standard_normal((18, 2))
        transformed = np.column_stack([np.exp(values[:, 0]), values[:, 1] ** 3])
        w1 = estimate_exhaustive(SampleMatrix(values), 4).weights_dense()
        w2 = estimate_exhaustive(SampleMatrix(transformed), 4).weights_dense()
        assert (w1 == w2).all()
        # d=1 uniformity, exact
        one_d = SampleMatrix(rng.standard_normal((11, 1)))
        g1 = estimate_exhaustive(one_d, 5)
        assert all(g1.fraction((r,)) == Fraction(1, 5) for r in range(1, 6))
        # comonotone diagonal law, exact
        z = rng.standard_normal(10)
        como = estimate_exhaustive(SampleMatrix(np.column_stack([z, np.expm1(z)])), 4)
        assert all(
            como.fraction((r, s)) == (Fraction(1, 4) if r == s else 0)
            for r in range(1, 5)
            for s in range(1, 5)
        )
        # unbiasedness against the Monte Carlo oracle, 4-SE band
        m, d, n, reps = 4, 2, 8, 2000
        acc = np.zeros((m, m))
        acc2 = np.zeros((m, m))
        for child in np.random.SeedSequence(777).spawn(reps):
            s = SampleMatrix(np.random.default_rng(child).standard_normal((n, d)))
            wg = estimate_exhaustive(s, m).weights_dense()
            acc += wg
            acc2 += wg * wg
        mean = acc / reps
        se = np.sqrt(np.maximum(acc2 / reps - mean**2, 0.0) / reps)
        oracle_reps = 200_000
        oracle = mc_rank_pmf(
            GeneratorSpec(kind="independent_gaussian", n=m, d=d), m, d, oracle_reps, seed=778
        )
        ow = oracle.weights_dense()
        oracle_se = np.sqrt(np.maximum(m * ow * (1 - m * ow), 1e-12) / oracle_reps) / m
        combined = np.sqrt(se**2 + oracle_se**2)
        assert (np.abs(mean - m ** (-d)) <= 4 * se).all()
        assert (np.abs(mean - ow) <= 4 * combined).all()


def test_criterion_8_regression_demonstration():
    with criterion(
        8, "sphere regression: ring factor >= 2 at radius 6; copula quadrature 1 +/- 1e-6",
        budget_s=300.0,
    ):
        # m = 20: the ring contrast must outweigh the marginal-density decay
        # at radius 6, which coarser grids (m = 8) cannot resolve
        spec = GeneratorSpec(kind="sphere_noise", n=3000, d=5, seed=606, a=6.0)
        sample = generate(spec)
        model = fit_joint_model(sample, 20, 300_000, seed=607, threads=THREADS)
        xs = ys = np.linspace(-9.0, 9.0, 81)
        _, field = conditional_slice(model, {2: 0.0, 3: 0.0, 4: 0.0}, xs, ys)
        assert field.sum() == pytest.approx(1.0, abs=1e-12)
        interp = RegularGridInterpolator((xs, ys), field)
        angles = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)
        ring = interp(np.column_stack([6.0 * np.cos(angles), 6.0 * np.sin(angles)]))
        origin = interp(np.array([[0.0, 0.0]]))[0]
        factor = float(ring.mean()) / float(origin)
        print(f"    ring mean / origin = {factor:.2f} (required >= 2)")
        assert factor >= 2.0
        # d=2 quadrature of a smoothed copula integrates to 1
        two_d = SampleMatrix(np.random.default_rng(608).standard_normal((60, 2)))
        sc = smooth(estimate_random(two_d, 8, 20_000, seed=609))
        nodes, weights = np.polynomial.legendre.leggauss(64)
        x = 0.5 * (nodes + 1.0)
        w2 = np.outer(0.5 * weights, 0.5 * weights)
        xx, yy = np.meshgrid(x, x, indexing="ij")
        vals = sc.density(np.column_stack([xx.ravel(), yy.ravel()])).reshape(64, 64)
        assert abs(float((w2 * vals).sum()) - 1.0) < 1e-6


def test_criterion_9_statistic_closed_forms(table1_sample, table2_expected):
    with criterion(9, "statistic closed forms: log m / m-1 / 0.3771 / 5/8"):
        for m in (2, 8, 15):
            kl = kl_statistic(comonotone_pmf(m), independence_pmf(m, 2))
            l2 = l2_statistic(comonotone_pmf(m), independence_pmf(m, 2))
            assert abs(kl - math.log(m)) < 1e-12
            assert abs(l2 - (m - 1)) < 1e-12
        grid = estimate_exhaustive(table1_sample, 3)
        kl_val = kl_statistic(grid, independence_pmf(3, 2))
        assert abs(kl_val - 0.3771) < 1e-4
        # exact L2: rational arithmetic on the counts-backed grids
        exact = 9 * sum(
            (grid.fraction(c) - Fraction(1, 9)) ** 2
            for c in itertools.product((1, 2, 3), repeat=2)
        )
        assert exact == Fraction(5, 8)
        assert abs(l2_statistic(grid, independence_pmf(3, 2)) - float(Fraction(5, 8))) < 1e-12
