"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary) and
then asserts at the stated tolerance.  Criteria 5 and 6 do not hold under
the default design; they keep their full-tolerance assertions and are
expected to fail.
"""

import json
import time
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from fosdbounds import lp
from fosdbounds.bounds import UPPER, cdf_bound_curve, gamma_particular, point_identify, solve_gamma_bound
from fosdbounds.dataset import estimate, load_csv
from fosdbounds.diagnostics import complier_cdfs, fosd_preservation_test, violation_experiment
from fosdbounds.sieve import SieveSpec, basis_partial_integral, compute_moments, dual_sieve_bound
from fosdbounds.simulate import (
    DgpConfig,
    default_grid,
    evaluation_grid,
    population_model,
    true_counterfactual_cdf,
    true_counterfactual_quantile,
)

from lp_oracle import brute_force, random_lp
from test_diagnostics import brute_force_violation
from test_sieve import basis_oracle, midpoint

FIXTURES = Path(__file__).with_name("fixtures")


def test_criterion_01_gamma_two_levels(record):
    g = gamma_particular([0.3, 0.7])
    err = float(np.abs(g - [-2.5, 2.5]).max())
    record(1, err <= 1e-12, f"gamma={g.tolist()}, error {err:.1e}")
    assert err <= 1e-12


def test_criterion_02_lp_matches_vertex_enumeration(record):
    rng = np.random.default_rng(2024)
    cases = [random_lp(rng) for _ in range(200)]
    oracle = [brute_force(**d) for d in cases]
    t0 = time.perf_counter()
    sols = [lp.solve(lp.LpProblem(**d)) for d in cases]
    elapsed = time.perf_counter() - t0
    bad = 0
    for (status, value), sol in zip(oracle, sols):
        if sol.status != status or (status == lp.OPTIMAL and abs(sol.value - value) > 1e-8 * max(1.0, abs(value))):
            bad += 1
    n_opt = sum(s == lp.OPTIMAL for s, _ in oracle)
    record(2, bad == 0 and elapsed < 5, f"{bad} mismatches on 200 LPs ({n_opt} optimal), solver time {elapsed:.2f} s")
    assert bad == 0
    assert elapsed < 5


def test_criterion_03_population_validity(record):
    t0 = time.perf_counter()
    tol = 1e-6 + lp.FEAS_TOL
    worst, violations, widths = -np.inf, 0, {}
    for L in range(2, 9):
        cfg = DgpConfig(L=L)
        grid = evaluation_grid(cfg)
        curve = cdf_bound_curve(population_model(cfg), grid)
        truth = true_counterfactual_cdf(cfg, grid)
        ok_lo = curve.feasible_lower
        ok_up = curve.feasible_upper
        excess = np.concatenate([(curve.lower - truth)[ok_lo], (truth - curve.upper)[ok_up]])
        worst = max(worst, float(excess.max(initial=-np.inf)))
        violations += int(np.sum(excess > tol))
        widths[L] = round(curve.mean_width, 4)
    elapsed = time.perf_counter() - t0
    record(3, violations == 0 and elapsed < 60,
           f"{violations} violations, worst excess {worst:.1e}, widths {widths}, {elapsed:.1f} s")
    assert violations == 0
    assert elapsed < 60


def test_criterion_04_informative_as_levels_grow(record):
    t0 = time.perf_counter()
    curves = {}
    for L in (2, 6):
        cfg = DgpConfig(L=L)
        curves[L] = cdf_bound_curve(population_model(cfg), evaluation_grid(cfg))
    c2 = curves[2]
    top = c2.grid >= np.median(c2.grid)
    max_upper = float(c2.upper[top].max())
    elapsed = time.perf_counter() - t0
    ok = curves[6].mean_width < c2.mean_width and max_upper > 0.99 and elapsed < 120
    record(4, ok, f"mean width L2 {c2.mean_width:.4f} vs L6 {curves[6].mean_width:.4f}, "
                  f"L2 max upper on top half {max_upper:.5f}, {elapsed:.1f} s")
    assert curves[6].mean_width < c2.mean_width
    assert max_upper > 0.99
    assert elapsed < 120


@pytest.mark.xfail(strict=True, reason="the unit-mass sieve dual is infeasible on the default population design")
def test_criterion_05_sieve_weak_duality_and_gap(record):
    t0 = time.perf_counter()
    calib = json.loads((FIXTURES / "sieve_calibration.json").read_text())
    cfg = DgpConfig(**calib["dgp"])
    model = population_model(cfg)
    ybars = [true_counterfactual_quantile(cfg, t) for t in calib["taus"]]
    primal = [solve_gamma_bound(model, y, direction=UPPER) for y in ybars]
    weak_ok, infeasible, checked, gaps = True, 0, 0, []
    for J in (5, 10, 20, 40):
        spec = SieveSpec.from_model(model, J)
        mom = compute_moments(model, spec)
        for p, y in zip(primal, ybars):
            d = dual_sieve_bound(model, spec, y, direction=UPPER, moments=mom)
            if not d.optimal:
                infeasible += 1
                continue
            checked += 1
            weak_ok &= d.value <= p.value + 1e-6
            if J == 40:
                gaps.append(abs(p.value - d.value))
    elapsed = time.perf_counter() - t0
    threshold = calib["threshold"]
    gap_ok = threshold is not None and len(gaps) == len(ybars) and max(gaps) < threshold
    record(5, weak_ok and gap_ok and elapsed < 60,
           f"{infeasible}/20 duals infeasible, weak duality {'holds' if weak_ok else 'fails'} on {checked} checked, "
           f"calibrated threshold {threshold}, {elapsed:.1f} s")
    assert weak_ok
    assert infeasible == 0
    assert threshold is not None
    assert max(gaps) < threshold
    assert elapsed < 60


@pytest.mark.xfail(strict=True, reason="measured E[V] matches (L-2)/(n+1), four times the single-direction bound")
def test_criterion_06_violation_probability(record):
    t0 = time.perf_counter()
    rep = violation_experiment(DgpConfig(), n=100, reps=200, eval_n=100_000, seed=0, workers=4)
    elapsed = time.perf_counter() - t0
    limit = rep.bound + 2 * rep.mc_stderr
    record(6, rep.mean_violation <= limit and elapsed < 300,
           f"mean V {rep.mean_violation:.5f} (se {rep.mc_stderr:.5f}) vs 1/101 + 2 se = {limit:.5f}, "
           f"{rep.n_used}/{rep.reps} usable, {elapsed:.1f} s")
    assert elapsed < 300
    assert rep.mean_violation <= limit


def test_criterion_07_point_identification(record):
    t0 = time.perf_counter()
    cfg = DgpConfig(L=6, rho=0.0)
    grid = evaluation_grid(cfg)
    pi = point_identify(population_model(cfg))
    err = float(np.abs(pi.cdf(grid) - true_counterfactual_cdf(cfg, grid)).max()) if pi.identified else np.inf
    pi2 = point_identify(population_model(DgpConfig(L=2, rho=0.5)))
    elapsed = time.perf_counter() - t0
    ok = pi.identified and pi.residual < 1e-6 and err < 1e-6 and not pi2.identified and elapsed < 30
    record(7, ok, f"rho=0 L=6 residual {pi.residual:.1e}, curve error {err:.1e}; rho=0.5 L=2: {pi2}; {elapsed:.1f} s")
    assert pi.identified and pi.residual < 1e-6
    assert err < 1e-6
    assert not pi2.identified
    assert "not point-identified" in str(pi2)
    assert elapsed < 30


def test_criterion_08_fosd_diagnostic(record):
    t0 = time.perf_counter()
    pop = fosd_preservation_test(complier_cdfs(population_model(DgpConfig())), tol=1e-6)
    path = resources.files("fosdbounds") / "data" / "fosd_counterexample.csv"
    c = complier_cdfs(estimate(load_csv(path)))
    rep = fosd_preservation_test(c, tol=1e-6)
    best, (a, b) = brute_force_violation(c.F1, c.F0)
    w, wt = rep.witness_weights
    witness_ok = np.allclose(w, np.eye(2)[a], atol=1e-9) and np.allclose(wt, np.eye(2)[b], atol=1e-9)
    elapsed = time.perf_counter() - t0
    ok = (pop.passed and abs(rep.max_violation - 0.5) < 1e-9 and abs(best - 0.5) < 1e-12 and witness_ok
          and elapsed < 30)
    labels = c.labels()
    record(8, ok, f"population violation {pop.max_violation:.1e}; counterexample violation {rep.max_violation:.3f} "
                  f"at y={rep.witness_y:g}, omega on {labels[a]}, omega~ on {labels[b]}; {elapsed:.1f} s")
    assert pop.passed and pop.max_violation <= 1e-6
    assert rep.max_violation == pytest.approx(0.5, abs=1e-9)
    assert best == pytest.approx(0.5, abs=1e-12)
    assert witness_ok
    assert elapsed < 30


def test_criterion_09_nested_constraints(record):
    cfg = DgpConfig()
    coarse, fine = default_grid(cfg, size=401), default_grid(cfg, size=801)
    assert np.array_equal(fine[::2], coarse)
    model = population_model(cfg, fine)
    grid = evaluation_grid(cfg)
    ybars = np.linspace(grid[0], grid[-1], 20)
    worst, bad = np.inf, 0
    for y in ybars:
        a = solve_gamma_bound(model, y, direction=UPPER, points=coarse)
        b = solve_gamma_bound(model, y, direction=UPPER, points=fine)
        if a.feasible and b.feasible:
            worst = min(worst, b.value - a.value)
            bad += b.value < a.value - 1e-10
        elif a.feasible != b.feasible and a.feasible:
            continue  # an infeasible finer program is the largest possible value
        elif b.feasible:
            bad += 1
    record(9, bad == 0, f"{bad} decreases at 20 ybar values, smallest change {worst:.1e}")
    assert bad == 0


def test_criterion_10_bernstein_quadrature(record):
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(100):
        J = int(rng.integers(1, 40))
        j = int(rng.integers(1, J + 1))
        a, b = np.sort(rng.uniform(0, 1, 2))
        worst = max(worst, abs(basis_partial_integral(j, J, a, b) - midpoint(lambda u: basis_oracle(j, J, u), a, b)))
    add = 0.0
    for _ in range(50):
        J = int(rng.integers(1, 60))
        edges = np.unique(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, int(rng.integers(1, 20)))]))
        js = np.arange(1, J + 1)
        total = basis_partial_integral(js[None, :], J, edges[:-1, None], edges[1:, None]).sum(axis=0)
        add = max(add, float(np.abs(total - 1.0 / (J + 1)).max()))
    record(10, worst < 1e-10 and add < 1e-12, f"quadrature error {worst:.1e}, additivity error {add:.1e}")
    assert worst < 1e-10
    assert add < 1e-12
