"""Exit criteria, one recorded PASS/FAIL line each.

Run alone with ``pytest -m acceptance -s`` to see the lines as they happen;
a summary section is printed at the end of every run.
"""

import time

import numpy as np
import pytest
from scipy.stats import kstest

from spatialsign.ellipgen import RngStream, sample_scenario, scenario, trace_r2_closed_form
from spatialsign.powerlab import are_rn_pa_mc, are_rn_pa_t
from spatialsign.signcore import EstimationConfig, hr_estimate, r_n_statistic, ss_test, trace_r2_hat
from spatialsign.simharness import SimulationCell, render_report, run_cell, run_suite

from oracles import hr_oracle, pairwise_bruteforce

pytestmark = pytest.mark.acceptance

REFERENCE_ARE = [(3, 2.54), (4, 1.76), (5, 1.51), (6, 1.38), (1e6, 1.00)]


@pytest.mark.parametrize("nu, printed", REFERENCE_ARE, ids=[f"nu={nu:g}" for nu, _ in REFERENCE_ARE])
def test_c01_efficiency_table(criterion, nu, printed):
    t0 = time.perf_counter()
    value = are_rn_pa_t(nu)
    elapsed = time.perf_counter() - t0
    ok = abs(value - printed) <= 0.005 and elapsed < 1.0
    criterion(1, f"closed-form ARE nu={nu:g}", ok,
              f"got {value:.4f}, printed {printed:.2f}, |diff|={abs(value - printed):.4f} (tol 0.005), {elapsed:.2e}s")


def test_c02_monte_carlo_are(criterion):
    t0 = time.perf_counter()
    value = are_rn_pa_mc("mvt4", 1000, 100_000, RngStream(2024))
    elapsed = time.perf_counter() - t0
    rel = abs(value - 1.76) / 1.76
    criterion(2, "Monte Carlo ARE mvt4 p=1000", rel <= 0.03 and elapsed < 60,
              f"got {value:.4f}, rel err {rel:.4f} (tol 0.03), {elapsed:.1f}s")


def test_c03_empirical_size(criterion):
    rec = run_cell(SimulationCell(scenario("I", 50, 200), reps=500, seed=0, mode="plugin"))
    criterion(3, "size, Scenario I n=50 p=200", 0.03 <= rec.rate <= 0.07 and rec.failures == 0,
              f"rate {rec.rate:.3f} in [0.03, 0.07], failures {rec.failures}")


@pytest.mark.parametrize("label, target", [("III", 0.89), ("V", 0.84)])
def test_c04_heavy_tail_power(criterion, label, target):
    rec = run_cell(SimulationCell(scenario(label, 100, 200, "dense"), reps=500, seed=0, mode="plugin"))
    criterion(4, f"power, Scenario {label} dense n=100 p=200", abs(rec.rate - target) <= 0.05,
              f"rate {rec.rate:.3f} vs {target:.2f} (+/-0.05)")


def test_c05_null_normality(criterion):
    spec = scenario("I", 100, 400)
    cfg = EstimationConfig(mode="plugin")
    z = [ss_test(sample_scenario(spec, RngStream(5, r)), 0.05, cfg).z for r in range(1000)]
    stat = kstest(z, "norm").statistic
    criterion(5, "KS distance to N(0,1), n=100 p=400", stat < 0.06,
              f"KS {stat:.4f} (< 0.06), mean {np.mean(z):+.3f}, sd {np.std(z):.3f}")


def test_c06_trace_ratio(criterion):
    spec = scenario("I", 100, 200, rho=0.5)
    truth = trace_r2_closed_form(200, 0.5)
    ratios = np.array([trace_r2_hat(sample_scenario(spec, RngStream(6, r)), EstimationConfig(mode="plugin")) / truth
                       for r in range(100)])
    inside = int(np.sum((ratios >= 0.9) & (ratios <= 1.1)))
    criterion(6, "trace ratio in [0.9, 1.1]", inside >= 95,
              f"{inside}/100 inside, ratio range [{ratios.min():.3f}, {ratios.max():.3f}]")


def test_c07_scalar_invariance(criterion):
    rng = np.random.default_rng(7)
    worst = {"exact": 0.0, "plugin": 0.0}
    for _ in range(50):
        n = int(rng.integers(10, 16))
        p = int(rng.integers(5, 30))
        X = rng.standard_t(5, size=(n, p)) + rng.normal(0, 0.3, size=p)
        c = np.exp(rng.uniform(-3, 3, size=p))
        for mode in worst:
            cfg = EstimationConfig(mode=mode)
            dz = abs(ss_test(X * c, 0.05, cfg).z - ss_test(X, 0.05, cfg).z)
            worst[mode] = max(worst[mode], dz)
    ok = max(worst.values()) <= 1e-6
    criterion(7, "scalar invariance, both modes", ok,
              f"max |dz| exact {worst['exact']:.1e}, plugin {worst['plugin']:.1e} (tol 1e-6)")


def _residuals(X, theta, d):
    E = (X - theta) / np.sqrt(d)
    r = np.linalg.norm(E, axis=1)
    U = E / r[:, None]
    p = X.shape[1]
    return np.max(np.abs(U.mean(axis=0))), np.max(np.abs(p * np.mean(U * U, axis=0) - 1))


def test_c08_fixed_point(criterion):
    rng = np.random.default_rng(8)
    worst_res = 0.0
    fits = 0
    for k in range(200):
        n = int(rng.integers(5, 60))
        p = int(rng.integers(2, 80))
        X = rng.standard_t(3, size=(n, p)) * np.exp(rng.uniform(-2, 2, size=p)) + rng.normal(size=p)
        for fix in (False, True):
            fit = hr_estimate(X, EstimationConfig(fix_theta_at_zero=fix))
            if not fit.converged:
                continue
            fits += 1
            rs, rd = _residuals(X, fit.theta, fit.d)
            worst_res = max(worst_res, rd if fix else max(rs, rd))
    worst_theta = worst_d = 0.0
    for k in range(20):
        n = int(rng.integers(8, 31))
        p = int(rng.integers(2, 6))
        X = rng.normal(size=(n, p)) * rng.uniform(0.5, 3, size=p) + rng.normal(size=p)
        fit = hr_estimate(X)
        theta, d = hr_oracle(X)
        worst_theta = max(worst_theta, float(np.max(np.abs(fit.theta - theta))))
        worst_d = max(worst_d, float(np.max(np.abs(fit.d / fit.d[0] - d))))
    ok = worst_res <= 1e-8 and fits > 300 and worst_theta <= 1e-6 and worst_d <= 1e-6
    criterion(8, "fixed-point residuals and oracle agreement", ok,
              f"{fits} converged fits, max residual {worst_res:.1e}; oracle max |dtheta| {worst_theta:.1e}, "
              f"max |d-ratio diff| {worst_d:.1e} (tol 1e-6)")


def test_c09_exact_mode_oracle(criterion):
    rng = np.random.default_rng(9)
    worst = 0.0
    cfg = EstimationConfig(mode="exact", tol=1e-12, max_iter=2000)
    for _ in range(10):
        X = rng.normal(size=(12, 5)) * rng.uniform(0.5, 2, size=5) + 0.3
        oracle, _ = pairwise_bruteforce(X)
        worst = max(worst, abs(r_n_statistic(X, cfg) - oracle))
    criterion(9, "exact R_n vs double-loop oracle, n=12 p=5", worst <= 1e-10,
              f"max |diff| {worst:.1e} (tol 1e-10, fixed-point tol 1e-12)")


def test_c10_determinism(criterion):
    cells = [SimulationCell(scenario(label, 30, 60, pattern), reps=24, seed=10 + k)
             for k, (label, pattern) in enumerate([("I", "null"), ("III", "dense"), ("IV", "sparse"), ("V", "null")])]
    outputs = {par: render_report(run_suite(cells, parallelism=par), "csv").encode() for par in (1, 4, 8)}
    ok = outputs[1] == outputs[4] == outputs[8]
    criterion(10, "byte-identical csv at parallelism 1/4/8", ok, f"{len(outputs[1])} bytes")
