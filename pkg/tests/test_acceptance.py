"""Acceptance criteria 1-10, each at its stated tolerance and time budget.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from jtac import bounds, cli, specfun
from jtac.bounds import ConstraintSet, lower_bound_1, lower_bound_2, lower_bound_3, solve_mu, solve_phi
from jtac.capacity import blahut_arimoto
from jtac.channel import ChannelParams, arrival_prob
from jtac.mixture import mixture_entropy_lower
from jtac.report import read_csv

import oracles
from test_bounds import PHI_CONFIGS, REASSEMBLY_CONFIGS, matrix, mixture_for
from test_capacity import bec, bsc, small_jtac
from test_mixture import random_mixture
from test_specfun import EI_GRID, HYP_GRID, POISSON_GRID

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = sorted(p.stem for p in (ROOT / "configs").glob("*.ini"))
RATE_COLUMNS = ("lb1", "lb2_r1", "lb2_r2", "lb3", "ub", "ba_jtac", "ba_cb", "tb", "timing_given_x")

_RUNS = {}


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    """``runs(name, k)`` -> (output dir, seconds) for the k-th run of a shipped config, cached."""
    base = tmp_path_factory.mktemp("runs")

    def get(name, k=1):
        if (name, k) not in _RUNS:
            out = base / f"{name}-{k}"
            t0 = time.perf_counter()
            rc = cli.main(["run", str(ROOT / "configs" / f"{name}.ini"), "--out", str(out)])
            _RUNS[name, k] = (out, time.perf_counter() - t0, rc)
        out, secs, rc = _RUNS[name, k]
        assert rc == cli.EXIT_OK, f"{name} exited with {rc}"
        return out, secs

    return get


def rate_table(out, name):
    return read_csv(out / f"{name}.csv")


# -- 1 --------------------------------------------------------------------


def test_criterion_01_arrival_model_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(200):
        n, m = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        t_b = float(rng.uniform(0.1, 3.0))
        c = float(rng.uniform(0.05, 5.0))
        sigma = float(rng.uniform(0.0, 0.99)) * n * t_b / m
        p = ChannelParams(c=c, T_s=n * t_b, t_b=t_b, sigma_x=sigma, tau_x=(m - 1) * sigma, m=m, n=n)
        i, j = int(rng.integers(1, n + 1)), int(rng.integers(0, m))
        ref = oracles.levy_interval_quad((i - 1) * t_b, i * t_b, j * sigma, c)
        worst = max(worst, abs(arrival_prob(i, j, p) - ref))
    elapsed = time.perf_counter() - t0
    print(f"criterion 1: max abs error {worst:.2e}, {elapsed:.1f} s")
    assert worst <= 1e-8
    assert elapsed < 10


# -- 2 --------------------------------------------------------------------


def test_criterion_02_special_function_oracles():
    t0 = time.perf_counter()
    erf_grid = np.linspace(-4, 4, 25)
    erf_err = max(abs(float(specfun.erf(x)) - oracles.erf_taylor(x)) for x in erf_grid)
    ei_err = max(abs(specfun.expint_ei(x) / oracles.ei_quad(x) - 1) for x in EI_GRID)
    hyp_err = max(abs(specfun.hyp2f2_half(x) / oracles.hyp2f2_series(x) - 1) for x in HYP_GRID)
    ent_err = max(abs(specfun.poisson_entropy(l) - oracles.poisson_entropy_brute(l)) for l in POISSON_GRID)
    elapsed = time.perf_counter() - t0
    print(f"criterion 2: erf {erf_err:.1e} abs, Ei {ei_err:.1e} rel, 2F2 {hyp_err:.1e} rel, H {ent_err:.1e} abs")
    assert min(len(erf_grid), len(EI_GRID), len(HYP_GRID), len(POISSON_GRID)) >= 20
    assert erf_err <= 1e-12
    assert ei_err <= 1e-10
    assert hyp_err <= 1e-10
    assert ent_err <= 1e-10
    assert elapsed < 30


# -- 3 --------------------------------------------------------------------


def test_criterion_03_root_solver_residuals():
    t0 = time.perf_counter()
    M = 10.0
    for alpha in np.round(np.arange(0.05, 0.451, 0.05), 2):
        mu = solve_mu(alpha, tol=1e-10)
        assert abs(bounds.mu_equation_rhs(mu) - alpha) <= 1e-10
        mass = oracles._quad_sqrt_singular(lambda x: float(bounds.mu_density(x, mu, M)), M)
        mean = oracles._quad_sqrt_singular(lambda x: x * float(bounds.mu_density(x, mu, M)), M)
        assert abs(mass - 1) <= 1e-8
        assert abs(mean - alpha * M) <= 1e-6
    assert len(PHI_CONFIGS) == 10
    for E_m, M_, p_star in PHI_CONFIGS:
        cons = ConstraintSet(E_m, M_)
        root = solve_phi(cons, p_star, tol=1e-10)
        assert bounds.phi_equation_residual(root.phi, cons, p_star) <= 1e-10
        terms = oracles.phi_density_terms(root.phi, p_star, M_)
        assert abs(root.c_prime * terms["Z"] - 1) <= 1e-8
        assert abs(terms["mean"] - E_m) <= 1e-6
    elapsed = time.perf_counter() - t0
    print(f"criterion 3: {elapsed:.1f} s")
    assert elapsed < 10


# -- 4 --------------------------------------------------------------------


def test_criterion_04_bound_rederivation():
    t0 = time.perf_counter()
    assert len(REASSEMBLY_CONFIGS) == 5
    worst = {"lb1": 0.0, "lb2_r1": 0.0, "lb2_r2": 0.0, "lb3": 0.0}
    for c, n, m, M, alpha in REASSEMBLY_CONFIGS:
        A, cons = matrix(c, n, m), ConstraintSet.from_ratio(M, alpha)
        r = lower_bound_1(A, cons)
        worst["lb1"] = max(worst["lb1"], abs(r.nats - np.nanmax(oracles.lb1_reassembled(A, cons, r.details["mu"]))))
        r2 = lower_bound_2(A, cons)
        o1, o2 = oracles.lb2_reassembled(A, cons, r2.phi)
        worst["lb2_r1"] = max(worst["lb2_r1"], abs(r2.r1.nats - o1))
        worst["lb2_r2"] = max(worst["lb2_r2"], abs(r2.r2.nats - o2))
        r3 = lower_bound_3(A, cons)
        worst["lb3"] = max(worst["lb3"], abs(r3.nats - oracles.lb3_corrected_reassembled(A, cons, r3.u, mixture_for(A, cons))))
    elapsed = time.perf_counter() - t0
    print("criterion 4: " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f" nats, {elapsed:.1f} s")
    assert max(worst.values()) <= 1e-6
    assert elapsed < 120


# -- 5 --------------------------------------------------------------------


def test_criterion_05_mixture_entropy_soundness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240611)
    excess = -math.inf
    for _ in range(50):
        a, c, v, y0, r = random_mixture(rng)
        excess = max(excess, mixture_entropy_lower(a, c, v, y0=y0, r=r) - oracles.mixture_entropy_quad(a, c, v))
    elapsed = time.perf_counter() - t0
    print(f"criterion 5: largest lower - exact = {excess:.3e} nats, {elapsed:.1f} s")
    assert excess <= 1e-6
    assert elapsed < 60


# -- 6 --------------------------------------------------------------------


def test_criterion_06_blahut_arimoto():
    t0 = time.perf_counter()
    h = 0.11 * math.log2(1 / 0.11) + 0.89 * math.log2(1 / 0.89)
    assert abs(blahut_arimoto(bsc(0.11), tol=1e-10).bits - (1 - h)) <= 1e-6
    assert abs(blahut_arimoto(bsc(0.11), tol=1e-10).bits - 0.500084) <= 1e-6
    assert abs(blahut_arimoto(bec(0.5), tol=1e-10).bits - 0.5) <= 1e-6
    _, cons, ch = small_jtac()
    tol = 1e-9
    free = blahut_arimoto(ch, tol=tol)
    capped = blahut_arimoto(ch, cost_cap=cons.M, tol=tol)
    elapsed = time.perf_counter() - t0
    print(f"criterion 6: |free - capped| = {abs(free.nats - capped.nats):.1e} nats, {elapsed:.1f} s")
    assert abs(free.nats - capped.nats) <= 2 * tol
    assert elapsed < 10


# -- 7 --------------------------------------------------------------------


def test_criterion_07_ordering_fig3a(runs):
    out, secs = runs("fig3a")
    rows = rate_table(out, "fig3a")
    assert len(rows) == 4 and all(r["status"] == "ok" for r in rows)
    assert all(r["n"] <= 4 for r in rows)
    for r in rows:
        print(f"criterion 7: M={r['sweep_value']:g} ub {r['ub']:.4f} >= jtac {r['ba_jtac']:.4f} >= cb {r['ba_cb']:.4f}, tb {r['tb']:.4f}")
    print(f"criterion 7: {secs:.1f} s")
    for r in rows:
        assert r["ub"] >= r["ba_jtac"] >= r["ba_cb"]
        assert r["ba_jtac"] >= r["tb"]
    assert secs < 600


# -- 8 --------------------------------------------------------------------


def test_criterion_08a_jtac_gain_over_cb_grows_with_peak(runs):
    out, _ = runs("fig3a")
    rows = rate_table(out, "fig3a")
    gain = np.array([r["ba_jtac"] - r["ba_cb"] for r in rows])
    print(f"criterion 8(a): JTAC - CB = {np.round(gain, 4).tolist()} bits")
    assert np.all(gain > 0)
    assert np.all(np.diff(gain) > 0)


def test_criterion_08b_rates_nonincreasing_in_c(runs):
    out, _ = runs("fig4")
    rows = sorted(rate_table(out, "fig4"), key=lambda r: r["c"])
    cs = [r["c"] for r in rows]
    expected_c = sorted(c for c, _ in cli.TABLE1)
    np.testing.assert_allclose(cs, expected_c, rtol=2e-3)
    offenders = []
    for col in RATE_COLUMNS:
        vals = [r[col] for r in rows if col in r and r[col] is not None]
        if vals and np.any(np.diff(vals) > 0):
            offenders.append(col)
    print(f"criterion 8(b): columns increasing somewhere in c: {offenders or 'none'}")
    assert not offenders


def test_criterion_08c_capacity_saturates_in_m(runs):
    out, _ = runs("fig5")
    rows = rate_table(out, "fig5")
    vals = np.array([r["ba_jtac"] for r in rows])
    total, last = vals[-1] - vals[0], vals[-1] - vals[-2]
    print(f"criterion 8(c): ba_jtac over m = {np.round(vals, 4).tolist()}, last step {last / total:.2%} of total gain")
    assert np.all(np.diff(vals) >= 0)
    assert total > 0 and last < 0.05 * total


def test_criterion_08d_capacity_grows_with_receiver_resolution(runs):
    out, _ = runs("fig6")
    rows = rate_table(out, "fig6")
    vals = np.array([r["ba_jtac"] for r in rows])
    print(f"criterion 8(d): ba_jtac over n = {np.round(vals, 4).tolist()}")
    assert np.all(np.diff(vals) >= 0)


def test_criterion_08e_second_bound_crossover(runs):
    t0 = time.perf_counter()
    cons = ConstraintSet.from_ratio(15.0, 0.2)
    res = {m: lower_bound_2(matrix(1.0, 3, m, T_s=10.0), cons) for m in (2, 64)}
    for m, r in res.items():
        print(f"criterion 8(e): m={m} R1 {r.r1.nats:.4f} R2 {r.r2.nats:.4f} nats")
    budget = sum(_RUNS[k][1] for k in _RUNS if k[0] in ("fig3a", "fig4", "fig5", "fig6") and k[1] == 1)
    budget += time.perf_counter() - t0
    print(f"criterion 8: {budget:.1f} s across its sweeps")
    assert budget < 900
    assert res[2].r1.nats > res[2].r2.nats
    assert res[64].r2.nats > res[64].r1.nats


# -- 9 --------------------------------------------------------------------


def test_criterion_09_table1(capsys):
    t0 = time.perf_counter()
    assert cli.main(["table1"]) == cli.EXIT_OK
    elapsed = time.perf_counter() - t0
    out = capsys.readouterr().out
    rows = [ln.split() for ln in out.splitlines() if ln.strip() and ln.strip()[0].isdigit()]
    assert len(rows) == 6
    for (c, D), row in zip(cli.TABLE1, rows):
        assert float(row[0]) == c and float(row[1]) == D
        assert abs(float(row[2]) - c) / c <= 2e-3
    assert "half" in out and "d^2/(2D)" in out
    print(f"criterion 9: {elapsed * 1e3:.1f} ms")
    assert elapsed < 1


# -- 10 -------------------------------------------------------------------


def test_criterion_10_determinism(runs):
    mismatched = []
    for name in CONFIGS:
        first, _ = runs(name, 1)
        second, _ = runs(name, 2)
        for ext in ("csv", "svg"):
            a, b = first / f"{name}.{ext}", second / f"{name}.{ext}"
            assert a.exists() and b.exists()
            if a.read_bytes() != b.read_bytes():
                mismatched.append(a.name)
    times = ", ".join(f"{k[0]} {v[1]:.0f}s" for k, v in sorted(_RUNS.items()) if k[1] == 1)
    print(f"criterion 10: first-run times {times}")
    assert not mismatched, mismatched
