"""Acceptance criteria, one test (or pair of tests) per criterion.

Every criterion records a PASS/FAIL line with its measured numbers; the
lines are printed in the terminal summary by ``conftest.py``.
"""
import math
import time
import warnings

import numpy as np
import pytest

from cknlab.errors import TruncationWarning
from cknlab.green_radial import chi, green_hl, two_point_green, verify_estimates
from cknlab.mass import lambda_star_rad, mass, mass_sweep
from cknlab.params import derived_constants, make_params
from cknlab.radial_ode import RadialFunction
from cknlab.variational import (
    deficit_scaling,
    mass_sign_experiment,
    radial_bubble,
    rayleigh_quotient,
    spectral_gap,
)

from oracles import hyperbolic_green_two_point, hyperbolic_mass, newton_kernel

RESULTS = {}
P3 = make_params(3, 3, 1)
Q = make_params(3, 3.5, 0.8)
GRID = (np.arange(200) + 0.5) / 200


def record(num, title, ok, detail, elapsed, limit):
    ok = bool(ok) and elapsed <= limit
    prev = RESULTS.get(num)
    if prev is not None:
        ok = ok and prev[1]
        detail = prev[2] + "; " + detail
        elapsed += prev[3]
    RESULTS[num] = (title, ok, detail, elapsed, limit)
    return ok


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_c01_mass_oracle():
    lams = [0, 0.19, 0.36, 0.51, 0.64, 0.75, 0.84, 0.91, 0.96, 0.99, 1]
    with Timer() as t:
        errs = [abs(mass(P3, lam).value - hyperbolic_mass(lam)) for lam in lams]
    worst = max(errs)
    ok = record(1, "mass oracle at (3,3,1)", worst <= 1e-6,
                f"max |m + sqrt(1-lam)/(4 pi)| = {worst:.2e} over 11 lambdas", t.elapsed, 30)
    assert ok


def test_c02_threshold():
    with Timer() as t:
        lam = lambda_star_rad(P3)
    ok = record(2, "lambda_star_rad(3,3,1) = 1", abs(lam - 1) <= 1e-6,
                f"lambda_star = {lam:.10f}", t.elapsed, 60)
    assert ok


def test_c03_closed_forms():
    rng = np.random.default_rng(2024)
    worst = 0.0
    with Timer() as t:
        for _ in range(5):
            p = make_params(3, rng.uniform(3.0, 3.95), rng.uniform(0.2, 1.0))
            kappa = derived_constants(p).kappa
            G = green_hl(p, 0.0)(GRID)
            worst = max(worst, float(np.max(np.abs(G / (kappa * (GRID ** (2 - p.n) - 1)) - 1))))
    ok = record(3, "green_hl at lambda=0 is explicit", worst <= 1e-8,
                f"max relative error {worst:.2e} over 5 random (n, alpha)", t.elapsed, 30)
    assert ok


def test_c04_cross_pipeline_mass():
    cases = [(P3, 0.5), (P3, 0.9), (Q, 0.3), (Q, 0.75), (make_params(3, 3.9, 1.0), 1.0),
             (make_params(3, 3.2, 1.3), 0.6)]
    with Timer() as t:
        gaps = [abs(mass(p, lam).value - float(chi(p, lam, 0.0))) for p, lam in cases]
    ok = record(4, "integral mass equals origin limit of chi", max(gaps) <= 1e-6,
                f"max gap {max(gaps):.2e} over 6 cases", t.elapsed, 60)
    assert ok


def _c5_data():
    sets = [P3, Q, make_params(3, 3.9, 1.0)]
    grid = np.linspace(0.0, 1.0, 10)
    mono = all(np.all(np.diff([mass(p, lam).value for lam in grid]) > 0) for p in sets)
    rows = mass_sweep([(3, n, 1.0, 1.0) for n in (3.5, 3.8, 3.9, 3.95)])
    m = np.array([r.m for r in rows])
    kappa = max(derived_constants(make_params(3, n, 1.0)).kappa for n in (3.5, 3.95))
    return mono, m, kappa


def test_c05_monotonicity():
    with Timer() as t:
        mono, m, _ = _c5_data()
    increasing = bool(np.all(np.diff(m) > 0))
    ok = record(5, "monotone in lambda and in n", mono and increasing,
                f"monotone in lambda: {mono}; sweep m = {np.round(m, 5).tolist()}", t.elapsed, 120)
    assert ok


@pytest.mark.xfail(strict=True, reason="growth of m between n=3.5 and n=3.95 is below 10 kappa")
def test_c05_blowup_margin():
    with Timer() as t:
        _, m, kappa = _c5_data()
    margin = m[-1] - m[0]
    ok = record(5, "blow-up margin", margin > 10 * kappa,
                f"m(3.95) - m(3.5) = {margin:.4f} vs 10 kappa = {10 * kappa:.4f}", t.elapsed, 120)
    assert ok


def test_c06_spectral_gap():
    with Timer() as t:
        g3 = spectral_gap(P3)
        g4 = spectral_gap(make_params(3, 4, 1))
    floor = [(n - 1) ** 2 / 4 for n in (3, 4)]   # bottom of the hyperbolic spectrum
    in_range = 1 <= g3 <= 1.02 and 2.25 <= g4 <= 2.295
    ok = record(6, "spectral gap", in_range and g3 >= floor[0] and g4 >= floor[1],
                f"(3,3,1) -> {g3:.5f}, (3,4,1) -> {g4:.5f}", t.elapsed, 60)
    assert ok


def test_c07_radial_sobolev_constant():
    sets = [(3, 3, 1), (3, 4, 1), (3, 3.5, 0.8), (4, 5, 0.5), (3, 10 / 3, 0.375)]
    worst = 0.0
    with Timer() as t:
        for d, n, a in sets:
            p = make_params(d, n, a)
            U, dU = radial_bubble(p)
            f = RadialFunction.from_callable(U, dU, support=(0.0, math.inf), domain="cone")
            q = rayleigh_quotient(p, 0.0, f).value
            worst = max(worst, abs(q / derived_constants(p).c_rad - 1))
    c3 = derived_constants(P3).c_rad
    classic = abs(c3 / (0.75 * (2 * math.pi ** 2) ** (2 / 3)) - 1)
    ok = record(7, "bubble attains the radial constant", worst <= 1e-6 and classic <= 1e-10,
                f"max relative gap {worst:.2e}; c_rad(3,3,1) = {c3:.6f}", t.elapsed, 30)
    assert ok


def test_c08_deficit_scaling():
    eps = [0.2, 0.1, 0.05, 0.025]
    with Timer() as t:
        tables = {n: deficit_scaling(make_params(3, n, 1.0), eps) for n in (4.0, 4.5, 5.0)}
    rows = tables[4.5]
    slope = np.polyfit(np.log(eps), np.log([r[1] for r in rows]), 1)[0]
    mono = all(np.all(np.diff([r[3] for r in tab]) < 0) for tab in tables.values())
    ok = record(8, "deficit scaling", abs(slope - 2.5) <= 0.15 and mono,
                f"slope at n=4.5 = {slope:.3f}; ratios decreasing: {mono}", t.elapsed, 120)
    assert ok


def test_c09_mass_sign_mechanism():
    with Timer() as t:
        ex = mass_sign_experiment(P3, 0.75, [0.1, 0.05, 0.025, 0.0125])
    positive = all(gap > 0 for eps, _, gap in ex.rows if eps <= 0.05)
    ok = record(9, "mass-sign mechanism", positive and abs(ex.exponent - 1.0) <= 0.1,
                f"gaps {[f'{g:.4f}' for _, _, g in ex.rows]}; exponent {ex.exponent:.4f}",
                t.elapsed, 120)
    assert ok


def _pairs(rng, count, max_ratio, max_product=None):
    out = []
    while len(out) < count:
        hi = rng.uniform(0.1, 0.95)
        lo = hi * rng.uniform(0.05, max_ratio)
        if max_product is not None and hi * lo > max_product:
            continue
        rx, ry = (lo, hi) if rng.random() < 0.5 else (hi, lo)
        out.append((rx, ry, rng.uniform(-1, 1)))
    return np.array(out)


def _cartesian(rx, ry, c):
    s = np.sqrt(1 - c * c)
    x = np.stack([np.zeros_like(rx), np.zeros_like(rx), rx], -1)
    y = np.stack([ry * s, np.zeros_like(ry), ry * c], -1)
    return x, y


def test_c10_two_point_oracles():
    rng = np.random.default_rng(7)
    cone = _pairs(rng, 50, 0.7)
    ball = _pairs(rng, 50, 0.7, 0.6)
    with Timer() as t, warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        gc = two_point_green(P3, 0.0, cone[:, 0], cone[:, 1], cone[:, 2], 32, "cone")
        gb = two_point_green(P3, 0.5, ball[:, 0], ball[:, 1], ball[:, 2], 32, "ball")
    ec = np.max(np.abs(gc / newton_kernel(*_cartesian(*cone.T)) - 1))
    eb = np.max(np.abs(gb / hyperbolic_green_two_point(*_cartesian(*ball.T), 0.5) - 1))
    ok = record(10, "two-point mode sums", ec <= 0.01 and eb <= 0.01,
                f"cone max rel err {ec:.1e}; ball max rel err {eb:.1e}", t.elapsed, 180)
    assert ok


def test_c11_estimate_stability():
    with Timer() as t:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            s16 = verify_estimates(P3, 0.5, 200, 0, 16).sup_ratio
            s32 = verify_estimates(P3, 0.5, 200, 0, 32).sup_ratio
            q16 = verify_estimates(Q, 0.5, 200, 0, 16).sup_ratio
            q32 = verify_estimates(Q, 0.5, 200, 0, 32).sup_ratio
        change = max(abs(s32 / s16 - 1), abs(q32 / q16 - 1))
        signs = []
        for p in (P3, Q):
            lam_star = lambda_star_rad(p, 1e-6)
            for lam in (0.25, 0.5, lam_star):
                signs.append(float(np.max(chi(p, lam, GRID))))
    ok = record(11, "estimate stability and sign of chi", change < 0.05 and max(signs) <= 0,
                f"sup ratio K=16/32 {s16:.4f}/{s32:.4f} and {q16:.4f}/{q32:.4f} "
                f"(max change {change:.1e}); "
                f"max chi {max(signs):.2e}", t.elapsed, 180)
    assert ok
