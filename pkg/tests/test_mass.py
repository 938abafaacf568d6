import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cknlab.errors import DivergentMass, DomainError
from cknlab.green_radial import chi, green_hl
from cknlab.mass import lambda_star_rad, mass, mass_sweep, thread_count
from cknlab.params import derived_constants, make_params

from oracles import hyperbolic_mass

P3 = make_params(3, 3, 1)
Q = make_params(3, 3.5, 0.8)
ORACLE_LAMBDAS = [0, 0.19, 0.36, 0.51, 0.64, 0.75, 0.84, 0.91, 0.96, 0.99, 1]


@pytest.mark.parametrize("lam", ORACLE_LAMBDAS)
def test_mass_oracle_family(lam):
    assert abs(mass(P3, lam).value - hyperbolic_mass(lam)) <= 1e-6


def test_mass_examples():
    assert mass(P3, 0.75).value == pytest.approx(-1 / (8 * math.pi), abs=1e-8)
    assert abs(mass(P3, 1.0).value) < 1e-8


@settings(max_examples=6)
@given(st.floats(3.0, 3.99), st.floats(0.2, 1.0))
def test_mass_at_zero_lambda(n, alpha):
    p = make_params(3, n, alpha)
    r = mass(p, 0.0)
    assert r.value == -derived_constants(p).kappa
    assert r.err_estimate == 0


@pytest.mark.parametrize("params", [P3, Q, make_params(3, 3.9, 1.0), make_params(3, 3.2, 1.3)])
@pytest.mark.parametrize("lam", [0.3, 0.8, 1.0])
def test_integral_and_origin_limit_agree(params, lam):
    r = mass(params, lam)
    assert abs(r.value - r.chi_limit) <= 1e-6
    assert r.err_estimate >= 0


def test_mass_strictly_increasing():
    vals = [mass(Q, lam).value for lam in np.linspace(-0.5, 1, 8)]
    assert np.all(np.diff(vals) > 0)


def test_mass_errors():
    with pytest.raises(DivergentMass, match="divergent: requires n<4"):
        mass(make_params(3, 4, 1), 0.5)
    with pytest.raises(DomainError):
        mass(P3, 1.01)


def test_integrand_origin_exponent():
    # integrand of the mass identity behaves like rho^(3-n) near the origin
    p = Q
    G = green_hl(p, 0.5)
    r = np.geomspace(1e-6, 1e-4, 7)
    integrand = G(r) * (r ** (2 - p.n) - 1) / (1 - r * r) ** 2 * r ** (p.n - 1)
    slope = np.polyfit(np.log(r), np.log(integrand), 1)[0]
    assert slope == pytest.approx(3 - p.n, abs=0.02)


def test_lambda_star_identity_point():
    assert lambda_star_rad(P3) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("params", [make_params(3, 3, 0.5), make_params(3, 3.9, 1.0)])
def test_lambda_star_brackets_sign_change(params):
    tol = 1e-6
    lam = lambda_star_rad(params, tol)
    assert 0 < lam <= 1
    if lam < 1:
        assert mass(params, lam - 2 * tol).value < 0
        assert mass(params, min(1.0, lam + 2 * tol)).value >= 0
    else:
        assert mass(params, 1.0).value <= 0


def test_lambda_star_below_one_near_four():
    # at n = 3.9 the mass at lam = 1 is positive, so the threshold drops below 1
    p = make_params(3, 3.9, 1.0)
    assert mass(p, 1.0).value > 0
    lam = lambda_star_rad(p, 1e-6)
    assert lam < 1
    assert abs(mass(p, lam).value) < 1e-5


def test_sweep_rows_and_order():
    pts = [(3, n, 1.0, 1.0) for n in (3.5, 3.8, 3.9, 3.95)] + [(3, 4.0, 1.0, 1.0), (3, 2.0, 1.0, 1.0)]
    rows = mass_sweep(pts)
    assert [r.status for r in rows] == ["ok"] * 4 + ["divergent", "domain"]
    m = [r.m for r in rows[:4]]
    assert np.all(np.diff(m) > 0)
    assert [r.n for r in rows] == [p[1] for p in pts]


def test_sweep_at_zero_lambda_is_minus_kappa():
    rows = mass_sweep([(3, n, 1.0, 0.0) for n in (3.2, 3.6)])
    for r in rows:
        assert r.m == -derived_constants(make_params(3, r.n, 1.0)).kappa


def test_sweep_threads_match_serial(monkeypatch):
    pts = [(3, n, 0.8, 0.7) for n in (3.1, 3.3, 3.7)]
    serial = mass_sweep(pts, threads=1)
    monkeypatch.setenv("CKN_THREADS", "3")
    assert thread_count() == 3
    assert mass_sweep(pts) == serial


def test_thread_count_default(monkeypatch):
    monkeypatch.setenv("CKN_THREADS", "nope")
    assert thread_count() == 1
    monkeypatch.delenv("CKN_THREADS")
    assert thread_count(2) == 2


def test_chi_approaches_mass_at_rate():
    # the first correction of the singular series is O(rho^(4-n))
    m = mass(Q, 0.6).value
    gaps = [abs(float(chi(Q, 0.6, r)) - m) for r in (1e-6, 1e-8)]
    assert gaps[1] / gaps[0] == pytest.approx(1e-2 ** (4 - Q.n), rel=0.05)
