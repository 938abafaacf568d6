"""Spherical-mode ODE of the weighted hyperbolic operator.

For the ``k``-th spherical harmonic the radial part ``z(rho)`` solves

    z'' + (n - 1)/rho z' - mu_k/rho**2 z + lam/(1 - rho**2)**2 z = 0,

with ``mu_k = k(k + d - 2)/alpha**2``. Both endpoints are regular singular
points: at the origin the exponents are the roots of
``g(g + n - 2) = mu_k``, at ``rho = 1`` (variable ``delta = 1 - rho``) the
roots of ``g(g - 1) + lam/4 = 0``.

Solutions are seeded from truncated Frobenius series a short distance from
each endpoint and continued with an explicit Runge-Kutta integrator. To keep
high modes in floating-point range the integrator works with the reduced
function ``h = rho**(-power) z`` for a chosen ``power``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DegeneratePair, DomainError, ResonanceError, StepFailure
from .params import Params, beta_lambda

__all__ = [
    "ModeEquation",
    "FrobeniusExpansion",
    "RadialFunction",
    "ModePair",
    "mode_equation",
    "indicial_exponents",
    "frobenius_seed",
    "integrate_mode",
    "solution_pair",
]

RHO0 = 1e-3
DELTA0 = 1e-4
ORDER = 8
RTOL = 1e-12


@dataclass(frozen=True)
class ModeEquation:
    """Radial ODE for spherical mode ``k`` at spectral parameter ``lam``.

    ``domain`` is ``"ball"`` (``0 < rho < 1``) or ``"cone"``
    (``0 < rho < inf``, only with ``lam == 0``).
    """

    params: Params
    lam: float
    k: int
    domain: str = "ball"

    @property
    def mu(self) -> float:
        d, a = self.params.d, self.params.alpha
        return self.k * (self.k + d - 2) / a ** 2

    @property
    def origin_exponents(self) -> tuple[float, float]:
        h = 0.5 * (self.params.n - 2.0)
        s = math.sqrt(h * h + self.mu)
        return -h + s, -h - s

    @property
    def boundary_exponents(self) -> tuple[float, float]:
        b = beta_lambda(self.lam)
        return b, 1.0 - b

    def coefficients(self, rho):
        """Return ``(P, Q)`` with ``z'' = -P z' - Q z``."""
        n = self.params.n
        P = (n - 1.0) / rho
        Q = -self.mu / rho ** 2
        if self.lam != 0.0:
            Q = Q + self.lam / (1.0 - rho * rho) ** 2
        return P, Q


def mode_equation(params: Params, lam: float, k: int = 0, domain: str = "ball") -> ModeEquation:
    """Build a validated :class:`ModeEquation`."""
    if lam > 1:
        raise DomainError(f"lambda must be <= 1, got {lam}")
    if int(k) != k or k < 0:
        raise DomainError(f"mode index must be a non-negative integer, got {k}")
    if domain not in ("ball", "cone"):
        raise DomainError(f"unknown domain {domain!r}")
    if domain == "cone" and lam != 0:
        raise DomainError("the cone problem is only defined for lambda = 0")
    return ModeEquation(params, float(lam), int(k), domain)


def indicial_exponents(mode: ModeEquation, endpoint: str) -> tuple[float, float]:
    """Indicial roots ``(larger, smaller)`` at ``"origin"`` or ``"boundary"``."""
    if endpoint == "origin":
        return mode.origin_exponents
    if endpoint == "boundary":
        if mode.domain == "cone":
            raise DomainError("the cone has no finite boundary")
        return mode.boundary_exponents
    raise DomainError(f"unknown endpoint {endpoint!r}")


# -- Frobenius series --------------------------------------------------------

def _pq_series(mode: ModeEquation, endpoint: str, order: int):
    # x^2 z'' + x P(x) z' + Q(x) z = 0 with P, Q as power series in x
    n, lam, mu = mode.params.n, mode.lam, mode.mu
    p = np.zeros(order)
    q = np.zeros(order)
    if endpoint == "origin":
        p[0] = n - 1.0
        q[0] = -mu
        # lam rho^2/(1 - rho^2)^2 = lam sum (j+1) rho^(2j+2)
        for j in range((order - 2) // 2 + 1):
            if 2 * j + 2 < order:
                q[2 * j + 2] += lam * (j + 1)
    else:
        # delta = 1 - rho; 1 - rho^2 = delta (2 - delta)
        j = np.arange(order)
        p[1:] = -(n - 1.0)
        q[:] = lam * (j + 1) / 2.0 ** (j + 2)
        q[2:] -= mu * (j[2:] - 1)
    return p, q


@dataclass(frozen=True)
class FrobeniusExpansion:
    """Truncated series ``x**exponent * sum c_m x**m`` about an endpoint.

    ``x = rho`` at the origin and ``x = 1 - rho`` at the boundary.
    """

    mode: ModeEquation
    endpoint: str
    exponent: float
    coefficients: np.ndarray
    offset: float

    def series(self, x):
        """Reduced series ``S(x) = sum c_m x**m`` and ``S'(x)``."""
        x = np.asarray(x, dtype=float)
        c = self.coefficients
        m = np.arange(len(c))
        S = np.polynomial.polynomial.polyval(x, c)
        dS = np.polynomial.polynomial.polyval(x, (c * m)[1:]) if len(c) > 1 else 0.0 * x
        return S, dS

    def local(self, x):
        """Value and first two derivatives with respect to the local variable."""
        x = np.asarray(x, dtype=float)
        c = self.coefficients
        e = self.exponent + np.arange(len(c))
        xs = x[..., None] ** e
        z = (c * xs).sum(-1)
        dz = (c * e * xs).sum(-1) / x
        d2z = (c * e * (e - 1) * xs).sum(-1) / (x * x)
        return z, dz, d2z

    def rho_derivatives(self, rho):
        """``(z, z', z'')`` as functions of ``rho``."""
        rho = np.asarray(rho, dtype=float)
        if self.endpoint == "origin":
            return self.local(rho)
        z, dz, d2z = self.local(1.0 - rho)
        return z, -dz, d2z

    def residual(self, rho, relative: bool = True):
        """ODE residual of the truncated series at ``rho``."""
        z, dz, d2z = self.rho_derivatives(rho)
        P, Q = self.mode.coefficients(np.asarray(rho, dtype=float))
        terms = np.stack([d2z, P * dz, Q * z])
        res = terms.sum(0)
        if relative:
            den = np.abs(terms).sum(0)
            res = np.divide(res, den, out=np.zeros_like(res), where=den > 0)
        return res

    def reduced(self, rho, power: float):
        """Return ``h = rho**(-power) z`` and ``h'`` for seeding the integrator."""
        rho = np.asarray(rho, dtype=float)
        if self.endpoint == "origin" and power == self.exponent:
            return self.series(rho)
        z, dz, _ = self.rho_derivatives(rho)
        scale = rho ** (-power)
        return scale * z, scale * (dz - power * z / rho)


def _recurrence(mode, endpoint, s, order):
    p, q = _pq_series(mode, endpoint, order)
    F = lambda r: r * (r - 1.0) + p[0] * r + q[0]
    c = np.zeros(order)
    c[0] = 1.0
    for m in range(1, order):
        rhs = 0.0
        for j in range(1, m + 1):
            rhs += (p[j] * (s + m - j) + q[j]) * c[m - j]
        f = F(s + m)
        scale = abs(s + m) ** 2 + abs(p[0] * (s + m)) + abs(q[0]) + 1.0
        if abs(f) <= 1e-12 * scale:
            if abs(rhs) <= 1e-12 * (np.abs(c[:m]).max() * scale):
                c[m] = 0.0
                continue
            raise ResonanceError(
                f"exponent {s} resonates at order {m}; a logarithmic term is needed")
        c[m] = -rhs / f
    return c


def frobenius_seed(mode: ModeEquation, endpoint: str, exponent: float | None = None,
                   offset: float | None = None, order: int = ORDER,
                   tol: float = 1e-10) -> FrobeniusExpansion:
    """Frobenius coefficients about an endpoint.

    Parameters
    ----------
    mode : ModeEquation
    endpoint : {"origin", "boundary"}
    exponent : float, optional
        One of the indicial roots; defaults to the larger one.
    offset : float, optional
        Distance from the endpoint where the series will seed the integrator.
        It is halved until the relative ODE residual drops below ``tol``.
    order : int
        Number of coefficients kept.

    Raises
    ------
    ResonanceError
        If the recurrence needs a logarithmic term.
    """
    if order < 1:
        raise DomainError("order must be positive")
    roots = indicial_exponents(mode, endpoint)
    if exponent is None:
        exponent = roots[0]
    if min(abs(exponent - r) for r in roots) > 1e-9 * (1 + abs(exponent)):
        raise DomainError(f"{exponent} is not an indicial root {roots}")
    if offset is None:
        offset = RHO0 if endpoint == "origin" else DELTA0
    c = _recurrence(mode, endpoint, exponent, order)
    exp = FrobeniusExpansion(mode, endpoint, float(exponent), c, float(offset))
    for _ in range(40):
        rho = exp.offset if endpoint == "origin" else 1.0 - exp.offset
        r = abs(float(exp.residual(rho)))
        if not np.isfinite(r) or r > tol:
            exp = FrobeniusExpansion(mode, endpoint, float(exponent), c, exp.offset / 2)
        else:
            break
    return exp


# -- radial functions --------------------------------------------------------

Evaluator = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass
class RadialFunction:
    """Sampled radial function with a continuous evaluator.

    ``values`` and ``derivatives`` on ``grid`` are those of the reduced
    function ``h = rho**(-power) f``; ``power = 0`` means plain values.
    ``left``/``right`` evaluators, when present, extend the function below
    ``grid[0]`` or above ``grid[-1]`` (typically with Frobenius series).
    """

    grid: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    origin_exponent: float | None = None
    boundary_exponent: float | None = None
    power: float = 0.0
    domain: str = "ball"
    support: tuple[float, float] = (0.0, 1.0)
    breakpoints: tuple[float, ...] = ()
    _inner: Evaluator | None = field(default=None, repr=False)
    left: Evaluator | None = field(default=None, repr=False)
    right: Evaluator | None = field(default=None, repr=False)

    @classmethod
    def from_callable(cls, func, dfunc, support=(0.0, 1.0), domain="ball",
                      breakpoints=(), num=257, **kw) -> "RadialFunction":
        """Wrap an analytic profile ``func`` with derivative ``dfunc``."""
        lo, hi = support
        top = hi if np.isfinite(hi) else lo + 10.0
        grid = np.linspace(lo, top, num)[1:-1]
        f = lambda r: (np.asarray(func(r), dtype=float), np.asarray(dfunc(r), dtype=float))
        vals, ders = f(grid)
        return cls(grid, vals, ders, domain=domain, support=(lo, hi),
                   breakpoints=tuple(breakpoints), _inner=f, **kw)

    def reduced(self, rho):
        """Reduced value and derivative ``(h, h')`` at ``rho``."""
        rho = np.asarray(rho, dtype=float)
        flat = np.atleast_1d(rho).ravel()
        h = np.empty_like(flat)
        dh = np.empty_like(flat)
        lo, hi = self.grid[0], self.grid[-1]
        eps = 1e-12 * max(1.0, abs(hi))
        masks = []
        if self.left is not None:
            masks.append((flat < lo, self.left))
        if self.right is not None:
            masks.append((flat > hi, self.right))
        done = np.zeros(flat.shape, bool)
        for mask, fn in masks:
            if mask.any():
                h[mask], dh[mask] = fn(flat[mask])
                done |= mask
        rest = ~done
        if rest.any():
            x = flat[rest]
            if self._inner is None:
                raise DomainError("function has no evaluator")
            if self.left is None and self.right is None and self._is_sampled():
                if (x < lo - eps).any() or (x > hi + eps).any():
                    raise DomainError(f"rho outside sampled range [{lo}, {hi}]")
                x = np.clip(x, lo, hi)
            hv, dv = self._inner(x)
            h[rest], dh[rest] = hv, dv
        return h.reshape(rho.shape), dh.reshape(rho.shape)

    def _is_sampled(self):
        return getattr(self._inner, "_sampled", False)

    def __call__(self, rho):
        h, _ = self.reduced(rho)
        if self.power == 0.0:
            return h
        return np.asarray(rho, dtype=float) ** self.power * h

    def derivative(self, rho):
        rho = np.asarray(rho, dtype=float)
        h, dh = self.reduced(rho)
        if self.power == 0.0:
            return dh
        return rho ** self.power * (dh + self.power * h / rho)


def _sampled(fn):
    fn._sampled = True
    return fn


def integrate_mode(mode: ModeEquation, start: float, stop: float, init,
                   rtol: float = RTOL, power: float = 0.0) -> RadialFunction:
    """Continue a mode solution from ``start`` to ``stop``.

    Parameters
    ----------
    init : (h, h')
        Reduced value and derivative at ``start``, where
        ``h = rho**(-power) z``.
    power : float
        Power of ``rho`` factored out of the solution.

    Notes
    -----
    Uses the 8th order Dormand-Prince pair with dense output.
    """
    hi = max(start, stop)
    lo = min(start, stop)
    if lo <= 0:
        raise DomainError("integration interval must avoid rho = 0")
    if mode.domain == "ball" and hi >= 1:
        raise DomainError("integration interval must stay inside the ball")
    n, mu, lam = mode.params.n, mode.mu, mode.lam
    g = float(power)
    c1 = 2.0 * g + n - 1.0
    c0 = g * (g + n - 2.0) - mu

    def rhs(r, y):
        acc = -c1 / r * y[1] - c0 / (r * r) * y[0]
        if lam:
            acc -= lam / (1.0 - r * r) ** 2 * y[0]
        return [y[1], acc]

    y0 = np.array(init, dtype=float)
    scale = max(abs(y0[0]), abs(y0[1]) * lo, 1e-300)
    sol = solve_ivp(rhs, (start, stop), y0, method="DOP853", rtol=rtol,
                    atol=rtol * 1e-4 * scale, dense_output=True)
    if sol.status != 0:
        raise StepFailure(sol.message)
    order = np.argsort(sol.t)
    dense = sol.sol
    inner = _sampled(lambda r: tuple(dense(r)))
    return RadialFunction(sol.t[order], sol.y[0][order], sol.y[1][order], power=g,
                          domain=mode.domain, _inner=inner)


# -- solution pairs ----------------------------------------------------------

class ModePair(NamedTuple):
    """Origin-regular ``u`` and boundary-decaying ``v`` with their Wronskian.

    ``wronskian = rho**(n-1) (u' v - u v')``, constant in ``rho``.
    """

    u: RadialFunction
    v: RadialFunction
    wronskian: float

    def kernel(self, s, t, alpha: float):
        """Mode Green kernel ``u(min) v(max) / (alpha * W)``, vectorized."""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        lo = np.minimum(s, t)
        hi = np.maximum(s, t)
        w, _ = self.u.reduced(lo)
        y, _ = self.v.reduced(hi)
        logs = self.u.power * np.log(lo) + self.v.power * np.log(hi)
        return np.exp(logs) * w * y / (alpha * self.wronskian)


def _wronskian(pair_u, pair_v, gp, gm, rho):
    w, dw = pair_u.reduced(rho)
    y, dy = pair_v.reduced(rho)
    return rho * (dw * y - w * dy) + (gp - gm) * w * y


def _origin_seed(mode, exponent, order=24, tol=1e-15):
    # largest offset at which the truncated tail is negligible
    for off in (0.2, 0.1, 0.05, 0.02, 0.01, 5e-3, 2e-3, RHO0):
        e = frobenius_seed(mode, "origin", exponent, off, order, tol=1.0)
        c = np.abs(e.coefficients)
        tail = c[-2:] @ (off ** np.arange(order - 2, order))
        if tail <= tol * abs(e.series(off)[0]):
            return e
    return frobenius_seed(mode, "origin", exponent, RHO0, order)


def solution_pair(mode: ModeEquation, rho0: float | None = None, delta0: float = DELTA0,
                  order: int = ORDER, rtol: float = RTOL, rho_top: float = 1.0 - 1e-7) -> ModePair:
    """Origin-regular and boundary-decaying solutions of a mode equation.

    ``u ~ rho**gamma_plus`` at the origin and ``v ~ (1-rho)**beta`` at the
    boundary, both with unit leading coefficient. On the cone (``lam = 0``)
    the exact power solutions ``rho**gamma_plus`` and ``rho**gamma_minus``
    are returned.

    For ``k >= 1`` and ``rho0=None`` the origin seed is placed as far out as
    a 24-term series allows; this keeps the integration short for high modes.
    Below the seed, ``v`` is continued by the origin Frobenius basis matched
    at the seed point; above ``rho_top`` ``u`` is continued from ``v`` by
    reduction of order.

    Raises
    ------
    DegeneratePair
        If the Wronskian vanishes or is not constant to ``1e-6``.
    """
    gp, gm = mode.origin_exponents
    if mode.domain == "cone":
        u = _power_function(gp, mode.domain)
        v = _power_function(gm, mode.domain)
        return ModePair(u, v, gp - gm)

    # origin-regular branch, reduced by rho^gamma_plus
    if rho0 is None and mode.k > 0:
        su = _origin_seed(mode, gp)
    else:
        su = frobenius_seed(mode, "origin", gp, RHO0 if rho0 is None else rho0, order)
    r0 = su.offset
    u = integrate_mode(mode, r0, rho_top, su.series(r0), rtol, power=gp)
    u.left = lambda r, su=su: su.series(r)
    u.origin_exponent = gp

    # boundary-decaying branch, reduced by rho^gamma_minus
    beta = mode.boundary_exponents[0]
    sv = frobenius_seed(mode, "boundary", beta, delta0, order)
    r1 = 1.0 - sv.offset
    try:
        sm = (frobenius_seed(mode, "origin", gm, r0, order) if su.offset == RHO0
              else _origin_seed(mode, gm))
    except ResonanceError:
        sm = None
    if sm is not None and sm.offset < r0:
        sm = None
    floor = r0 if sm is not None else 1e-8
    v = integrate_mode(mode, r1, floor, sv.reduced(r1, gm), rtol, power=gm)
    v.right = lambda r, sv=sv, gm=gm: sv.reduced(r, gm)
    v.boundary_exponent = beta
    if sm is not None:
        v.left = _origin_extension(v, sm, su, gp, gm, r0)

    probes = np.array([0.1, 0.3, 0.5, 0.7, 0.9])
    W = _wronskian(u, v, gp, gm, probes)
    W0 = W[2]
    if not np.isfinite(W0) or abs(W0) < 1e-300:
        raise DegeneratePair("Wronskian vanishes")
    drift = np.max(np.abs(W - W0)) / abs(W0)
    if drift > 1e-6:
        raise DegeneratePair(f"Wronskian drifts by {drift:.2e}")
    u.right = _boundary_continuation(u, sv, float(W0), mode.params.n, gp, rho_top)
    return ModePair(u, v, float(W0))


def _boundary_continuation(u, sv, W, n, gp, top, nodes=48):
    # reduction of order through the boundary series v:
    # u = v (u/v(top) + W int_top^rho dt / (t^(n-1) v^2)),
    # the integral taken in s = log(delta_top/delta)
    z, dz, _ = sv.rho_derivatives(np.array([top]))
    ratio = float(u(np.array([top]))[0] / z[0])
    dtop = 1.0 - top
    x, w = np.polynomial.legendre.leggauss(nodes)

    def ext(r):
        r = np.asarray(r, dtype=float)
        delta = 1.0 - r
        S = np.log(dtop / delta)
        s = 0.5 * S[:, None] * (x + 1)
        dd = dtop * np.exp(-s)
        vv, _, _ = sv.local(dd)
        integrand = dd / ((1.0 - dd) ** (n - 1) * vv * vv)
        I = 0.5 * S * (integrand @ w)
        v, dv, _ = sv.rho_derivatives(r)
        q = ratio + W * I
        val = v * q
        der = dv * q + W / (r ** (n - 1) * v)
        scale = r ** (-gp)
        return scale * val, scale * (der - gp * val / r)
    return ext


def _origin_extension(v, sm, su, gp, gm, r0):
    # reduced v = A S_minus + B rho^(gp - gm) S_plus, matched at r0
    gap = gp - gm

    def basis(r):
        s1, d1 = sm.series(r)
        s2, d2 = su.series(r)
        p = r ** gap
        return s1, d1, p * s2, p * (d2 + gap * s2 / r)

    b1, db1, b2, db2 = basis(np.float64(r0))
    h, dh = v.reduced(np.array([r0]))
    A, B = np.linalg.solve([[b1, b2], [db1, db2]], [h[0], dh[0]])

    def ext(r):
        b1, db1, b2, db2 = basis(r)
        return A * b1 + B * b2, A * db1 + B * db2
    return ext


def _power_function(g, domain):
    f = lambda r: (np.ones_like(r), np.zeros_like(r))
    grid = np.array([0.0, 1.0])
    rf = RadialFunction(grid, np.ones(2), np.zeros(2), origin_exponent=g, power=g,
                        domain=domain, support=(0.0, math.inf), _inner=f)
    return rf
