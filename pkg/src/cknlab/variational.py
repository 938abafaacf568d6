"""Rayleigh quotients, Sobolev test families and the radial spectral gap.

All integrals are radial: ``dmu_E = |S^{d-1}| rho**(n-1)/alpha drho`` and
``|grad f|^2 = alpha**2 f'(rho)**2``. Quadratures use composite
Gauss-Legendre panels graded geometrically towards singular endpoints and
are refined until two successive rules agree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as L
from scipy import linalg

from .errors import BvpFailure, DomainError, EigenFailure
from .params import Params, derived_constants
from .radial_ode import RadialFunction, mode_equation, solution_pair

__all__ = [
    "QuotientReport",
    "TestFamily",
    "SignExperiment",
    "rayleigh_quotient",
    "radial_bubble",
    "bubble_cutoff",
    "cutoff",
    "deficit_scaling",
    "euclidean_deficit",
    "hyperbolic_deficit",
    "corrected_test_function",
    "mass_sign_experiment",
    "spectral_gap",
]


# -- panel quadrature --------------------------------------------------------

class Panels:
    """Composite Gauss-Legendre rule with cumulative integration and interpolation."""

    def __init__(self, edges, m: int = 16):
        self.edges = np.asarray(edges, dtype=float)
        self.m = m
        x, w = L.leggauss(m)
        a, b = self.edges[:-1, None], self.edges[1:, None]
        self.half = (b - a) / 2
        self.nodes = (a + b) / 2 + self.half * x
        self.weights = self.half * w
        V = L.legvander(x, m - 1)
        self._vinv = np.linalg.inv(V)
        # S[i, j] = int_{-1}^{x_i} l_j
        anti = np.stack([L.legint(col, lbnd=-1) for col in self._vinv.T], axis=1)
        self._cum = L.legvander(x, m) @ anti

    def integrate(self, y) -> float:
        return float(np.sum(y * self.weights))

    def cumulative(self, y):
        """Integral from ``edges[0]`` to each node."""
        within = self.half * (y @ self._cum.T)
        tot = np.sum(y * self.weights, axis=1)
        start = np.concatenate([[0.0], np.cumsum(tot)[:-1]])
        return within + start[:, None]

    def interp(self, y, xq):
        """Evaluate the panelwise interpolant of nodal values ``y`` at ``xq``."""
        xq = np.asarray(xq, dtype=float)
        flat = xq.ravel()
        idx = np.clip(np.searchsorted(self.edges, flat, side="right") - 1, 0, len(self.edges) - 2)
        a, b = self.edges[idx], self.edges[idx + 1]
        t = (2 * flat - a - b) / (b - a)
        coef = y @ self._vinv.T
        out = np.sum(L.legvander(t, self.m - 1) * coef[idx], axis=1)
        return out.reshape(xq.shape)


def _geometric(lo, hi, toward, levels, q=0.5):
    # breakpoints in [lo, hi] refined geometrically towards `toward`
    span = hi - lo
    steps = span * q ** np.arange(1, levels + 1)
    if toward == "lo":
        pts = lo + steps
    else:
        pts = hi - steps
    return np.concatenate([[lo, hi], pts])


def _edges(lo, hi, breaks=(), grade_lo=True, grade_hi=False, levels=48):
    pts = [np.array([lo, hi])]
    cuts = sorted({lo, hi, *[b for b in breaks if lo < b < hi]})
    for i, (a, b) in enumerate(zip(cuts[:-1], cuts[1:])):
        first, last = i == 0, i == len(cuts) - 2
        if first and grade_lo and last and grade_hi:
            mid = 0.5 * (a + b)
            pts += [_geometric(a, mid, "lo", levels), _geometric(mid, b, "hi", levels)]
        elif first and grade_lo:
            pts.append(_geometric(a, b, "lo", levels))
        elif last and grade_hi:
            pts.append(_geometric(a, b, "hi", levels))
        else:
            pts.append(np.linspace(a, b, 5))
    return np.unique(np.concatenate(pts))


_BELOW_ONE = np.nextafter(1.0, 0.0)


def _radial_rule(support, domain, breaks, m, grade_hi):
    """Nodes and weights (including the Jacobian of the tail map) on the support."""
    lo, hi = support
    if math.isfinite(hi):
        P = Panels(_edges(lo, hi, breaks, lo == 0.0, grade_hi), m)
        return np.minimum(P.nodes.ravel(), _BELOW_ONE), P.weights.ravel()
    # [lo, 1] plus [1, inf) through rho = 1/t
    top = max(1.0, lo)
    P1 = Panels(_edges(lo, top, breaks, lo == 0.0, False), m)
    tb = [1.0 / b for b in breaks if b > top]
    P2 = Panels(_edges(0.0, 1.0 / top, tb, True, False), m)
    t = P2.nodes.ravel()
    return (np.concatenate([P1.nodes.ravel(), 1.0 / t]),
            np.concatenate([P1.weights.ravel(), P2.weights.ravel() / t ** 2]))


def _refine(compute, tol, orders=(12, 20, 28, 36, 48)):
    prev = None
    for m in orders:
        cur = compute(m)
        if prev is not None and abs(cur[0] - prev[0]) <= tol * abs(cur[0]):
            return cur, m, True
        prev = cur
    return cur, m, False


# -- Rayleigh quotient -------------------------------------------------------

@dataclass(frozen=True)
class QuotientReport:
    """Improved Sobolev quotient of a radial profile.

    Attributes
    ----------
    quotient : float
        ``q_form / lp_norm**2``.
    q_form : float
        ``gradient - lam * potential``.
    lp_norm : float
        ``||f||_{L^p(mu_E)}``.
    gradient, potential : float
        ``int |grad f|^2 dmu_E`` and ``alpha^2 int f^2/(1-rho^2)^2 dmu_E``.
    hyperbolic_l2 : float
        ``int phi^2 f^2 dmu_E``, the hyperbolic L^2 mass of ``phi^((2-n)/2) f``.
    deficit : float
        ``q_form - c_rad * lp_norm**2``.
    order : int
        Gauss order per panel of the accepted rule.
    converged : bool
    """

    quotient: float
    q_form: float
    lp_norm: float
    gradient: float
    potential: float
    hyperbolic_l2: float
    deficit: float
    order: int
    converged: bool

    @property
    def value(self) -> float:
        return self.quotient

    @property
    def lp_norm_sq(self) -> float:
        return self.lp_norm ** 2


def rayleigh_quotient(params: Params, lam: float, f: RadialFunction, tol: float = 1e-8,
                      ) -> QuotientReport:
    """Quotient ``Q_lam(f) / ||f||_p^2`` for a radial profile ``f``.

    ``Q_lam(f) = int |grad f|^2 dmu_E - lam alpha^2 int f^2/(1-rho^2)^2 dmu_E``.
    On the cone only ``lam = 0`` is meaningful.
    """
    if lam > 1:
        raise DomainError(f"lambda must be <= 1, got {lam}")
    if f.domain == "cone" and lam != 0:
        raise DomainError("potential term needs the ball")
    const = derived_constants(params)
    n, al, p = params.n, params.alpha, const.p
    grade_hi = f.domain == "ball" and f.support[1] >= 1.0

    def compute(m):
        r, w = _radial_rule(f.support, f.domain, f.breakpoints, m, grade_hi)
        dm = w * const.sphere_area * r ** (n - 1) / al
        val = f(r)
        der = f.derivative(r)
        grad = float(np.sum(al * al * der * der * dm))
        pot = l2 = 0.0
        if f.domain == "ball":
            pot = float(np.sum(al * al * val * val / (1 - r * r) ** 2 * dm))
            l2 = 4.0 * pot / (al * al)
        lp = float(np.sum(np.abs(val) ** p * dm)) ** (1.0 / p)
        return (grad - lam * pot) / lp ** 2, grad, pot, lp, l2

    (q, grad, pot, lp, l2), m, ok = _refine(compute, tol)
    qf = grad - lam * pot
    return QuotientReport(q, qf, lp, grad, pot, l2, qf - const.c_rad * lp * lp, m, ok)


# -- test families -----------------------------------------------------------

@dataclass
class TestFamily:
    """A member of a family of Sobolev test functions.

    ``profile`` is the radial function; ``lagrange_constant`` is the
    Euler-Lagrange constant of the profile ``U = kappa (1+rho^2)^((2-n)/2)``
    used to build the family, ``-L_E U = Lambda U^(p-1)``.
    """

    __test__ = False

    kind: str
    params: Params
    eps: float
    lam: float
    profile: RadialFunction
    lagrange_constant: float
    extras: dict = field(default_factory=dict)


def radial_bubble(params: Params, scale: float = 1.0, amplitude: float = 1.0):
    """``U(rho) = amplitude * s**((2-n)/2) (1 + (rho/s)^2)**((2-n)/2)`` and its derivative."""
    h = 0.5 * (2.0 - params.n)
    s = float(scale)

    def U(r):
        r = np.asarray(r, dtype=float)
        return amplitude * s ** h * (1 + (r / s) ** 2) ** h

    def dU(r):
        r = np.asarray(r, dtype=float)
        return amplitude * s ** h * 2 * h * (r / s ** 2) * (1 + (r / s) ** 2) ** (h - 1)
    return U, dU


def cutoff(rho, inner: float = 0.5, outer: float = 0.75, deriv: bool = False):
    """C^2 cutoff: 1 below ``inner``, 0 above ``outer``, quintic in between."""
    rho = np.asarray(rho, dtype=float)
    t = np.clip((rho - inner) / (outer - inner), 0.0, 1.0)
    if deriv:
        return -30 * t * t * (1 - t) ** 2 / (outer - inner)
    return 1 - t ** 3 * (10 - 15 * t + 6 * t * t)


def _lagrange(params, kappa):
    n, al = params.n, params.alpha
    p = 2 * n / (n - 2)
    return kappa ** (2 - p) * n * (n - 2) * al * al


def bubble_cutoff(params: Params, eps: float) -> TestFamily:
    """Truncated bubble ``cutoff(rho) * U_eps(rho)``.

    ``U = kappa (1+rho^2)^((2-n)/2)`` and
    ``U_eps(rho) = eps^(-(n-2)/2) U(rho/eps)``.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    kappa = derived_constants(params).kappa
    U, dU = radial_bubble(params, eps, kappa)

    def f(r):
        return cutoff(r) * U(r)

    def df(r):
        return cutoff(r, deriv=True) * U(r) + cutoff(r) * dU(r)
    prof = RadialFunction.from_callable(f, df, support=(0.0, 0.75), breakpoints=(0.5,))
    return TestFamily("bubble_cutoff", params, float(eps), 0.0, prof, _lagrange(params, kappa))


def euclidean_deficit(params: Params, f: RadialFunction, constant: float | None = None,
                      tol: float = 1e-10) -> float:
    """``int |grad f|^2 dmu_E - C ||f||_p^2`` (``C`` defaults to the radial constant)."""
    if constant is None:
        constant = derived_constants(params).c_rad
    r = rayleigh_quotient(params, 0.0, f, tol)
    return r.gradient - constant * r.lp_norm ** 2


def hyperbolic_deficit(params: Params, F, dF, B: float, constant: float | None = None,
                       support=(0.0, 1.0), breakpoints=(), m: int = 28) -> float:
    """``int |grad F|_H^2 dmu_H - B int F^2 dmu_H - C ||F||_{L^p(mu_H)}^2``.

    The hyperbolic metric is ``phi^2`` times the Euclidean one with
    ``phi = 2/(1 - rho^2)``; ``F`` and ``dF`` are callables in ``rho``.
    """
    const = derived_constants(params)
    if constant is None:
        constant = const.c_rad
    n, al = params.n, params.alpha
    r, w = _radial_rule(support, "ball", breakpoints, m, support[1] >= 1.0)
    phi = 2.0 / (1 - r * r)
    dm = w * const.sphere_area * r ** (n - 1) / al
    v, dv = F(r), dF(r)
    grad = np.sum(al * al * dv * dv * phi ** (n - 2) * dm)
    l2 = np.sum(v * v * phi ** n * dm)
    lp = np.sum(np.abs(v) ** const.p * phi ** n * dm) ** (2 / const.p)
    return float(grad - B * l2 - constant * lp)


# -- deficit scaling ---------------------------------------------------------

def deficit_scaling(params: Params, eps_list, tol: float = 1e-10) -> list[tuple]:
    """Deficit of truncated bubbles against the radial constant.

    Returns rows ``(eps, deficit, f2_mass, ratio)`` with
    ``f2_mass = int F_eps^2 dmu_H = int phi^2 f_eps^2 dmu_E`` and
    ``ratio = deficit / f2_mass``.

    Notes
    -----
    The untruncated bubble has zero deficit, so the deficit is assembled
    from integrals over ``rho > 1/2`` only, where truncation acts. This
    avoids subtracting two nearly equal numbers for small ``eps``.
    """
    const = derived_constants(params)
    n, al, p, C = params.n, params.alpha, const.p, const.c_rad
    kappa = const.kappa
    area = const.sphere_area
    rows = []
    for eps in eps_list:
        U, dU = radial_bubble(params, eps, kappa)

        def compute(m):
            r, w = _radial_rule((0.5, math.inf), "cone", (0.75,), m, False)
            dm = w * area * r ** (n - 1) / al
            chi_, dchi = cutoff(r), cutoff(r, deriv=True)
            u, du = U(r), dU(r)
            df = dchi * u + chi_ * du
            dgrad = np.sum(al * al * (df * df - du * du) * dm)
            dpow = np.sum(u ** p * (1 - chi_ ** p) * dm)
            r0, w0 = _radial_rule((0.0, 0.75), "ball", (0.5,), m, False)
            dm0 = w0 * area * r0 ** (n - 1) / al
            f0 = cutoff(r0) * U(r0)
            f2 = np.sum((2.0 / (1 - r0 * r0)) ** 2 * f0 * f0 * dm0)
            ru, wu = _radial_rule((0.0, math.inf), "cone", (eps,), m, False)
            total = np.sum(U(ru) ** p * wu * area * ru ** (n - 1) / al)
            dlp = total ** (2 / p) * math.expm1((2 / p) * math.log1p(-dpow / total))
            deficit = dgrad - C * dlp
            return float(deficit), float(f2)

        (deficit, f2), _, _ = _refine(compute, tol)
        rows.append((float(eps), deficit, f2, deficit / f2))
    return rows


# -- corrected test functions ------------------------------------------------

def _unit_edges(levels=46):
    return _edges(0.0, 1.0, (), True, True, levels)


def corrected_test_function(params: Params, lam: float, eps: float, m: int = 20) -> TestFamily:
    """Bubble corrected by the regular part of the Green function.

    With ``e = eps**alpha`` and ``U = kappa (1+rho^2)^((2-n)/2)``:

    * ``Phi_eps(rho) = kappa (e^2 + rho^2)^((2-n)/2)``,
    * ``G0_eps = Phi_eps - Phi_eps(1)`` (vanishes at ``rho = 1``),
    * ``psi_eps`` solves ``-L_{H,lam} psi = V G0_eps``, ``psi(1) = 0``,
    * ``f_eps = eps^((n-2) alpha/2) (G0_eps + lam psi_eps)``.

    ``psi_eps`` is obtained by variation of parameters with the radial
    solution pair of ``-L_{H,lam}`` on composite Gauss panels.
    """
    if lam > 1:
        raise DomainError(f"lambda must be <= 1, got {lam}")
    if not eps > 0:
        raise DomainError("eps must be positive")
    const = derived_constants(params)
    n, al, kappa = params.n, params.alpha, const.kappa
    e = eps ** al
    h = 0.5 * (2.0 - n)
    amp = eps ** (0.5 * (n - 2) * al)
    phi1 = kappa * (e * e + 1.0) ** h

    def G0(r):
        return kappa * (e * e + r * r) ** h - phi1

    def dG0(r):
        return kappa * 2 * h * r * (e * e + r * r) ** (h - 1)

    P = Panels(_unit_edges(), m)
    r = np.minimum(P.nodes, _BELOW_ONE)
    if lam != 0:
        pair = solution_pair(mode_equation(params, lam, 0))
        u, du = pair.u(r), pair.u.derivative(r)
        v, dv = pair.v(r), pair.v.derivative(r)
        src = al * al / (1 - r * r) ** 2 * G0(r) * r ** (n - 1) / al
        I1 = P.cumulative(u * src)
        tail = P.cumulative(v * src)
        I2 = P.integrate(v * src) - tail
        c = 1.0 / (al * pair.wronskian)
        psi = c * (v * I1 + u * I2)
        dpsi = c * (dv * I1 + du * I2)
        if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(dpsi))):
            raise BvpFailure("non-finite correction profile")
    else:
        psi = dpsi = np.zeros_like(r)

    def f(x):
        x = np.asarray(x, dtype=float)
        return amp * (G0(x) + lam * P.interp(psi, x))

    def df(x):
        x = np.asarray(x, dtype=float)
        return amp * (dG0(x) + lam * P.interp(dpsi, x))

    def correction(x):
        """``H_eps + lam psi_eps``, the regular part of the corrected profile."""
        x = np.asarray(x, dtype=float)
        return -phi1 + lam * P.interp(psi, x)

    prof = RadialFunction.from_callable(f, df, support=(0.0, 1.0))
    return TestFamily("corrected", params, float(eps), float(lam), prof,
                      _lagrange(params, kappa),
                      {"correction": correction, "H": -phi1, "scale": e,
                       "psi": lambda x: P.interp(psi, x)})


@dataclass(frozen=True)
class SignExperiment:
    """Quotient of corrected test functions against the radial constant.

    ``rows`` holds ``(eps, quotient, gap)`` with ``gap = quotient - c_rad``;
    ``exponent`` is the least-squares slope of ``log|gap|`` on ``log eps``.
    """

    rows: list
    exponent: float
    c_rad: float


def mass_sign_experiment(params: Params, lam: float, eps_list, tol: float = 1e-10,
                         ) -> SignExperiment:
    """Rayleigh quotients of corrected test functions for decreasing ``eps``."""
    c_rad = derived_constants(params).c_rad
    rows = []
    for eps in eps_list:
        fam = corrected_test_function(params, lam, eps)
        q = rayleigh_quotient(params, lam, fam.profile, tol).value
        rows.append((float(eps), q, q - c_rad))
    eps_arr = np.array([r[0] for r in rows])
    gap = np.abs(np.array([r[2] for r in rows]))
    slope = float(np.polyfit(np.log(eps_arr), np.log(gap), 1)[0]) if len(rows) > 1 else math.nan
    return SignExperiment(rows, slope, c_rad)


# -- spectral gap ------------------------------------------------------------

def spectral_gap(params: Params, mesh_size: int = 512, support_cap: float = 1 - 1e-12) -> float:
    """Smallest radial eigenvalue of the weighted hyperbolic Laplacian on a ball.

    Minimizes ``int alpha^2 F'^2 phi^(n-2) rho^(n-1) / int F^2 phi^n rho^(n-1)``
    over continuous piecewise-linear ``F`` vanishing at ``support_cap``.
    Elements are uniform in hyperbolic distance ``r = 2 artanh(rho)``, where
    the quotient reads ``int alpha^2 F_r^2 sinh^(n-1) r / int F^2 sinh^(n-1) r``.
    The result is an upper bound for the Dirichlet eigenvalue on the
    hyperbolic ball of radius ``R = 2 artanh(support_cap)``; it decreases to
    ``(n-1)^2 alpha^2 / 4`` as the cap tends to 1.
    """
    if mesh_size < 64:
        raise DomainError("mesh_size must be at least 64")
    if not 0 < support_cap < 1:
        raise DomainError("support cap must lie in (0, 1)")
    n, al = params.n, params.alpha
    R = math.log1p(support_cap) - math.log1p(-support_cap)
    edges = np.linspace(0.0, R, mesh_size + 1)
    x, w = L.leggauss(6)
    a, b = edges[:-1, None], edges[1:, None]
    hh = (b - a)[:, 0]
    t = (a + b) / 2 + (b - a) / 2 * x
    # weight sinh^(n-1) scaled by exp(-(n-1) R) to keep entries moderate
    lw = (n - 1) * (np.log(-np.expm1(-2 * t)) + t - math.log(2.0) - R)
    wt = np.exp(lw) * (b - a) / 2 * w
    s = (x + 1) / 2                     # local coordinate of each node
    phi = np.stack([1 - s, s])          # hat functions on the reference element
    Ke = np.einsum("e,eq->e", 1.0 / hh ** 2, wt)
    Me = np.einsum("iq,jq,eq->eij", phi, phi, wt)
    N = mesh_size + 1
    A = np.zeros((N, N))
    B = np.zeros((N, N))
    for i in range(2):
        for j in range(2):
            sign = 1.0 if i == j else -1.0
            idx = np.arange(mesh_size)
            np.add.at(A, (idx + i, idx + j), al * al * sign * Ke)
            np.add.at(B, (idx + i, idx + j), Me[:, i, j])
    A, B = A[:-1, :-1], B[:-1, :-1]     # F(R) = 0
    D = 1.0 / np.sqrt(np.diag(B))
    A = A * D[:, None] * D[None, :]
    B = B * D[:, None] * D[None, :]
    try:
        vals = linalg.eigh(A, B, eigvals_only=True, subset_by_index=[0, 0])
    except (linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(str(exc)) from exc
    val = float(vals[0])
    if not math.isfinite(val):
        raise EigenFailure("non-finite eigenvalue")
    return val
