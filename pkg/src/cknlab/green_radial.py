"""Green functions of the weighted hyperbolic operator on the unit ball.

The radial Green function with pole at the origin is the boundary-decaying
solution of the ``k = 0`` mode equation, normalized so that it behaves like
``kappa * rho**(2-n)`` at the origin. Two-point Green functions are summed
over spherical modes.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special
from scipy.stats import qmc

from .errors import DivergentMass, DomainError, NormalizationError, ResonanceError, TruncationWarning
from .params import Params, ab_coordinates, beta_lambda, derived_constants, sphere_area
from .radial_ode import (
    DELTA0,
    ORDER,
    RHO0,
    RTOL,
    FrobeniusExpansion,
    ModePair,
    RadialFunction,
    frobenius_seed,
    integrate_mode,
    mode_equation,
    solution_pair,
)

__all__ = [
    "GreenRadial",
    "EstimateReport",
    "phi_and_h0",
    "green_hl",
    "chi",
    "mode_green",
    "mode_pair",
    "two_point_green",
    "singular_part",
    "ball_template",
    "verify_estimates",
    "fundamental_ratios",
]


def phi_and_h0(params: Params, rho):
    """Radial fundamental solution and the constant that cancels it at ``rho = 1``.

    Returns ``(kappa * rho**(2-n), -kappa)``.
    """
    kappa = derived_constants(params).kappa
    rho = np.asarray(rho, dtype=float)
    return kappa * rho ** (2.0 - params.n), -kappa


@dataclass
class GreenRadial:
    """Radial Green function ``G(rho)`` with pole at the origin.

    Attributes
    ----------
    coeff_singular : float
        Coefficient of ``rho**(2-n)`` at the origin (equals ``kappa``).
    coeff_regular : float
        Coefficient of the regular origin branch. For ``n < 4`` it is the
        limit of ``G - kappa rho**(2-n)`` at the origin.
    raw_singular, raw_regular : float
        Matching coefficients before normalization.
    wronskian_singular : float
        Singular coefficient recovered independently from the Wronskian.
    match_point : float
    profile : RadialFunction
        Boundary-decaying solution ``v`` before normalization.
    """

    params: Params
    lam: float
    coeff_singular: float
    coeff_regular: float
    raw_singular: float
    raw_regular: float
    wronskian_singular: float
    match_point: float
    profile: RadialFunction
    regular: RadialFunction
    singular_series: FrobeniusExpansion | None
    regular_series: FrobeniusExpansion
    rho0: float = RHO0
    _kappa: float = field(default=0.0, repr=False)

    @property
    def scale(self) -> float:
        return self._kappa / self.raw_singular

    def _origin_parts(self, rho):
        # kappa (S_minus - rho^(2-n)) and the regular part, below rho0
        s = self.singular_series
        c = s.coefficients.copy()
        c[0] = 0.0
        tail = rho ** s.exponent * np.polynomial.polynomial.polyval(rho, c)
        reg, _ = self.regular_series.series(rho)
        reg = reg * rho ** self.regular_series.exponent
        return self._kappa * tail, self.coeff_regular * reg

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        out = self.scale * self.profile(np.maximum(rho, self.rho0))
        small = rho < self.rho0
        if small.any():
            if self.singular_series is None:
                out[small] = self.scale * self.profile(rho[small])
            else:
                r = rho[small]
                tail, reg = self._origin_parts(r)
                out[small] = self._kappa * r ** (2.0 - self.params.n) + tail + reg
        return out

    def derivative(self, rho):
        return self.scale * self.profile.derivative(np.asarray(rho, dtype=float))

    def chi(self, rho):
        """``G - kappa rho**(2-n)``, continued to ``rho = 0`` when ``n < 4``."""
        rho = np.asarray(rho, dtype=float)
        n = self.params.n
        out = np.empty(rho.shape)
        zero = rho == 0
        if zero.any():
            if n >= 4:
                raise DivergentMass("divergent: requires n<4")
            out[zero] = self.coeff_regular
        big = rho >= self.rho0
        if big.any():
            r = rho[big]
            out[big] = self.scale * self.profile(r) - self._kappa * r ** (2.0 - n)
        small = ~big & ~zero
        if small.any():
            if self.singular_series is None:
                r = rho[small]
                out[small] = self.scale * self.profile(r) - self._kappa * r ** (2.0 - n)
            else:
                tail, reg = self._origin_parts(rho[small])
                out[small] = tail + reg
        return out

    @property
    def origin_limit(self) -> float:
        """Limit of :meth:`chi` at the origin."""
        if self.params.n >= 4:
            raise DivergentMass("divergent: requires n<4")
        return self.coeff_regular


@lru_cache(maxsize=256)
def _green_cached(params, lam, rho_match, rho0, delta0, order, rtol):
    kappa = derived_constants(params).kappa
    mode = mode_equation(params, lam, 0)
    gp, gm = mode.origin_exponents
    pair = solution_pair(mode, rho0=rho0, delta0=delta0, order=order, rtol=rtol)
    A_w = pair.wronskian / (gp - gm)
    reg_series = frobenius_seed(mode, "origin", gp, rho0, order)
    try:
        sing_series = frobenius_seed(mode, "origin", gm, rho0, order)
    except ResonanceError:
        sing_series = None
    if sing_series is None:
        A, B = A_w, math.nan
    else:
        r0 = sing_series.offset
        top = max(rho_match, 0.95)
        sing = integrate_mode(mode, r0, top, sing_series.series(r0), rtol, power=gm)
        rm = np.array([rho_match])
        M = np.array([[sing(rm)[0], pair.u(rm)[0]],
                      [sing.derivative(rm)[0], pair.u.derivative(rm)[0]]])
        rhs = np.array([pair.v(rm)[0], pair.v.derivative(rm)[0]])
        if not np.all(np.isfinite(M)) or np.linalg.cond(M) > 1e12:
            raise NormalizationError("matching system is ill conditioned")
        A, B = np.linalg.solve(M, rhs)
    if not A > 0:
        raise NormalizationError(f"singular coefficient is not positive ({A})")
    return GreenRadial(params, lam, kappa, kappa * B / A, A, B, A_w, rho_match,
                       pair.v, pair.u, sing_series, reg_series, rho0, kappa)


def green_hl(params: Params, lam: float, rho_match: float = 0.5, rho0: float = RHO0,
             delta0: float = DELTA0, order: int = ORDER, rtol: float = RTOL) -> GreenRadial:
    """Radial Green function of ``-L_E - lam V`` on the ball with pole at 0.

    Parameters
    ----------
    params : Params
    lam : float
        Spectral parameter, ``lam <= 1``.
    rho_match : float
        Where the boundary-decaying solution is matched against the two
        origin branches.

    Returns
    -------
    GreenRadial
        Callable profile ``G(rho)`` with ``G ~ kappa rho**(2-n)`` at 0 and
        ``G ~ C (1-rho)**beta`` at 1.
    """
    if lam > 1:
        raise DomainError(f"lambda must be <= 1, got {lam}")
    if not 0 < rho_match < 1:
        raise DomainError("match point must lie in (0, 1)")
    return _green_cached(params, float(lam), float(rho_match), rho0, delta0, order, rtol)


def chi(params: Params, lam: float, rho):
    """Regular part ``G_lam - kappa rho**(2-n)``; ``rho = 0`` gives its limit."""
    return green_hl(params, lam).chi(rho)


# -- modes -------------------------------------------------------------------

@lru_cache(maxsize=1024)
def mode_pair(params: Params, lam: float, k: int, domain: str = "ball") -> ModePair:
    """Cached :func:`solution_pair` for mode ``k``."""
    return solution_pair(mode_equation(params, lam, k, domain))


def mode_green(params: Params, lam: float, k: int, s, t, domain: str = "ball"):
    """One-dimensional Green kernel of mode ``k``.

    ``g_k(s, t) = u(min) v(max) / (alpha W)`` with ``W`` the constant
    ``rho**(n-1) (u' v - u v')``. On the cone (``lam = 0``) the exact power
    branches are used.
    """
    pair = mode_pair(params, float(lam), int(k), domain)
    return pair.kernel(s, t, params.alpha)


def _addition_factor(d, k, c):
    # sum over an orthonormal basis of degree-k harmonics of Y(w) Y(w')
    area = sphere_area(d)
    if d == 3:
        return (2 * k + 1) / (4 * math.pi) * special.eval_legendre(k, c)
    nu = 0.5 * (d - 2)
    return (2 * k + d - 2) / ((d - 2) * area) * special.eval_gegenbauer(k, nu, c)


def singular_part(params: Params, rho_x, rho_y, cos_theta, domain: str = "ball",
                  k: int | None = None):
    """Closed-form kernel that carries the diagonal singularity (``d = 3``).

    In Euclidean radii ``r = rho**(1/alpha)`` it is
    ``(r_x r_y)**a / (4 pi |x - y|)``, minus its Kelvin image
    ``(r_x r_y)**a / (4 pi | |y| x - y/|y| |)`` on the ball. With ``k`` given,
    returns the coefficient of mode ``k`` instead.
    """
    if params.d != 3:
        raise DomainError("singular subtraction is implemented for d = 3")
    a, _ = ab_coordinates(params)
    rx = np.asarray(rho_x, dtype=float) ** (1.0 / params.alpha)
    ry = np.asarray(rho_y, dtype=float) ** (1.0 / params.alpha)
    pref = (rx * ry) ** a
    if k is not None:
        lo, hi = np.minimum(rx, ry), np.maximum(rx, ry)
        out = pref * (lo / hi) ** k / hi / (2 * k + 1)
        if domain == "ball":
            out = out - pref * (rx * ry) ** k / (2 * k + 1)
        return out
    c = np.asarray(cos_theta, dtype=float)
    dist = np.sqrt(np.maximum(rx * rx + ry * ry - 2 * rx * ry * c, 0.0))
    out = pref / (4 * math.pi * dist)
    if domain == "ball":
        out = out - pref / (4 * math.pi * np.sqrt(rx * rx * ry * ry - 2 * rx * ry * c + 1.0))
    return out


def ball_template(params: Params, lam: float, rho_x, rho_y, cos_theta, k_max: int | None = None,
                  nodes: int = 2048):
    """Weighted hyperbolic kernel used to accelerate ball mode sums (``d = 3``).

    In Euclidean coordinates ``x`` (``|x| = rho**(1/alpha)``) it reads
    ``(r_x r_y)**a exp(-zeta R) / (4 pi |x - y| cosh(R/2))`` with
    ``zeta = sqrt(1 - lam)/2`` and ``R`` the hyperbolic distance of the unit
    ball. It shares the diagonal singularity of :func:`singular_part` and
    decays like ``dist(x, dB)**beta_lam`` at the boundary, which is what the
    Green function does; at ``d = n = 3``, ``alpha = 1`` it is exact.

    With ``k_max`` given, returns the mode coefficients ``T_k``,
    ``k = 0..k_max`` (leading axis), normalized like :func:`mode_green`. They
    are the closed-form modes of :func:`singular_part` plus a Gauss-Legendre
    projection of the bounded difference.
    """
    if params.d != 3:
        raise DomainError("the ball template is implemented for d = 3")
    zeta = beta_lambda(lam) - 0.5
    a, _ = ab_coordinates(params)
    inv = 1.0 / params.alpha

    def kernel(rx, ry, c):
        dist2 = np.maximum(rx * rx + ry * ry - 2 * rx * ry * c, 0.0)
        D = (1 - rx * rx) * (1 - ry * ry)
        R = 2 * np.arcsinh(np.sqrt(dist2 / D))
        return (rx * ry) ** a * np.exp(-zeta * R) / (4 * math.pi * np.sqrt(dist2) * np.cosh(R / 2))

    rx = np.asarray(rho_x, dtype=float) ** inv
    ry = np.asarray(rho_y, dtype=float) ** inv
    if k_max is None:
        return kernel(rx, ry, np.asarray(cos_theta, dtype=float))
    rx, ry = np.broadcast_arrays(rx, ry)
    x, w = np.polynomial.legendre.leggauss(nodes)
    diff = (kernel(rx[..., None], ry[..., None], x)
            - singular_part(params, rx[..., None] ** params.alpha, ry[..., None] ** params.alpha,
                            x, "ball"))
    ks = np.arange(k_max + 1)
    Pk = special.eval_legendre(ks[:, None], x[None, :])          # (K+1, M)
    proj = 2 * math.pi * np.einsum("km,...m->k...", Pk * w, diff)
    base = np.stack([singular_part(params, rho_x, rho_y, None, "ball", k=int(k)) for k in ks])
    return base + proj


def two_point_green(params: Params, lam: float, rho_x, rho_y, cos_theta, k_max: int = 32,
                    domain: str = "ball", subtract_singular: bool = False,
                    warn_tol: float = 1e-6):
    """Two-point Green function by summing spherical modes ``k = 0..k_max``.

    Parameters
    ----------
    rho_x, rho_y : array_like
        Radial coordinates of the two points.
    cos_theta : array_like
        Cosine of the angle between them.
    subtract_singular : bool
        If true (``d = 3`` only), sum ``g_k`` minus the modes of a closed-form
        kernel with the same singularities and add that kernel back: the
        Newton kernel :func:`singular_part` on the cone and
        :func:`ball_template` on the ball. The limit is the same but the tail
        decays much faster near the diagonal and near the boundary.

    Warns
    -----
    TruncationWarning
        If the last retained term exceeds ``warn_tol`` times the sum.
    """
    rx, ry, c = np.broadcast_arrays(np.asarray(rho_x, float), np.asarray(rho_y, float),
                                    np.asarray(cos_theta, float))
    if k_max < 0:
        raise DomainError("k_max must be non-negative")
    total = np.zeros(rx.shape)
    last = np.zeros(rx.shape)
    template = subtract_singular and domain == "ball"
    if template:
        modes = ball_template(params, lam, rx, ry, c, k_max)
    for k in range(k_max + 1):
        gk = mode_green(params, lam, k, rx, ry, domain)
        if template:
            gk = gk - modes[k]
        elif subtract_singular:
            gk = gk - singular_part(params, rx, ry, c, domain, k=k)
        last = gk * _addition_factor(params.d, k, c)
        total = total + last
    if template:
        total = total + ball_template(params, lam, rx, ry, c)
    elif subtract_singular:
        total = total + singular_part(params, rx, ry, c, domain)
    bad = np.abs(last) > warn_tol * np.abs(total)
    if bad.any():
        warnings.warn(f"mode sum truncated at K={k_max} for {int(bad.sum())} point(s)",
                      TruncationWarning, stacklevel=2)
    return total if total.ndim else float(total)


# -- estimates ---------------------------------------------------------------

REGIMES = {
    # Euclidean radial bands (r_x, r_y)
    "boundary-interior": ((0.85, 0.95), (0.1, 0.5)),
    "boundary-boundary": ((0.85, 0.95), (0.85, 0.95)),
    "near-origin": ((0.01, 0.15), (0.01, 0.15)),
    "interior": ((0.25, 0.7), (0.25, 0.7)),
}


@dataclass
class EstimateReport:
    """Ratios of a two-point Green function to its two-sided envelope.

    ``rows`` holds ``(regime, r_x, r_y, cos_theta, G, envelope, ratio)``.
    ``inf_ratio`` is informational only.
    """

    params: Params
    lam: float
    k_max: int
    sup_ratio: float
    inf_ratio: float
    per_regime: dict
    rows: list
    truncated: int


def _sample(sample_count, seed, min_sep=0.02):
    per = [sample_count // len(REGIMES)] * len(REGIMES)
    for i in range(sample_count - sum(per)):
        per[i] += 1
    out = []
    for (name, (bx, by)), m in zip(REGIMES.items(), per):
        eng = qmc.Halton(3, seed=seed)
        got = []
        while len(got) < m:
            u = eng.random(4 * m)
            rx = bx[0] + (bx[1] - bx[0]) * u[:, 0]
            ry = by[0] + (by[1] - by[0]) * u[:, 1]
            c = 2 * u[:, 2] - 1
            dist = np.sqrt(rx * rx + ry * ry - 2 * rx * ry * c)
            for i in np.nonzero(dist >= min_sep)[0]:
                if len(got) < m:
                    got.append((rx[i], ry[i], c[i]))
        out += [(name,) + g for g in got]
    return out


def verify_estimates(params: Params, lam: float, sample_count: int = 200, seed: int = 0,
                     k_max: int = 32) -> EstimateReport:
    """Compare ``G_lam(x, y)`` with ``Phi(x, y) min(1, d_x d_y/|x-y|^2)**beta``.

    Samples are drawn from a scrambled Halton sequence, stratified over four
    radial regimes, away from the diagonal (``|x - y| >= 0.02``). The ball
    Green function is a mode sum accelerated by :func:`ball_template`, the
    cone fundamental solution one accelerated by the Newton kernel.
    """
    if params.d != 3:
        raise DomainError("estimate verification is implemented for d = 3")
    if not 0 <= lam < 1:
        raise DomainError("lambda must lie in [0, 1)")
    beta = beta_lambda(lam)
    pts = _sample(sample_count, seed)
    names = [p[0] for p in pts]
    rx, ry, c = (np.array([p[i] for p in pts]) for i in (1, 2, 3))
    al = params.alpha
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TruncationWarning)
        G = two_point_green(params, lam, rx ** al, ry ** al, c, k_max, "ball", True)
        Phi = two_point_green(params, 0.0, rx ** al, ry ** al, c, k_max, "cone", True)
    dist2 = rx * rx + ry * ry - 2 * rx * ry * c
    env = Phi * np.minimum(1.0, (1 - rx) * (1 - ry) / dist2) ** beta
    ratio = G / env
    per = {}
    for name in REGIMES:
        sel = np.array([nm == name for nm in names])
        per[name] = (float(ratio[sel].max()), float(ratio[sel].min()))
    rows = [(names[i], float(rx[i]), float(ry[i]), float(c[i]), float(G[i]),
             float(env[i]), float(ratio[i])) for i in range(len(names))]
    return EstimateReport(params, lam, k_max, float(ratio.max()), float(ratio.min()),
                          per, rows, len(caught))


def fundamental_ratios(params: Params, sample_count: int = 200, seed: int = 0,
                       k_max: int = 32) -> np.ndarray:
    """Ratios of the cone fundamental solution to ``|x-y|**(2-d) max(|x|,|y|)**(2a)``."""
    a, _ = ab_coordinates(params)
    pts = _sample(sample_count, seed)
    rx, ry, c = (np.array([p[i] for p in pts]) for i in (1, 2, 3))
    al = params.alpha
    Phi = two_point_green(params, 0.0, rx ** al, ry ** al, c, k_max, "cone", True)
    dist = np.sqrt(rx * rx + ry * ry - 2 * rx * ry * c)
    return Phi / (dist ** (2 - params.d) * np.maximum(rx, ry) ** (2 * a))
