"""Mass of the radial Green function and the critical spectral parameter.

The mass is the value at the origin of the regular part
``G_lam - kappa rho**(2-n)``. It is computed from the integral identity

    m_lam = -kappa + lam * int G_lam V G_0 dmu_E,

with ``V = alpha**2/(1 - rho**2)**2`` and ``G_0 = kappa (rho**(2-n) - 1)``;
the integral converges only for ``n < 4``.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import CknError, DivergentMass, DomainError
from .green_radial import green_hl
from .params import Params, derived_constants, make_params

__all__ = ["MassResult", "SweepRow", "mass", "lambda_star_rad", "mass_sweep", "thread_count"]


@dataclass(frozen=True)
class MassResult:
    """Mass with its quadrature error and the independent origin limit.

    Attributes
    ----------
    value : float
        Mass from the integral identity.
    err_estimate : float
        Absolute quadrature error estimate.
    chi_limit : float
        Limit of the regular part at the origin, from the matching.
    """

    params: Params
    lam: float
    value: float
    err_estimate: float
    chi_limit: float
    kappa: float


@dataclass(frozen=True)
class SweepRow:
    d: int
    n: float
    alpha: float
    lam: float
    m: float
    err_estimate: float
    status: str


def mass(params: Params, lam: float, tol: float = 1e-8) -> MassResult:
    """Mass ``m_lam`` of the radial Green function.

    Parameters
    ----------
    params : Params
        Requires ``n < 4``.
    lam : float
        Spectral parameter ``<= 1``.
    tol : float
        Relative and absolute quadrature tolerance.

    Notes
    -----
    The integrand behaves like ``rho**(3-n)`` at the origin and like
    ``(1-rho)**(beta-1)`` at the boundary. The half ``[0, 1/2]`` is mapped
    with ``u = rho**(4-n)`` and the half ``[1/2, 1]`` with
    ``1 - rho = s**2``, which makes both integrands bounded; each piece is
    handled by adaptive Gauss-Kronrod quadrature.
    """
    n = params.n
    if n >= 4:
        raise DivergentMass("divergent: requires n<4")
    if lam > 1:
        raise DomainError(f"lambda must be <= 1, got {lam}")
    const = derived_constants(params)
    kappa = const.kappa
    G = green_hl(params, lam)
    if lam == 0:
        return MassResult(params, 0.0, -kappa, 0.0, G.origin_limit, kappa)

    pref = lam * kappa * params.alpha * const.sphere_area
    e = 4.0 - n

    def inner(u):
        rho = u ** (1.0 / e)
        w = -rho * np.expm1((n - 2.0) * math.log(rho)) / (1.0 - rho * rho) ** 2
        return float(G(np.array([rho]))[0]) * w * rho ** (n - 3.0) / e

    def outer(s):
        delta = s * s
        rho = 1.0 - delta
        if delta == 0.0:
            return 0.0
        num = -rho * math.expm1((n - 2.0) * math.log1p(-delta))
        w = num / (delta * (2.0 - delta)) ** 2
        return float(G(np.array([rho]))[0]) * w * 2.0 * s

    eps = dict(epsabs=0.1 * tol / pref, epsrel=tol, limit=400)
    i1, e1 = integrate.quad(inner, 0.0, 0.5 ** e, points=[G.rho0 ** e], **eps)
    i2, e2 = integrate.quad(outer, 0.0, math.sqrt(0.5), points=[1e-2], **eps)
    value = -kappa + pref * (i1 + i2)
    return MassResult(params, float(lam), float(value), float(pref * (e1 + e2)),
                      G.origin_limit, kappa)


def lambda_star_rad(params: Params, tol: float = 1e-8, max_iter: int = 60) -> float:
    """Largest ``lam <= 1`` with non-positive mass.

    Returns 1 if the mass at ``lam = 1`` is non-positive, otherwise bisects
    on ``[0, 1]`` (the mass is increasing in ``lam`` and equals ``-kappa``
    at 0).
    """
    if mass(params, 1.0, tol).value <= 0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mass(params, mid, tol).value <= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def thread_count(default: int = 1) -> int:
    """Worker count from the ``CKN_THREADS`` environment variable."""
    raw = os.environ.get("CKN_THREADS")
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


def _row(point, tol):
    d, n, alpha, lam = point
    try:
        p = make_params(d, n, alpha)
    except DomainError:
        return SweepRow(d, n, alpha, lam, math.nan, math.nan, "domain")
    try:
        r = mass(p, lam, tol)
    except DivergentMass:
        return SweepRow(p.d, p.n, p.alpha, lam, math.nan, math.nan, "divergent")
    except DomainError:
        return SweepRow(p.d, p.n, p.alpha, lam, math.nan, math.nan, "domain")
    except CknError:
        return SweepRow(p.d, p.n, p.alpha, lam, math.nan, math.nan, "failed")
    return SweepRow(p.d, p.n, p.alpha, lam, r.value, r.err_estimate, "ok")


def mass_sweep(points, tol: float = 1e-8, threads: int | None = None) -> list[SweepRow]:
    """Mass over a grid of ``(d, n, alpha, lam)`` tuples.

    Rows keep the input order. Failures are reported per row through
    ``status`` (``ok``, ``divergent``, ``domain`` or ``failed``).
    """
    points = [tuple(p) for p in points]
    workers = threads or thread_count()
    if workers <= 1:
        return [_row(p, tol) for p in points]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda p: _row(p, tol), points))
