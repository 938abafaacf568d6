"""Parameter sets, derived constants and the (a, b) reparametrization.

The operator family is indexed by an integer dimension ``d >= 3``, a real
"virtual dimension" ``n`` and a radial power ``alpha``; in the coordinate
``rho = |x|**alpha`` the Euclidean operator reads

    alpha**2 (f'' + (n - 1)/rho f') + rho**-2 Delta_sphere f.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from scipy import integrate

from .errors import DomainError

__all__ = [
    "Params",
    "ConstantsRecord",
    "make_params",
    "derived_constants",
    "sphere_area",
    "ab_coordinates",
    "params_from_ab",
    "beta_lambda",
]

_EDGE = 1e-12


@dataclass(frozen=True)
class Params:
    """Admissible triple ``(d, n, alpha)``.

    Either ``n > d`` and ``alpha > 0``, or ``n == d`` and ``0 < alpha <= 1``.
    """

    d: int
    n: float
    alpha: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ConstantsRecord:
    """Derived constants of a parameter set.

    Attributes
    ----------
    p : float
        Critical exponent ``2n/(n-2)``.
    a, b : float
        Caffarelli-Kohn-Nirenberg exponents.
    kappa : float
        Coefficient of ``rho**(2-n)`` in the fundamental solution.
    lambda_one : float
        Bottom of the spectrum of the weighted hyperbolic Laplacian.
    Z : float
        Weighted volume of the suspension of the sphere.
    c_rad : float
        Sharp radial Sobolev constant.
    fs_holds : bool
        Whether the Felli-Schneider condition ``alpha**2 <= (d-1)/(n-1)`` holds.
    sphere_area : float
        ``|S^{d-1}|``.
    """

    p: float
    a: float
    b: float
    kappa: float
    lambda_one: float
    Z: float
    c_rad: float
    fs_holds: bool
    sphere_area: float

    def as_dict(self) -> dict:
        return asdict(self)


def make_params(d, n, alpha) -> Params:
    """Validate and build a :class:`Params`.

    Raises
    ------
    DomainError
        If ``d`` is not an integer ``>= 3`` or the pair ``(n, alpha)`` is not
        admissible.
    """
    if isinstance(d, bool) or int(d) != d or d < 3:
        raise DomainError(f"d must be an integer >= 3, got {d!r}")
    d = int(d)
    n = float(n)
    alpha = float(alpha)
    if not (math.isfinite(n) and math.isfinite(alpha)):
        raise DomainError("n and alpha must be finite")
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if abs(n - d) <= _EDGE * d:
        if alpha > 1 + _EDGE:
            raise DomainError(f"n = d requires alpha <= 1, got {alpha}")
        n = float(d)
    elif n < d:
        raise DomainError(f"n must be >= d = {d}, got {n}")
    return Params(d, n, alpha)


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in ``R^d``."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def _sech_power_integral(n: float) -> float:
    # int_0^inf sech^n t dt with u = tanh t: int_0^1 (1 - u^2)^(n/2 - 1) du
    val, _ = integrate.quad(lambda u: (1.0 - u * u) ** (0.5 * n - 1.0), 0.0, 1.0,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def derived_constants(params: Params) -> ConstantsRecord:
    """Compute the constants attached to ``params``.

    ``Z`` is evaluated by quadrature; the closed form through Gamma functions
    is used only in the tests.
    """
    d, n, alpha = params.d, params.n, params.alpha
    area = sphere_area(d)
    p = 2.0 * n / (n - 2.0)
    a, b = ab_coordinates(params)
    kappa = 1.0 / (alpha * (n - 2.0) * area)
    lam1 = (n - 1.0) ** 2 * alpha ** 2 / 4.0
    Z = 2.0 / alpha * area * _sech_power_integral(n)
    c_rad = n * (n - 2.0) / 4.0 * alpha ** 2 * Z ** (2.0 / n)
    fs = alpha ** 2 <= (d - 1.0) / (n - 1.0) * (1 + 1e-14)
    return ConstantsRecord(p, a, b, kappa, lam1, Z, c_rad, bool(fs), area)


def ab_coordinates(params: Params) -> tuple[float, float]:
    """Map ``(d, n, alpha)`` to the CKN exponents ``(a, b)``."""
    d, n, alpha = params.d, params.n, params.alpha
    a = 0.5 * ((d - 2.0) - alpha * (n - 2.0))
    b = a + (n - d) / n
    return a, b


def params_from_ab(d, a, b) -> Params:
    """Inverse of :func:`ab_coordinates`.

    Requires ``a < (d-2)/2`` and ``0 <= b - a < 1``; the result is validated
    by :func:`make_params`.
    """
    if isinstance(d, bool) or int(d) != d or d < 3:
        raise DomainError(f"d must be an integer >= 3, got {d!r}")
    if not a < (d - 2) / 2:
        raise DomainError(f"need a < (d-2)/2, got a = {a}")
    gap = b - a
    if not 0 <= gap < 1:
        raise DomainError(f"need 0 <= b - a < 1, got {gap}")
    n = d / (1.0 - gap)
    alpha = ((d - 2.0) - 2.0 * a) / (n - 2.0)
    return make_params(d, n, alpha)


def beta_lambda(lam: float) -> float:
    """Larger root of ``g(g - 1) + lam/4 = 0``, i.e. ``(1 + sqrt(1 - lam))/2``."""
    if lam > 1:
        raise DomainError(f"lambda must be <= 1, got {lam}")
    return 0.5 * (1.0 + math.sqrt(1.0 - lam))
