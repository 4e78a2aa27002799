"""Broadened spectral-hole shape for randomly oriented, Maxwell-distributed dipoles.

In detuning units ``x`` (HWHM of the zero-field hole = 1) the shape is

    h(x) = 2 / (pi**1.5 * fb**3) * [ int_0^s  f exp(-(f/fb)**2) atan(2f / D) df
                                   + int_s^oo f exp(-(f/fb)**2) (pi + atan(2f / D)) df ]

with ``D = 1 - f**2 + x**2`` and split point ``s = sqrt(1 + x**2)`` where
``D`` changes sign.  After substituting ``u = f / fb`` the Gaussian weight
has unit scale for every ``fb``:

    h(x) = 2 / (pi**1.5 * fb) * int u exp(-u**2) theta(fb * u, x) du

Each side of the split is integrated separately with adaptive Gauss-Kronrod.
The line shape has unit area and reduces to the Lorentzian
``1 / (pi (1 + x**2))`` as ``fb -> 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import quadrature
from .errors import DomainError, QuadratureError, RootBracketError

__all__ = [
    "SMALL_F_BAR",
    "TAIL_U",
    "HoleShapeQuery",
    "lorentzian",
    "branch_angle",
    "integrand",
    "hole_shape",
    "hole_shape_with_error",
    "hole_shape_curve",
    "hole_fwhm",
]

SMALL_F_BAR = 1e-4
"""Below this broadening the analytic Lorentzian limit is returned."""

TAIL_U = 8.0
"""Gaussian cutoff in ``u = f / fb``; exp(-64) relative is dropped."""

_INITIAL_PANELS = 4
_PREFACTOR = 2.0 / math.pi ** 1.5


def lorentzian(x):
    """Unit-area Lorentzian with unit HWHM."""
    x = np.asarray(x, dtype=float)
    return 1.0 / (math.pi * (1.0 + x * x))


def branch_angle(f, x, upper):
    """Orientation-averaged angle factor on one side of the split.

    ``upper=False`` gives ``atan(2f/D)`` (valid for ``D > 0``), ``upper=True``
    gives ``pi + atan(2f/D)`` (valid for ``D < 0``).  Where ``D`` sits on the
    wrong side or at zero, the one-sided limit ``pi/2`` at the split is used
    instead of dividing by zero.
    """
    f = np.asarray(f, dtype=float)
    x = np.asarray(x, dtype=float)
    d = (1.0 + x * x) - f * f
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if upper:
            ok = d < 0
            angle = math.pi + np.arctan(2.0 * f / np.where(ok, d, -1.0))
        else:
            ok = d > 0
            angle = np.arctan(2.0 * f / np.where(ok, d, 1.0))
    return np.where(ok, angle, 0.5 * math.pi)


def integrand(u, x, f_bar, upper):
    """Integrand in the scaled variable ``u``, excluding the constant prefactor."""
    u = np.asarray(u, dtype=float)
    return u * np.exp(-u * u) * branch_angle(f_bar * u, x, upper)


def _check_f_bar(f_bar):
    f_bar = float(f_bar)
    if not (f_bar >= 0.0 and math.isfinite(f_bar)):
        raise DomainError(f"f_bar must be finite and >= 0, got {f_bar!r}")
    return f_bar


def _check_rel_tol(rel_tol):
    rel_tol = float(rel_tol)
    if not 0.0 < rel_tol <= 1e-2:
        raise DomainError(f"rel_tol must lie in (0, 1e-2], got {rel_tol!r}")
    return rel_tol


def hole_shape_with_error(x, f_bar, rel_tol=1e-8):
    """Evaluate ``h`` on an array of detunings, returning values and error estimates.

    Raises
    ------
    QuadratureError
        With ``x`` set to the offending detuning.
    """
    f_bar = _check_f_bar(f_bar)
    rel_tol = _check_rel_tol(rel_tol)
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = x.ravel()
    if not np.all(np.isfinite(x)):
        raise DomainError("detunings must be finite")
    if f_bar < SMALL_F_BAR:
        return lorentzian(x).reshape(shape), np.zeros(shape)

    n = x.size
    split = np.sqrt(1.0 + x * x) / f_bar
    idx = np.arange(n)

    lower_end = np.minimum(split, TAIL_U)
    steps = np.linspace(0.0, 1.0, _INITIAL_PANELS + 1)
    a_lo = (lower_end[:, None] * steps[None, :-1]).ravel()
    b_lo = (lower_end[:, None] * steps[None, 1:]).ravel()
    own_lo = np.repeat(idx, _INITIAL_PANELS)

    has_tail = split < TAIL_U
    s_hi = split[has_tail]
    a_hi = (s_hi[:, None] + TAIL_U * steps[None, :-1]).ravel()
    b_hi = (s_hi[:, None] + TAIL_U * steps[None, 1:]).ravel()
    own_hi = np.repeat(idx[has_tail], _INITIAL_PANELS)

    def func(t, owner):
        xs = x[owner]
        upper = t >= split[owner]
        lo = integrand(t, xs, f_bar, upper=False)
        hi = integrand(t, xs, f_bar, upper=True)
        return np.where(upper, hi, lo)

    try:
        values, errors = quadrature.integrate(
            func,
            np.concatenate([a_lo, a_hi]),
            np.concatenate([b_lo, b_hi]),
            np.concatenate([own_lo, own_hi]),
            n,
            rel_tol=rel_tol,
            abs_tol=1e-300,
        )
    except QuadratureError as exc:
        bad = float(x[exc.x]) if exc.x is not None else None
        raise QuadratureError(
            f"h(x={bad!r}, f_bar={f_bar!r}): {exc}",
            achieved_error=exc.achieved_error,
            x=bad,
        ) from exc
    scale = _PREFACTOR / f_bar
    return (scale * values).reshape(shape), (scale * errors).reshape(shape)


def hole_shape(x, f_bar, rel_tol=1e-8) -> float:
    """Broadened hole shape ``h(x)`` for a single detuning."""
    values, _ = hole_shape_with_error(np.array([float(x)]), f_bar, rel_tol)
    return float(values[0])


@dataclass(frozen=True)
class HoleShapeQuery:
    x_values: np.ndarray = field(repr=False)
    f_bar: float
    rel_tol: float = 1e-8

    def __post_init__(self):
        xs = np.asarray(self.x_values, dtype=float)
        if xs.ndim != 1 or xs.size == 0:
            raise DomainError("x_values must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(xs)):
            raise DomainError("x_values must be finite")
        object.__setattr__(self, "x_values", xs)
        object.__setattr__(self, "f_bar", _check_f_bar(self.f_bar))
        object.__setattr__(self, "rel_tol", _check_rel_tol(self.rel_tol))


def hole_shape_curve(query: HoleShapeQuery) -> np.ndarray:
    """``h`` sampled at every ``query.x_values``."""
    values, _ = hole_shape_with_error(query.x_values, query.f_bar, query.rel_tol)
    return values


def hole_fwhm(f_bar, rel_tol=1e-11) -> float:
    """Full width at half maximum of ``h`` in detuning units.

    Equals 2 in the Lorentzian limit and grows monotonically with ``f_bar``
    (asymptotically ``2 * sqrt(ln 2) * f_bar``).
    """
    f_bar = _check_f_bar(f_bar)
    if f_bar < SMALL_F_BAR:
        return 2.0
    half = 0.5 * hole_shape(0.0, f_bar, rel_tol)

    def excess(x):
        return hole_shape(x, f_bar, rel_tol) - half

    # Voigt half widths never exceed the sum of the component half widths.
    hi = 1.0 + f_bar
    for _ in range(60):
        if excess(hi) < 0:
            break
        hi *= 2.0
    else:
        raise RootBracketError(f"could not bracket the half maximum for f_bar={f_bar!r}")
    root = brentq(excess, 0.0, hi, xtol=1e-14 * hi, rtol=4 * np.finfo(float).eps)
    return 2.0 * root
