"""Units, domain types and the closed-form linear Stark physics.

Canonical units throughout the package:

* frequency: MHz (linear, never angular in the public API)
* electric field: V/cm
* Stark coefficient: kHz per V/cm, i.e. the per-``h`` product of dipole
  moment difference and local-field correction

Hole widths are half widths at half maximum (HWHM); the full width is
reported as ``2 * gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError

__all__ = [
    "KHZ_PER_MHZ",
    "Frequency",
    "ElectricField",
    "LorentzFactor",
    "StarkCoefficient",
    "DipoleAngle",
    "HoleWidth",
    "BroadeningParam",
    "Crystal",
    "Amorphous",
    "MediumModel",
    "lorentz_factor",
    "stark_shift",
    "maxwell_pdf",
    "f_bar_from",
    "kappa_from_f_bar",
]

KHZ_PER_MHZ = 1000.0


def _finite(value, name):
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class Frequency:
    """A linear frequency in MHz."""

    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", _finite(self.value, "frequency"))

    def __float__(self):
        return self.value

    @property
    def angular(self) -> float:
        """Angular frequency in rad/us (2*pi*MHz)."""
        return 2.0 * math.pi * self.value

    @classmethod
    def from_angular(cls, omega: float) -> "Frequency":
        return cls(omega / (2.0 * math.pi))


@dataclass(frozen=True)
class ElectricField:
    """Applied DC field in V/cm; the sign encodes polarity."""

    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", _finite(self.value, "field"))

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class LorentzFactor:
    epsilon: float
    chi: float

    def __float__(self):
        return self.chi


@dataclass(frozen=True)
class StarkCoefficient:
    """Effective linear Stark coefficient ``kappa`` in kHz/(V/cm).

    For crystals this is the projected dipole difference times the Lorentz
    factor over ``h``; for amorphous hosts the same with the most probable
    dipole difference.  ``sigma_kappa`` is a 1-sigma standard error.
    """

    kappa: float
    sigma_kappa: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kappa", _finite(self.kappa, "kappa"))
        sigma = float(self.sigma_kappa)
        if not sigma >= 0.0:
            raise DomainError(f"sigma_kappa must be >= 0, got {sigma!r}")
        object.__setattr__(self, "sigma_kappa", sigma)

    def __float__(self):
        return self.kappa

    def __str__(self):
        return f"{self.kappa:.3f} ± {self.sigma_kappa:.3f} kHz/(V/cm)"


@dataclass(frozen=True)
class DipoleAngle:
    """Cosine of the angle between dipole difference and field."""

    cos_theta: float

    def __post_init__(self):
        c = float(self.cos_theta)
        if not abs(c) <= 1.0:
            raise DomainError(f"|cos_theta| must be <= 1, got {c!r}")
        object.__setattr__(self, "cos_theta", c)

    def __float__(self):
        return self.cos_theta


@dataclass(frozen=True)
class HoleWidth:
    """Zero-field hole width: ``gamma`` is the HWHM in MHz."""

    gamma: float
    sigma_gamma: float = 0.0

    def __post_init__(self):
        g = float(self.gamma)
        if not (math.isfinite(g) and g > 0.0):
            raise DomainError(f"gamma must be a positive finite width, got {g!r}")
        object.__setattr__(self, "gamma", g)

    def __float__(self):
        return self.gamma

    @property
    def fwhm(self) -> float:
        return 2.0 * self.gamma


@dataclass(frozen=True)
class BroadeningParam:
    f_bar: float
    x: float = 0.0

    def __post_init__(self):
        if not float(self.f_bar) >= 0.0:
            raise DomainError(f"f_bar must be >= 0, got {self.f_bar!r}")

    def __float__(self):
        return float(self.f_bar)


@dataclass(frozen=True)
class Crystal:
    """Ordered host: one dipole direction, or an opposed pair if centrosymmetric."""

    kappa: StarkCoefficient
    inversion_symmetric: bool = False

    name = "crystal"


@dataclass(frozen=True)
class Amorphous:
    """Disordered host: random orientations, Maxwell-distributed magnitudes."""

    kappa: StarkCoefficient

    name = "amorphous"


MediumModel = Union[Crystal, Amorphous]


def lorentz_factor(epsilon: float) -> LorentzFactor:
    """Local-field correction ``(epsilon + 2) / 3`` for dielectric constant ``epsilon``."""
    epsilon = float(epsilon)
    if not epsilon >= 1.0:
        raise DomainError(f"dielectric constant must be >= 1, got {epsilon!r}")
    return LorentzFactor(epsilon=epsilon, chi=(epsilon + 2.0) / 3.0)


def stark_shift(kappa, E, cos_theta=1.0) -> Frequency:
    """Linear Stark shift in MHz for one dipole orientation.

    Works on plain floats or on the typed wrappers (anything ``float()``
    accepts).
    """
    return Frequency(float(kappa) * float(E) * float(cos_theta) / KHZ_PER_MHZ)


def maxwell_pdf(delta_mu):
    """Maxwell density of the dipole difference in units of its most probable value.

    ``g(u) = 4/sqrt(pi) * u**2 * exp(-u**2)``, normalized on ``[0, inf)``
    with its mode at ``u = 1``.  Accepts scalars or arrays.
    """
    u = np.asarray(delta_mu, dtype=float)
    if np.any(u < 0) or np.any(np.isnan(u)):
        raise DomainError("delta_mu must be >= 0")
    g = 4.0 / math.sqrt(math.pi) * u * u * np.exp(-u * u)
    return float(g) if g.ndim == 0 else g


def f_bar_from(kappa, E, gamma) -> BroadeningParam:
    """Dimensionless broadening ``kappa * |E| / gamma`` with both in linear MHz."""
    gamma = float(gamma)
    if not gamma > 0.0:
        raise DomainError(f"gamma must be > 0, got {gamma!r}")
    scale = abs(float(kappa)) * abs(float(E)) / KHZ_PER_MHZ
    return BroadeningParam(f_bar=scale / gamma)


def kappa_from_f_bar(f_bar, E, gamma) -> float:
    """Inverse of :func:`f_bar_from`: kappa in kHz/(V/cm) from a broadening value."""
    E = abs(float(E))
    if E == 0.0:
        raise DomainError("cannot recover kappa at zero field")
    return float(f_bar) * float(gamma) * KHZ_PER_MHZ / E
