"""Field requirements for controlled reversible inhomogeneous broadening.

A storage bandwidth ``B`` (MHz) for pulses of duration ``T`` follows the
convention ``B = 1 / T``.  A crystal needs a field gradient whose Stark
shifts span ``B``; an amorphous host needs a homogeneous field whose
broadened hole FWHM reaches ``B``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from scipy.optimize import brentq

from .core import KHZ_PER_MHZ, Amorphous, Crystal, HoleWidth
from .errors import DomainError, NoSolutionError
from .lineshape import hole_fwhm

__all__ = [
    "CribTarget",
    "FieldPlan",
    "PolarityPhase",
    "FieldSchedule",
    "bandwidth_from_duration",
    "crystal_field_plan",
    "crystal_span",
    "amorphous_field_plan",
    "broadened_fwhm",
    "polarity_reversal_map",
]


def bandwidth_from_duration(duration_ns) -> float:
    """Bandwidth in MHz for a pulse of ``duration_ns`` nanoseconds."""
    duration_ns = float(duration_ns)
    if not duration_ns > 0:
        raise DomainError(f"pulse duration must be > 0, got {duration_ns!r}")
    return 1000.0 / duration_ns


@dataclass(frozen=True)
class CribTarget:
    medium: object
    bandwidth: Optional[float] = None
    pulse_duration: Optional[float] = None
    gamma: Optional[HoleWidth] = None

    def __post_init__(self):
        if (self.bandwidth is None) == (self.pulse_duration is None):
            raise DomainError("give exactly one of bandwidth (MHz) or pulse_duration (ns)")
        if self.bandwidth is None:
            object.__setattr__(self, "bandwidth", bandwidth_from_duration(self.pulse_duration))
        if not float(self.bandwidth) > 0:
            raise DomainError("bandwidth must be > 0")
        if self.gamma is not None and not isinstance(self.gamma, HoleWidth):
            object.__setattr__(self, "gamma", HoleWidth(self.gamma))


@dataclass(frozen=True)
class FieldPlan:
    """``kind`` is ``"gradient"`` (field runs from +e_max to -e_max along
    the sample) or ``"homogeneous"`` (uniform field ``e_max``)."""

    kind: str
    e_max: float
    bandwidth: float

    def as_dict(self):
        return {"kind": self.kind, "e_max_v_per_cm": self.e_max, "bandwidth_mhz": self.bandwidth}


def _kappa(medium):
    return abs(float(medium.kappa))


def crystal_span(kappa, e_max) -> float:
    """Total shift span (MHz) of a ``+/- e_max`` gradient."""
    return 2.0 * abs(float(kappa)) * float(e_max) / KHZ_PER_MHZ


def crystal_field_plan(target: CribTarget) -> FieldPlan:
    if not isinstance(target.medium, Crystal):
        raise DomainError("crystal_field_plan needs a Crystal medium")
    kappa = _kappa(target.medium)
    if kappa == 0:
        raise DomainError("a zero Stark coefficient cannot produce any broadening")
    e_max = target.bandwidth * KHZ_PER_MHZ / (2.0 * kappa)
    return FieldPlan("gradient", e_max, target.bandwidth)


def broadened_fwhm(kappa, field, gamma) -> float:
    """FWHM in MHz of the broadened hole at ``field`` for HWHM ``gamma``."""
    gamma = float(gamma)
    f_bar = abs(float(kappa)) * abs(float(field)) / KHZ_PER_MHZ / gamma
    return gamma * hole_fwhm(f_bar)


def amorphous_field_plan(target: CribTarget, rtol=1e-9) -> FieldPlan:
    """Homogeneous field whose broadened FWHM equals the target bandwidth.

    Raises
    ------
    NoSolutionError
        If the target is narrower than the zero-field hole.
    """
    if not isinstance(target.medium, Amorphous):
        raise DomainError("amorphous_field_plan needs an Amorphous medium")
    if target.gamma is None:
        raise DomainError("amorphous planning needs the zero-field hole width gamma")
    kappa = _kappa(target.medium)
    gamma = target.gamma.gamma
    width = target.bandwidth / gamma
    if width < 2.0:
        raise NoSolutionError(
            f"target {target.bandwidth:g} MHz is below the zero-field FWHM {2 * gamma:g} MHz"
        )
    if width == 2.0:
        return FieldPlan("homogeneous", 0.0, target.bandwidth)
    if kappa == 0:
        raise NoSolutionError("a zero Stark coefficient cannot broaden the hole")
    # hole_fwhm(f) >= 2 sqrt(ln 2) f > 1.6 f bounds the root from above
    f_bar = brentq(lambda f: hole_fwhm(f) - width, 0.0, width / 1.6, xtol=1e-14, rtol=rtol)
    e = f_bar * gamma * KHZ_PER_MHZ / kappa
    return FieldPlan("homogeneous", e, target.bandwidth)


@dataclass(frozen=True)
class PolarityPhase:
    """Field at the two ends of the sample during ``[t_start, t_end)`` (us)."""

    t_start: float
    t_end: float
    field_entrance: float
    field_exit: float


@dataclass(frozen=True)
class FieldSchedule:
    plan: FieldPlan
    phases: tuple

    def as_dict(self):
        return {
            "plan": self.plan.as_dict(),
            "phases": [
                {
                    "t_start_us": p.t_start,
                    "t_end_us": p.t_end,
                    "field_entrance_v_per_cm": p.field_entrance,
                    "field_exit_v_per_cm": p.field_exit,
                }
                for p in self.phases
            ],
        }


def polarity_reversal_map(plan: FieldPlan, t_switch=1.0, t_end=None) -> FieldSchedule:
    """Two-phase schedule: the planned field, then its mirror image after ``t_switch``."""
    t_end = 2.0 * t_switch if t_end is None else t_end
    if plan.kind == "gradient":
        ends = (plan.e_max, -plan.e_max)
    else:
        ends = (plan.e_max, plan.e_max)
    # 0.0 rather than -0.0 so a zero plan prints cleanly
    flipped = tuple(-v + 0.0 for v in ends)
    return FieldSchedule(
        plan=plan,
        phases=(
            PolarityPhase(0.0, float(t_switch), *ends),
            PolarityPhase(float(t_switch), float(t_end), *flipped),
        ),
    )
