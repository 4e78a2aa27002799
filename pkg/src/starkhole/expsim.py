"""Synthetic three-scan hole-burning experiments.

For every applied field the protocol records a zero-field scan, a scan with
the field on, and a zero-field scan after switching it off.  Signals are
hole depths on a flat baseline with additive white Gaussian noise; each
scan draws from its own stream derived from ``(seed, field index, scan tag)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import KHZ_PER_MHZ, Amorphous, Crystal, HoleWidth, MediumModel, StarkCoefficient, f_bar_from
from .errors import DomainError
from .fitting import SCAN_TAGS, FieldSweep, HoleProfile
from .lineshape import hole_shape_with_error

__all__ = [
    "MediumModel",
    "Crystal",
    "Amorphous",
    "ScanConfig",
    "Preset",
    "PRESETS",
    "field_from_voltage",
    "scan_rng",
    "simulate_scan",
    "simulate_sweep",
]


@dataclass(frozen=True)
class ScanConfig:
    """Laser scan settings: ``span`` (MHz) centred on the burn frequency."""

    span: float = 400.0
    n_points: int = 801
    gamma: float = 5.0
    hole_depth: float = 0.3
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.span > 0:
            raise DomainError("span must be > 0")
        if int(self.n_points) < 16:
            raise DomainError("n_points must be >= 16")
        HoleWidth(self.gamma)
        if not 0 < self.hole_depth <= 1:
            raise DomainError("hole_depth must lie in (0, 1]")
        if not self.noise_sigma >= 0:
            raise DomainError("noise_sigma must be >= 0")

    def grid(self):
        return np.linspace(-0.5 * self.span, 0.5 * self.span, int(self.n_points))


def field_from_voltage(voltage, gap_mm) -> float:
    """Field in V/cm between parallel electrodes ``gap_mm`` apart."""
    gap_mm = float(gap_mm)
    if not gap_mm > 0:
        raise DomainError(f"electrode gap must be > 0, got {gap_mm!r}")
    return float(voltage) / (gap_mm / 10.0)


def scan_rng(seed, field_index, scan_tag):
    ss = np.random.SeedSequence(
        entropy=int(seed) & ((1 << 64) - 1),
        spawn_key=(int(field_index), SCAN_TAGS.index(scan_tag)),
    )
    return np.random.default_rng(ss)


def _clean_signal(medium, field, cfg, nu):
    gamma = cfg.gamma
    kappa = float(medium.kappa)
    if isinstance(medium, Crystal):
        shift = kappa * field / KHZ_PER_MHZ
        if medium.inversion_symmetric:
            d_plus = (nu - shift) / gamma
            d_minus = (nu + shift) / gamma
            return cfg.hole_depth * 0.5 * (1.0 / (1.0 + d_plus**2) + 1.0 / (1.0 + d_minus**2))
        d = (nu - shift) / gamma
        return cfg.hole_depth / (1.0 + d * d)
    if isinstance(medium, Amorphous):
        f_bar = f_bar_from(kappa, field, gamma).f_bar
        h, _ = hole_shape_with_error(nu / gamma, f_bar, 1e-10)
        # Broadening redistributes the burnt ions, so the hole area is conserved.
        return cfg.hole_depth * math.pi * h
    raise DomainError(f"unknown medium {medium!r}")


def simulate_scan(medium, field, cfg: ScanConfig, scan_tag="during", field_index=0) -> HoleProfile:
    """One scanned hole; before/after scans are taken with the field off."""
    if scan_tag not in SCAN_TAGS:
        raise DomainError(f"scan_tag must be one of {SCAN_TAGS}")
    applied = float(field) if scan_tag == "during" else 0.0
    nu = cfg.grid()
    signal = _clean_signal(medium, applied, cfg, nu)
    if cfg.noise_sigma > 0:
        signal = signal + scan_rng(cfg.seed, field_index, scan_tag).normal(0.0, cfg.noise_sigma, nu.size)
    return HoleProfile(
        freq_offsets=nu,
        signal=signal,
        noise_sigma=cfg.noise_sigma if cfg.noise_sigma > 0 else None,
        field=applied,
        scan_tag=scan_tag,
        metadata={"applied_field_v_per_cm": float(field), "step": int(field_index), "seed": int(cfg.seed)},
    )


def simulate_sweep(medium, fields, cfg: ScanConfig) -> FieldSweep:
    """Before/during/after scans for every field, in order."""
    fields = [float(E) for E in fields]
    if not fields:
        raise DomainError("fields must be nonempty")
    records = []
    for i, E in enumerate(fields):
        for tag in SCAN_TAGS:
            records.append((E, simulate_scan(medium, E, cfg, tag, field_index=i)))
    return FieldSweep(records=records, medium=medium)


@dataclass(frozen=True)
class Preset:
    """Apparatus numbers for one-command reproduction of a campaign."""

    name: str
    medium: str
    kappa: float
    voltages: tuple
    gap_mm: float
    wavelength_nm: float
    scan: ScanConfig

    def fields(self):
        return [field_from_voltage(v, self.gap_mm) for v in self.voltages]

    def medium_model(self, kappa=None, inversion_symmetric=False):
        k = StarkCoefficient(self.kappa if kappa is None else kappa)
        if self.medium == "crystal":
            return Crystal(k, inversion_symmetric=inversion_symmetric)
        return Amorphous(k)

    def with_scan(self, **changes):
        return replace(self, scan=replace(self.scan, **changes))


# Hole widths and noise levels are not reported for either sample; these
# are plausible defaults, not measured values.
PRESETS = {
    "crystal-linbo3": Preset(
        name="crystal-linbo3",
        medium="crystal",
        kappa=25.0,
        voltages=tuple(range(-200, 201, 20)),
        gap_mm=1.0,
        wavelength_nm=1531.00,
        scan=ScanConfig(span=1200.0, n_points=2001, gamma=5.0, hole_depth=0.3, noise_sigma=0.02, seed=1),
    ),
    "fiber-silicate": Preset(
        name="fiber-silicate",
        medium="amorphous",
        kappa=15.0,
        voltages=tuple(range(0, 121, 10)),
        gap_mm=0.3,
        wavelength_nm=1531.0,
        scan=ScanConfig(span=400.0, n_points=801, gamma=8.0, hole_depth=0.3, noise_sigma=0.01, seed=2),
    ),
}
