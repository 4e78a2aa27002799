"""Hole fits and Stark-coefficient extraction.

Crystal hosts: every scan is fit with a Lorentzian and the centre shift
relative to the zero-field scan is regressed on the field through the
origin.  Amorphous hosts: the zero-field scans fix the homogeneous width,
each in-field scan is fit with the broadened shape for ``f_bar`` and
``f_bar`` is regressed on ``|E|`` through the origin.

Signals are hole depths: positive at the hole, whatever the raw polarity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as _field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .core import (
    KHZ_PER_MHZ,
    Amorphous,
    Crystal,
    HoleWidth,
    StarkCoefficient,
)
from .errors import (
    BoundaryWarning,
    DegenerateDataError,
    DomainError,
    FitError,
    PreconditionError,
)
from .lineshape import hole_fwhm, hole_shape_with_error
from .optimize import levenberg_marquardt

__all__ = [
    "SCAN_TAGS",
    "HoleProfile",
    "LorentzFit",
    "BroadenedFit",
    "DoubletFit",
    "OriginFit",
    "SweepStep",
    "FieldSweep",
    "ExtractionPoint",
    "Extraction",
    "ReversibilityRow",
    "ReversibilityReport",
    "normalize_polarity",
    "lorentz_model",
    "broadened_model",
    "doublet_model",
    "fit_lorentzian",
    "fit_broadened",
    "fit_doublet",
    "linfit_origin",
    "analyze_crystal",
    "analyze_amorphous",
    "zero_field_width",
    "extract_stark_crystal",
    "extract_stark_amorphous",
    "reversibility_check",
]

SCAN_TAGS = ("before", "during", "after")

F_BAR_PIN = 1e-3
"""Broadening below which an ``f_bar`` fit is reported as pinned at zero."""

MODEL_REL_TOL = 1e-10


@dataclass
class HoleProfile:
    """One scanned hole: frequency offsets (MHz) and positive hole depth."""

    freq_offsets: np.ndarray
    signal: np.ndarray
    noise_sigma: Optional[float] = None
    field: float = 0.0
    scan_tag: str = "during"
    metadata: dict = _field(default_factory=dict)

    def __post_init__(self):
        self.freq_offsets = np.asarray(self.freq_offsets, dtype=float)
        self.signal = np.asarray(self.signal, dtype=float)
        self.field = float(self.field)
        if self.freq_offsets.ndim != 1 or self.freq_offsets.shape != self.signal.shape:
            raise DomainError("freq_offsets and signal must be 1-D arrays of equal length")
        if self.freq_offsets.size < 8:
            raise DomainError("a profile needs at least 8 points")
        if not (np.all(np.isfinite(self.freq_offsets)) and np.all(np.isfinite(self.signal))):
            raise DomainError("profile contains non-finite values")
        if np.any(np.diff(self.freq_offsets) <= 0):
            raise DomainError("freq_offsets must be strictly increasing")
        if self.scan_tag not in SCAN_TAGS:
            raise DomainError(f"scan_tag must be one of {SCAN_TAGS}, got {self.scan_tag!r}")
        if self.noise_sigma is not None:
            self.noise_sigma = float(self.noise_sigma)
            if not self.noise_sigma >= 0:
                raise DomainError("noise_sigma must be >= 0")

    @property
    def span(self) -> float:
        return float(self.freq_offsets[-1] - self.freq_offsets[0])


def normalize_polarity(signal):
    """Flip a trace so that the hole is a positive excursion from baseline."""
    signal = np.asarray(signal, dtype=float)
    base = np.median(signal)
    if abs(signal.min() - base) > abs(signal.max() - base):
        return -signal
    return signal


def lorentz_model(nu, center, gamma, amplitude, baseline):
    """Peak-height Lorentzian: ``amplitude`` is the depth at the centre."""
    d = (np.asarray(nu) - center) / gamma
    return amplitude / (1.0 + d * d) + baseline


def broadened_model(nu, f_bar, amplitude, baseline, center, gamma, rel_tol=MODEL_REL_TOL):
    """``amplitude * h((nu - center) / gamma; f_bar) + baseline``."""
    h, _ = hole_shape_with_error((np.asarray(nu) - center) / gamma, f_bar, rel_tol)
    return amplitude * h + baseline


def doublet_model(nu, center, split, gamma, amplitude, baseline):
    """Equal-weight Lorentzian pair at ``center +/- split``, conserving area."""
    nu = np.asarray(nu)
    return 0.5 * (
        lorentz_model(nu, center + split, gamma, amplitude, 0.0)
        + lorentz_model(nu, center - split, gamma, amplitude, 0.0)
    ) + baseline


@dataclass
class LorentzFit:
    center: float
    gamma: float
    amplitude: float
    baseline: float
    center_err: float
    gamma_err: float
    amplitude_err: float
    baseline_err: float
    residual_norm: float
    n_iter: int = 0
    trace: list = _field(default_factory=list, repr=False)

    @property
    def width(self) -> HoleWidth:
        return HoleWidth(self.gamma, self.gamma_err)

    @property
    def fwhm(self) -> float:
        return 2.0 * self.gamma

    @property
    def fwhm_err(self) -> float:
        return 2.0 * self.gamma_err


@dataclass
class BroadenedFit:
    f_bar: float
    amplitude: float
    baseline: float
    center: float
    f_bar_err: float
    amplitude_err: float
    baseline_err: float
    center_err: float
    residual_norm: float
    gamma: float
    at_bound: bool = False
    n_iter: int = 0
    trace: list = _field(default_factory=list, repr=False)


@dataclass
class DoubletFit:
    center: float
    split: float
    gamma: float
    amplitude: float
    baseline: float
    center_err: float
    split_err: float
    gamma_err: float
    amplitude_err: float
    baseline_err: float
    residual_norm: float
    n_iter: int = 0
    trace: list = _field(default_factory=list, repr=False)


def _weights(profile):
    sigma = profile.noise_sigma
    if sigma is None or sigma == 0:
        return 1.0
    return 1.0 / sigma


def _smooth(y, width):
    width = max(1, int(width))
    if width == 1:
        return y
    kernel = np.ones(width) / width
    return np.convolve(np.pad(y, width // 2, mode="edge"), kernel, mode="valid")[: y.size]


def _initial_peak(profile):
    """Baseline, smoothed peak height, peak position and half-maximum width."""
    nu = profile.freq_offsets
    y = profile.signal
    if np.ptp(y) == 0.0:
        raise DegenerateDataError("signal is constant; there is no hole to fit")
    n_edge = max(2, nu.size // 10)
    baseline = float(np.median(np.concatenate([y[:n_edge], y[-n_edge:]])))
    depth = _smooth(y - baseline, max(1, nu.size // 200) * 2 + 1)
    k = int(np.argmax(depth))
    peak = float(depth[k])
    if peak <= 0:
        raise DegenerateDataError("no positive hole above the baseline")
    half = 0.5 * peak
    left = k
    while left > 0 and depth[left] > half:
        left -= 1
    right = k
    while right < nu.size - 1 and depth[right] > half:
        right += 1

    def cross(i, j):
        yi, yj = depth[i], depth[j]
        if yi == yj:
            return nu[i]
        return nu[i] + (half - yi) * (nu[j] - nu[i]) / (yj - yi)

    lo = cross(left, left + 1) if left < k else nu[k]
    hi = cross(right - 1, right) if right > k else nu[k]
    step = float(np.median(np.diff(nu)))
    fwhm = max(hi - lo, step)
    return baseline, peak, float(nu[k]), fwhm


def fit_lorentzian(profile: HoleProfile, max_iter=200) -> LorentzFit:
    """Least-squares Lorentzian fit of a single hole.

    Standard errors come from the curvature of the objective at the optimum,
    scaled by the residual variance.

    Raises
    ------
    DegenerateDataError
        If the signal is constant.
    FitError
        If the optimizer does not converge or returns a non-physical width.
    """
    nu, y = profile.freq_offsets, profile.signal
    base0, peak0, c0, fwhm0 = _initial_peak(profile)
    g0 = 0.5 * fwhm0
    w = _weights(profile)

    def residual(p):
        return (lorentz_model(nu, p[0], p[1], p[2], p[3]) - y) * w

    step = float(np.median(np.diff(nu)))
    res = levenberg_marquardt(
        residual,
        [c0, g0, peak0, base0],
        lower=[-np.inf, 1e-6 * step, 0.0, -np.inf],
        typical=[g0, g0, peak0, peak0],
        max_iter=max_iter,
    )
    c, g, a, b = res.params
    if not (g > 1e-6 * step and a > 0):
        raise FitError("Lorentzian fit collapsed onto a parameter bound", trace=res.trace)
    e = res.stderr
    return LorentzFit(
        center=float(c), gamma=float(g), amplitude=float(a), baseline=float(b),
        center_err=float(e[0]), gamma_err=float(e[1]),
        amplitude_err=float(e[2]), baseline_err=float(e[3]),
        residual_norm=res.residual_norm / w if np.isscalar(w) else res.residual_norm,
        n_iter=res.n_iter, trace=res.trace,
    )


def _invert_fwhm(width):
    """``f_bar`` whose broadened FWHM (detuning units) equals ``width``."""
    if width <= 2.0:
        return 0.0
    # hole_fwhm(f) >= 2 sqrt(ln 2) f, so the root lies below width / 1.66
    return brentq(lambda f: hole_fwhm(f, rel_tol=1e-9) - width, 0.0, width / 1.6, xtol=1e-6)


def fit_broadened(profile: HoleProfile, gamma, max_iter=200, rel_tol=MODEL_REL_TOL) -> BroadenedFit:
    """Fit ``f_bar`` (plus amplitude, baseline, centre) at a known zero-field width.

    ``gamma`` is the HWHM in MHz (a float or :class:`HoleWidth`).  ``f_bar``
    is constrained to be nonnegative; if it ends below ``F_BAR_PIN`` a
    :class:`BoundaryWarning` is issued and ``at_bound`` is set.
    """
    gamma = float(gamma)
    if not gamma > 0:
        raise DomainError("gamma must be > 0")
    nu, y = profile.freq_offsets, profile.signal
    base0, peak0, c0, fwhm0 = _initial_peak(profile)
    f0 = _invert_fwhm(fwhm0 / gamma)
    h0, _ = hole_shape_with_error(np.array([0.0]), f0, 1e-8)
    a0 = peak0 / h0[0]
    w = _weights(profile)

    def residual(p):
        return (broadened_model(nu, p[0], p[1], p[2], p[3], gamma, rel_tol) - y) * w

    res = levenberg_marquardt(
        residual,
        [f0, a0, base0, c0],
        lower=[0.0, 0.0, -np.inf, -np.inf],
        typical=[1.0, a0, peak0, gamma],
        diff_step=1e-5,
        central=True,
        max_iter=max_iter,
    )
    f, a, b, c = res.params
    e = res.stderr
    at_bound = bool(f < F_BAR_PIN)
    if at_bound:
        warnings.warn(
            f"f_bar pinned at the zero boundary (estimate {f:.3g}); no resolvable broadening",
            BoundaryWarning,
            stacklevel=2,
        )
    return BroadenedFit(
        f_bar=float(f), amplitude=float(a), baseline=float(b), center=float(c),
        f_bar_err=float(e[0]), amplitude_err=float(e[1]),
        baseline_err=float(e[2]), center_err=float(e[3]),
        residual_norm=res.residual_norm / w if np.isscalar(w) else res.residual_norm,
        gamma=gamma, at_bound=at_bound, n_iter=res.n_iter, trace=res.trace,
    )


def fit_doublet(profile: HoleProfile, gamma=None, max_iter=200) -> DoubletFit:
    """Fit a symmetric Lorentzian pair (pseudo-Stark splitting).

    ``gamma`` (HWHM, MHz) only seeds the search; it is refined by the fit.
    The starting half-splitting is chosen by a coarse scan with the linear
    parameters solved exactly.
    """
    nu, y = profile.freq_offsets, profile.signal
    base0, peak0, c0, fwhm0 = _initial_peak(profile)
    g0 = float(gamma) if gamma is not None else 0.5 * fwhm0
    w = _weights(profile)

    best = None
    for d in np.linspace(0.0, 0.5 * max(fwhm0, 2 * g0) + 0.25 * profile.span, 81):
        for c in (c0, 0.0):
            shape = doublet_model(nu, c, d, g0, 1.0, 0.0)
            design = np.column_stack([shape, np.ones_like(shape)])
            coef, *_ = np.linalg.lstsq(design, y, rcond=None)
            rss = float(np.sum((design @ coef - y) ** 2))
            if coef[0] > 0 and (best is None or rss < best[0]):
                best = (rss, c, d, coef[0], coef[1])
    if best is None:
        raise DegenerateDataError("no positive doublet found")
    _, c_init, d_init, a_init, b_init = best
    step = float(np.median(np.diff(nu)))

    def residual(p):
        return (doublet_model(nu, p[0], p[1], p[2], p[3], p[4]) - y) * w

    res = levenberg_marquardt(
        residual,
        [c_init, d_init, g0, a_init, b_init],
        lower=[-np.inf, 0.0, 1e-6 * step, 0.0, -np.inf],
        typical=[g0, g0, g0, a_init, a_init],
        max_iter=max_iter,
    )
    c, d, g, a, b = res.params
    e = res.stderr
    return DoubletFit(
        center=float(c), split=float(d), gamma=float(g), amplitude=float(a), baseline=float(b),
        center_err=float(e[0]), split_err=float(e[1]), gamma_err=float(e[2]),
        amplitude_err=float(e[3]), baseline_err=float(e[4]),
        residual_norm=res.residual_norm / w if np.isscalar(w) else res.residual_norm,
        n_iter=res.n_iter, trace=res.trace,
    )


@dataclass
class OriginFit:
    """Straight line through the origin, ``y = slope * E``."""

    slope: float
    stderr: float
    residuals: np.ndarray
    chi2: float
    weighted: bool
    n: int


def linfit_origin(E, y, y_errors=None) -> OriginFit:
    """Weighted least-squares slope with the intercept fixed at zero.

    ``slope = sum(w E y) / sum(w E^2)`` with ``w = 1 / y_err**2``.  With
    errors the standard error is ``1 / sqrt(sum(w E^2))``; without them the
    residual scatter sets the scale.  Errors that are zero or non-finite
    make weighting meaningless and the fit falls back to equal weights.
    """
    E = np.asarray(E, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if E.shape != y.shape:
        raise DomainError("E and y must have equal length")
    if E.size < 2:
        raise DomainError("need at least two points")
    weighted = False
    w = np.ones_like(E)
    if y_errors is not None:
        err = np.asarray(y_errors, dtype=float).ravel()
        if err.shape != E.shape:
            raise DomainError("y_errors must match y")
        if np.all(np.isfinite(err)) and np.all(err > 0):
            w = 1.0 / err**2
            weighted = True
    sxx = float(np.sum(w * E * E))
    if sxx == 0.0:
        raise DegenerateDataError("all points are at zero field; the slope is undetermined")
    slope = float(np.sum(w * E * y) / sxx)
    resid = y - slope * E
    chi2 = float(np.sum(w * resid**2))
    if weighted:
        stderr = 1.0 / math.sqrt(sxx)
    else:
        stderr = math.sqrt(chi2 / (E.size - 1) / sxx)
    return OriginFit(slope=slope, stderr=stderr, residuals=resid, chi2=chi2, weighted=weighted, n=E.size)


@dataclass
class SweepStep:
    field: float
    before: Optional[HoleProfile] = None
    during: Optional[HoleProfile] = None
    after: Optional[HoleProfile] = None


@dataclass
class FieldSweep:
    """Records ``(applied field, profile)`` from one extraction campaign.

    Each applied field normally contributes a before/during/after triple;
    consecutive records with the same applied field form one step.
    ``gamma_zero_field`` overrides the width otherwise estimated from the
    zero-field scans.
    """

    records: list
    medium: object
    gamma_zero_field: Optional[HoleWidth] = None

    def steps(self):
        out = []
        current = None
        for E, prof in self.records:
            E = float(E)
            if current is None or current.field != E or getattr(current, prof.scan_tag) is not None:
                current = SweepStep(field=E)
                out.append(current)
            setattr(current, prof.scan_tag, prof)
        return out

    def zero_field_profiles(self):
        """Profiles measured without field: before/after scans and in-field scans at E=0."""
        zero = []
        for step in self.steps():
            if step.before is not None:
                zero.append(step.before)
            if step.during is not None and step.during.field == 0.0 and step.field == 0.0:
                zero.append(step.during)
        return zero


@dataclass
class ExtractionPoint:
    field: float
    value: float
    error: float
    detail: object = None


@dataclass
class Extraction:
    coefficient: StarkCoefficient
    regression: OriginFit
    points: list
    reference: dict = _field(default_factory=dict)


def _weighted_mean(values, errors):
    values = np.asarray(values, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if values.size == 1:
        return float(values[0]), float(errors[0])
    if np.all(errors > 0) and np.all(np.isfinite(errors)):
        w = 1.0 / errors**2
        return float(np.sum(w * values) / np.sum(w)), float(1.0 / math.sqrt(np.sum(w)))
    return float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(values.size))


def _crystal_reference(sweep, fits):
    zero = sweep.zero_field_profiles()
    if not zero:
        raise PreconditionError(
            "sweep has no zero-field record (before-scan or E=0 scan) to define the reference centre"
        )
    fz = [fits(p) for p in zero]
    return _weighted_mean([f.center for f in fz], [f.center_err for f in fz])


def _memo_fit(fit):
    cache = {}

    def get(profile):
        key = id(profile)
        if key not in cache:
            cache[key] = (profile, fit(profile))
        return cache[key][1]

    return get


def analyze_crystal(sweep: FieldSweep) -> Extraction:
    """Per-field centre shifts and their through-origin slope (kHz per V/cm).

    Shifts are measured against the step's own before-scan when present,
    otherwise against the pooled zero-field centre.  Centrosymmetric
    crystals are fit as doublets and the half-splitting is regressed on
    ``|E|``.
    """
    medium = sweep.medium
    if not isinstance(medium, Crystal):
        raise PreconditionError("analyze_crystal needs a Crystal medium")
    fits = _memo_fit(fit_lorentzian)
    if medium.inversion_symmetric:
        return _analyze_doublet(sweep, fits)
    ref_center, ref_err = _crystal_reference(sweep, fits)

    points = []
    for step in sweep.steps():
        if step.during is None:
            continue
        fd = fits(step.during)
        if step.before is not None:
            fb = fits(step.before)
            base, base_err = fb.center, fb.center_err
        else:
            base, base_err = ref_center, ref_err
        shift = fd.center - base
        err = math.hypot(fd.center_err, base_err)
        points.append(ExtractionPoint(step.field, shift * KHZ_PER_MHZ, err * KHZ_PER_MHZ, fd))
    if not points:
        raise PreconditionError("sweep has no in-field scans")
    reg = linfit_origin([p.field for p in points], [p.value for p in points], [p.error for p in points])
    return Extraction(
        coefficient=StarkCoefficient(reg.slope, reg.stderr),
        regression=reg,
        points=points,
        reference={"center_mhz": ref_center, "center_err_mhz": ref_err},
    )


def _analyze_doublet(sweep, fits):
    zero = sweep.zero_field_profiles()
    if not zero:
        raise PreconditionError("sweep has no zero-field record to seed the doublet width")
    fz = [fits(p) for p in zero]
    g_ref, _ = _weighted_mean([f.gamma for f in fz], [f.gamma_err for f in fz])
    points = []
    for step in sweep.steps():
        if step.during is None or step.field == 0.0:
            continue
        fd = fit_doublet(step.during, gamma=g_ref)
        points.append(ExtractionPoint(abs(step.field), fd.split * KHZ_PER_MHZ, fd.split_err * KHZ_PER_MHZ, fd))
    if not points:
        raise DegenerateDataError("all points are at zero field; the slope is undetermined")
    reg = linfit_origin([p.field for p in points], [p.value for p in points], [p.error for p in points])
    return Extraction(
        coefficient=StarkCoefficient(reg.slope, reg.stderr),
        regression=reg,
        points=points,
        reference={"gamma_mhz": g_ref},
    )


def zero_field_width(sweep: FieldSweep, fits=None) -> HoleWidth:
    """Homogeneous HWHM from the sweep override or the pooled zero-field fits."""
    if sweep.gamma_zero_field is not None:
        return sweep.gamma_zero_field
    zero = sweep.zero_field_profiles()
    if not zero:
        raise PreconditionError(
            "sweep has no zero-field record (before-scan or E=0 scan) to define gamma"
        )
    fits = fits or _memo_fit(fit_lorentzian)
    fz = [fits(p) for p in zero]
    g, g_err = _weighted_mean([f.gamma for f in fz], [f.gamma_err for f in fz])
    return HoleWidth(g, g_err)


def analyze_amorphous(sweep: FieldSweep) -> Extraction:
    """Per-field ``f_bar`` fits and the through-origin slope against ``|E|``.

    The coefficient is ``slope * gamma`` in kHz/(V/cm); its error combines
    the regression error with the uncertainty of the zero-field width.
    Zero-field in-field scans carry no slope information and are skipped.
    """
    if not isinstance(sweep.medium, Amorphous):
        raise PreconditionError("analyze_amorphous needs an Amorphous medium")
    width = zero_field_width(sweep)
    gamma, gamma_err = width.gamma, width.sigma_gamma
    points = []
    for step in sweep.steps():
        if step.during is None or step.field == 0.0:
            continue
        fb = fit_broadened(step.during, gamma)
        points.append(ExtractionPoint(abs(step.field), fb.f_bar, fb.f_bar_err, fb))
    if not points:
        raise DegenerateDataError("all points are at zero field; the slope is undetermined")
    reg = linfit_origin([p.field for p in points], [p.value for p in points], [p.error for p in points])
    kappa = reg.slope * gamma * KHZ_PER_MHZ
    sigma = KHZ_PER_MHZ * math.hypot(gamma * reg.stderr, reg.slope * gamma_err)
    return Extraction(
        coefficient=StarkCoefficient(kappa, sigma),
        regression=reg,
        points=points,
        reference={"gamma_mhz": gamma, "gamma_err_mhz": gamma_err},
    )


def extract_stark_crystal(sweep: FieldSweep) -> StarkCoefficient:
    return analyze_crystal(sweep).coefficient


def extract_stark_amorphous(sweep: FieldSweep) -> StarkCoefficient:
    return analyze_amorphous(sweep).coefficient


@dataclass
class ReversibilityRow:
    field: float
    quantity: str
    before: float
    after: float
    delta: float
    tol: float
    passed: bool


@dataclass
class ReversibilityReport:
    rows: list

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def failures(self):
        return [r for r in self.rows if not r.passed]


def reversibility_check(sweep: FieldSweep, tol=None, nsigma=3.0) -> ReversibilityReport:
    """Compare each after-scan with the zero-field reference.

    Crystals compare hole centres, amorphous hosts compare FWHM.  ``tol``
    is an absolute tolerance in MHz; when omitted each field uses
    ``nsigma`` times the combined fit standard error.
    """
    fits = _memo_fit(fit_lorentzian)
    crystal = isinstance(sweep.medium, Crystal)
    quantity = "center" if crystal else "fwhm"

    def measure(profile):
        f = fits(profile)
        return (f.center, f.center_err) if crystal else (f.fwhm, f.fwhm_err)

    rows = []
    steps = [s for s in sweep.steps() if s.after is not None]
    if not steps:
        return ReversibilityReport(rows=[])
    pooled = None
    for step in steps:
        if step.before is not None:
            ref, ref_err = measure(step.before)
        else:
            if pooled is None:
                zero = sweep.zero_field_profiles()
                if not zero:
                    raise PreconditionError("no zero-field record to compare after-scans against")
                vals = [measure(p) for p in zero]
                pooled = _weighted_mean([v for v, _ in vals], [e for _, e in vals])
            ref, ref_err = pooled
        val, err = measure(step.after)
        delta = val - ref
        limit = float(tol) if tol is not None else nsigma * math.hypot(err, ref_err)
        rows.append(ReversibilityRow(step.field, quantity, ref, val, delta, limit, abs(delta) < limit))
    return ReversibilityReport(rows=rows)
