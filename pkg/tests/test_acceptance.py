"""End-to-end acceptance criteria 1-9.

Criteria 4-6 and 9 are round trips through synthetic campaigns built from
the published apparatus numbers; original traces are not available.  Each
criterion prints one PASS/FAIL line in the terminal summary.
"""

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from starkhole.core import Amorphous, Crystal, StarkCoefficient
from starkhole.cribplan import (
    CribTarget,
    amorphous_field_plan,
    broadened_fwhm,
    crystal_field_plan,
    crystal_span,
)
from starkhole.expsim import PRESETS, simulate_sweep
from starkhole.fitting import analyze_amorphous, analyze_crystal, reversibility_check
from starkhole.lineshape import hole_shape_with_error, lorentzian
from starkhole.oracle import EnsembleSpec, mc_hole_shape

CRYSTAL = PRESETS["crystal-linbo3"]
FIBER = PRESETS["fiber-silicate"]


def crystal_campaign(**scan):
    p = CRYSTAL.with_scan(**scan) if scan else CRYSTAL
    return simulate_sweep(p.medium_model(), p.fields(), p.scan)


def fiber_campaign(**scan):
    p = FIBER.with_scan(**scan) if scan else FIBER
    return simulate_sweep(p.medium_model(), p.fields(), p.scan)


def test_criterion_1_oracle_equivalence(record_criterion):
    x = np.linspace(-10, 10, 21)
    start = time.perf_counter()
    worst = {}
    for f_bar in (0.25, 1.0, 4.0):
        h, qerr = hole_shape_with_error(x, f_bar)
        mc = mc_hole_shape(EnsembleSpec(10**6, f_bar, 0, x), workers=os.cpu_count() or 1)
        worst[f_bar] = float(np.max(np.abs(mc.mean - h) / np.hypot(mc.stderr, qerr)))
    elapsed = time.perf_counter() - start
    passed = all(z <= 3 for z in worst.values()) and elapsed < 30
    detail = ", ".join(f"f_bar={k:g} max|z|={v:.2f}" for k, v in worst.items()) + f"; {elapsed:.1f} s"
    record_criterion(1, "oracle equivalence", passed, detail)
    assert passed, detail


def test_criterion_2_lorentzian_limit(record_criterion):
    x = np.linspace(-10, 10, 2001)
    h, _ = hole_shape_with_error(x, 1e-3)
    sup = float(np.max(np.abs(h - lorentzian(x))))
    record_criterion(2, "Lorentzian limit", sup < 1e-6, f"sup|h - L| = {sup:.2e}")
    assert sup < 1e-6


def normalization_grid(f_bar, x_max=1e5):
    # Fine uniform core, geometric tails; the mass beyond x_max is 2/(pi x_max) = 6.4e-6.
    core = 10.0 + 6.0 * f_bar
    inner = np.arange(-core, core + 1e-9, 0.01)
    outer = core * 1.002 ** np.arange(1, int(math.log(x_max / core) / math.log(1.002)) + 2)
    return np.concatenate([-outer[::-1], inner, outer])


def test_criterion_3_normalization(record_criterion):
    errors = {}
    for f_bar in (0.0, 0.1, 1.0, 5.0, 20.0):
        x = normalization_grid(f_bar)
        h, _ = hole_shape_with_error(x, f_bar)
        errors[f_bar] = abs(np.trapezoid(h, x) - 1.0)
    passed = max(errors.values()) < 1e-4
    record_criterion(3, "normalization", passed, ", ".join(f"{k:g}:{v:.1e}" for k, v in errors.items()))
    assert passed


def test_criterion_4_crystal_pipeline(record_criterion):
    start = time.perf_counter()
    noisy = analyze_crystal(crystal_campaign()).coefficient
    clean = analyze_crystal(crystal_campaign(noise_sigma=0.0)).coefficient
    elapsed = time.perf_counter() - start
    rel = abs(clean.kappa - 25.0) / 25.0
    passed = abs(noisy.kappa - 25.0) <= 1.0 and rel <= 1e-4 and elapsed < 10
    detail = f"noisy {noisy}, noiseless rel err {rel:.1e}, {elapsed:.1f} s"
    record_criterion(4, "crystal pipeline", passed, detail)
    assert passed, detail


def test_criterion_5_fiber_pipeline(record_criterion):
    start = time.perf_counter()
    res = analyze_amorphous(fiber_campaign())
    elapsed = time.perf_counter() - start
    kappa = res.coefficient
    E = np.array([p.field for p in res.points])
    f = np.array([p.value for p in res.points])
    err = np.array([p.error for p in res.points])
    reg = res.regression
    # each point's own slope f/E agrees with the through-origin slope
    pull = (f / E - reg.slope) / np.hypot(err / E, reg.stderr)
    # a free intercept is consistent with zero
    a = np.column_stack([np.ones_like(E), E]) / err[:, None]
    cov = np.linalg.inv(a.T @ a)
    intercept, _ = cov @ a.T @ (f / err)
    z_intercept = intercept / math.sqrt(cov[0, 0])
    linear = np.all(np.abs(pull) < 3) and abs(z_intercept) < 3
    passed = abs(kappa.kappa - 15.0) <= 1.0 and linear and elapsed < 60
    detail = (f"{kappa}, max slope pull {np.max(np.abs(pull)):.2f}, intercept {z_intercept:+.2f} sigma, "
              f"{elapsed:.1f} s")
    record_criterion(5, "fiber pipeline", passed, detail)
    assert passed, detail


def test_criterion_6_reversibility(record_criterion):
    reports = {"crystal": reversibility_check(crystal_campaign()), "fiber": reversibility_check(fiber_campaign())}
    passed = all(r.all_passed and r.rows for r in reports.values())
    detail = ", ".join(f"{k} {len(r.rows) - len(r.failures)}/{len(r.rows)}" for k, r in reports.items())
    record_criterion(6, "reversibility", passed, detail)
    assert passed, detail


def test_criterion_7_crib_crystal(record_criterion):
    plan = crystal_field_plan(CribTarget(Crystal(StarkCoefficient(25.0)), bandwidth=100.0))
    span = crystal_span(25.0, plan.e_max)
    passed = plan.e_max == 2000.0 and abs(span - 100.0) <= 4 * np.finfo(float).eps * 100
    record_criterion(7, "CRIB crystal plan", passed, f"+/-{plan.e_max:g} V/cm, span {span!r} MHz")
    assert passed


def test_criterion_8_crib_fiber(record_criterion):
    fields = {}
    for gamma in (1.0, 2.0, 5.0, 10.0, 15.0, 20.0):
        plan = amorphous_field_plan(CribTarget(Amorphous(StarkCoefficient(15.0)), bandwidth=100.0, gamma=gamma))
        assert broadened_fwhm(15.0, plan.e_max, gamma) == pytest.approx(100.0, rel=1e-6)
        fields[gamma] = plan.e_max
    passed = all(1750 <= e <= 5250 for e in fields.values())
    detail = ", ".join(f"gamma {g:g}: {e:.0f}" for g, e in fields.items()) + " V/cm"
    record_criterion(8, "CRIB fiber plan", passed, detail)
    assert passed, detail


def _round_trip(seed):
    res = analyze_crystal(crystal_campaign(seed=seed)).coefficient
    return res.kappa, res.sigma_kappa


def test_criterion_9_calibration(record_criterion):
    seeds = range(1000, 1200)
    with ProcessPoolExecutor(max_workers=min(8, os.cpu_count() or 1)) as pool:
        runs = list(pool.map(_round_trip, seeds))
    inside = sum(abs(k - 25.0) <= 1.96 * s for k, s in runs)
    coverage = inside / len(runs)
    passed = 0.90 <= coverage <= 0.99
    record_criterion(9, "statistical calibration", passed, f"{inside}/{len(runs)} = {coverage:.1%} inside 1.96 sigma")
    assert passed
