"""Monte-Carlo ensemble reconstruction of the broadened hole shape.

Each simulated ion gets a dipole-difference magnitude ``f`` (Maxwell
distributed, mode ``f_bar``) and an isotropic orientation, so its line moves
by ``s = f * cos(theta)`` with ``cos(theta)`` uniform on ``[-1, 1]``.  The
hole is the ensemble mean of unit-HWHM Lorentzians centred at ``s``.

Samples are drawn in fixed-size blocks, each from its own Philox stream
keyed by ``(seed, block index)``.  Block statistics are merged in block
order, so the output does not depend on how many workers were used.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .lineshape import lorentzian

__all__ = ["EnsembleSpec", "McProfile", "sample_shift", "block_rng", "mc_hole_shape"]

BLOCK_SIZE = 1 << 15


@dataclass(frozen=True)
class EnsembleSpec:
    n_samples: int
    f_bar: float
    seed: int
    x_grid: np.ndarray = field(repr=False)

    def __post_init__(self):
        if int(self.n_samples) < 1:
            raise DomainError("n_samples must be >= 1")
        if not float(self.f_bar) >= 0.0:
            raise DomainError("f_bar must be >= 0")
        xs = np.atleast_1d(np.asarray(self.x_grid, dtype=float))
        if xs.ndim != 1 or not np.all(np.isfinite(xs)):
            raise DomainError("x_grid must be a finite 1-D sequence")
        object.__setattr__(self, "n_samples", int(self.n_samples))
        object.__setattr__(self, "f_bar", float(self.f_bar))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "x_grid", xs)


@dataclass(frozen=True)
class McProfile:
    x: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_samples: int


def sample_shift(f_bar, rng, size=None):
    """Draw dimensionless line shifts ``s = f * cos(theta)``.

    ``f`` is the norm of a 3-vector of independent normals with standard
    deviation ``f_bar / sqrt(2)``, which is Maxwell distributed with mode
    ``f_bar``.
    """
    f_bar = float(f_bar)
    if not f_bar >= 0.0:
        raise DomainError("f_bar must be >= 0")
    n = 1 if size is None else int(size)
    comps = rng.standard_normal((3, n))
    magnitude = (f_bar / math.sqrt(2.0)) * np.sqrt((comps * comps).sum(axis=0))
    cos_theta = rng.uniform(-1.0, 1.0, size=magnitude.shape)
    s = magnitude * cos_theta
    return float(s[0]) if size is None else s


def block_rng(seed, block):
    """Independent counter-based generator for one sample block."""
    ss = np.random.SeedSequence(entropy=int(seed) & ((1 << 64) - 1), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))


def _block_stats(spec, block, count):
    rng = block_rng(spec.seed, block)
    s = sample_shift(spec.f_bar, rng, size=count)
    vals = lorentzian(spec.x_grid[None, :] - s[:, None])
    mean = vals.mean(axis=0)
    m2 = ((vals - mean) ** 2).sum(axis=0)
    return count, mean, m2


def mc_hole_shape(spec: EnsembleSpec, workers=1, block_size=BLOCK_SIZE) -> McProfile:
    """Ensemble-averaged hole shape with per-point standard errors."""
    x = spec.x_grid
    if spec.f_bar == 0.0:
        return McProfile(x=x, mean=lorentzian(x), stderr=np.zeros_like(x), n_samples=spec.n_samples)

    n_blocks = -(-spec.n_samples // block_size)
    counts = [min(block_size, spec.n_samples - k * block_size) for k in range(n_blocks)]

    def job(k):
        return _block_stats(spec, k, counts[k])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(n_blocks)))
    else:
        parts = [job(k) for k in range(n_blocks)]

    # Chan et al. pairwise merge, always in block order.
    n, mean, m2 = parts[0]
    for nb, mb, m2b in parts[1:]:
        total = n + nb
        delta = mb - mean
        mean = mean + delta * (nb / total)
        m2 = m2 + m2b + delta * delta * (n * nb / total)
        n = total
    var = m2 / (n - 1) if n > 1 else np.zeros_like(mean)
    return McProfile(x=x, mean=mean, stderr=np.sqrt(var / n), n_samples=n)
