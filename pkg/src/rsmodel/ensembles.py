"""Noise ensembles on the periodic lattice.

Every ensemble is centered, shift and reflection invariant in law, and
normalized to unit white-noise variance (cell variance 1/cell_volume)
so that second-moment statistics are directly comparable across kinds.
Sampling is a pure function of (seed, sample_id) through a counter-based
generator, so samples are reproducible independently of evaluation
order or worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import GridField, GridSpec, _freqs, semigroup_convolve

__all__ = ["EnsembleSpec", "sample_noise", "mollify", "noise_mollified_variance"]

_KINDS = ("gaussian_white", "gaussian_fractional", "uniform_cell", "rademacher_cell")

# Fixed stream tags so different roles (noise sample vs auxiliary draws)
# never collide in the counter space.
_NOISE_TAG = 0x5EED


@dataclass(frozen=True)
class EnsembleSpec:
    """Which noise law drives the model.

    gaussian_white / uniform_cell / rademacher_cell: i.i.d. per cell with
    variance 1/cell_volume (matched across kinds).  gaussian_fractional:
    Gaussian with Fourier envelope (w^2+|k|^4)^(-s/4) where
    s = alpha_target - 2 + D/2, which produces the small-scale exponent
    alpha_target in the mollified moment bound.
    """

    kind: str = "gaussian_white"
    alpha_target: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if self.kind == "gaussian_fractional" and self.alpha_target is None:
            raise ValueError("gaussian_fractional needs alpha_target")

    def intrinsic_alpha(self, d: int) -> float:
        """The exponent actually realized by the ensemble: 2 - D/2 for the
        cell-wise kinds (white-noise scaling), alpha_target for the
        fractional kind."""
        if self.kind == "gaussian_fractional":
            return float(self.alpha_target)
        return 2.0 - (d + 2) / 2.0

    def label(self) -> str:
        if self.kind == "gaussian_fractional":
            return f"gaussian_fractional({self.alpha_target})"
        return self.kind


def _rng(seed: int, sample_id: int) -> np.random.Generator:
    # Philox takes a 128-bit key: pack (seed, sample_id) into two words so
    # every sample owns a disjoint, order-independent counter stream.
    key = (int(seed) & (2**64 - 1)) | ((_NOISE_TAG + int(sample_id)) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def _fractional_envelope(spec: GridSpec, alpha_target: float) -> np.ndarray:
    fr = _freqs(spec)
    k2 = sum(f * f for f in fr[1:])
    sym = np.array(np.broadcast_to(fr[0] ** 2 + k2 * k2, spec.shape))
    zero = (0,) * (spec.d + 1)
    sym[zero] = 1.0
    s = alpha_target - 2.0 + (spec.d + 2) / 2.0
    env = sym ** (-s / 4.0)
    env[zero] = 0.0
    return env


def sample_noise(
    spec: EnsembleSpec, grid: GridSpec, seed: int, sample_id: int
) -> GridField:
    """Draw one noise realization; bitwise deterministic in (seed, sample_id)."""
    rng = _rng(seed, sample_id)
    scale = 1.0 / math.sqrt(grid.cell_volume)
    if spec.kind == "gaussian_white":
        vals = rng.standard_normal(grid.shape) * scale
    elif spec.kind == "uniform_cell":
        vals = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), grid.shape) * scale
    elif spec.kind == "rademacher_cell":
        vals = (2.0 * rng.integers(0, 2, grid.shape) - 1.0) * scale
    else:  # gaussian_fractional
        white = rng.standard_normal(grid.shape) * scale
        env = _fractional_envelope(grid, float(spec.alpha_target))
        vals = np.real(np.fft.ifftn(np.fft.fftn(white) * env))
    return GridField(vals, grid)


def mollify(xi: GridField, tau: float) -> GridField:
    """Mollified noise: convolution with the semigroup kernel at time tau."""
    if tau <= 0:
        raise ValueError(f"mollification scale must be positive, got {tau}")
    return semigroup_convolve(xi, tau)


def coupled_sample(
    spec_b: EnsembleSpec, white: GridField
) -> GridField | None:
    """Variance-matched comonotone coupling: map a white Gaussian sample
    cell-wise through the quantile transform onto the target cell law.

    The marginal law is exactly that of spec_b; the coupling maximizes the
    cell-wise correlation, which is what the paired universality runs use.
    Returns None when no quantile coupling is defined for the kind.
    """
    from scipy.special import ndtr

    scale = 1.0 / math.sqrt(white.spec.cell_volume)
    z = white.values / scale
    if spec_b.kind == "uniform_cell":
        vals = math.sqrt(3.0) * (2.0 * ndtr(z) - 1.0) * scale
    elif spec_b.kind == "rademacher_cell":
        vals = np.where(z >= 0, 1.0, -1.0) * scale
    else:
        return None
    return GridField(vals, white.spec)


def noise_mollified_variance(
    spec: EnsembleSpec, grid: GridSpec, tau: float
) -> float:
    """Exact Var(xi_tau(x)) for any of the (cell-independent or Gaussian)
    kinds, by summing the mode covariance; the stationary oracle behind
    the annealed small-scale bound."""
    fr = _freqs(grid)
    k2 = sum(f * f for f in fr[1:])
    sym = np.array(np.broadcast_to(fr[0] ** 2 + k2 * k2, grid.shape))
    weights = np.exp(-2.0 * tau * sym)
    if spec.kind == "gaussian_fractional":
        weights = weights * _fractional_envelope(grid, float(spec.alpha_target)) ** 2
    zero = (0,) * (grid.d + 1)
    weights[zero] = 0.0 if spec.kind == "gaussian_fractional" else weights[zero]
    # White-type noise: E |xi_hat(m)|^2 = N_tot / cell_volume for every mode.
    ntot = math.prod(grid.shape)
    return float(np.sum(weights)) * ntot / grid.cell_volume / ntot**2
