"""Periodic space-time grid fields and their spectral calculus.

All kernels are exact Fourier multipliers on the torus: the semigroup
kernel has symbol exp(-t(w^2 + |k|^4)), the heat inverse divides by
(i w + |k|^2) with the zero mode pinned to 0.  Working with exact
multipliers makes the semigroup property and operator commutation hold
to machine precision, so statistical error is never confounded with
discretization error.

Axis 0 is time (N0 points, period L0), axes 1..d are space (N1 points,
period L each).  In parabolic units time distances enter via their
square root, so L0 = L^2 gives both axes the same parabolic period.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "GridSpec",
    "GridField",
    "GridPoint",
    "parabolic_distance",
    "semigroup_convolve",
    "heat_solve",
    "heat_apply",
    "laplacian",
    "partial_derivative",
    "sobolev_norm",
    "taylor_subtract",
    "taylor_coefficients",
    "psi_kernel",
    "moment_bound_probe",
    "displacement",
    "poly_eval",
    "poly_laplacian",
    "poly_partial",
    "derivative_keys_below",
]


@dataclass(frozen=True)
class GridSpec:
    """Periodic space-time lattice: temporal period L0, spatial period L,
    N0 x N1^d nodes."""

    L0: float
    L: float
    N0: int
    N1: int
    d: int = 1

    def __post_init__(self):
        if self.N0 < 8 or self.N1 < 8:
            raise ValueError("need at least 8 grid points per axis")
        if self.L0 <= 0 or self.L <= 0:
            raise ValueError("periods must be positive")

    @property
    def shape(self) -> tuple:
        return (self.N0,) + (self.N1,) * self.d

    @property
    def steps(self) -> tuple:
        return (self.L0 / self.N0,) + (self.L / self.N1,) * self.d

    @property
    def cell_volume(self) -> float:
        return (self.L0 / self.N0) * (self.L / self.N1) ** self.d

    @property
    def volume(self) -> float:
        return self.L0 * self.L**self.d

    def center(self) -> "GridPoint":
        return GridPoint((self.N0 // 2,) + (self.N1 // 2,) * self.d)

    def refine(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.L0, self.L, self.N0 * factor, self.N1 * factor, self.d)

    def rescale(self, s: float) -> "GridSpec":
        """Parabolic rescaling of the domain: time period by s^2, space by s."""
        return GridSpec(self.L0 * s * s, self.L * s, self.N0, self.N1, self.d)


@dataclass(frozen=True)
class GridPoint:
    """A lattice node, stored by index."""

    idx: tuple

    def coords(self, spec: GridSpec) -> tuple:
        st = spec.steps
        return tuple(i * h for i, h in zip(self.idx, st))

    def shifted(self, cells: tuple, spec: GridSpec) -> "GridPoint":
        sh = spec.shape
        return GridPoint(tuple((i + c) % n for i, c, n in zip(self.idx, cells, sh)))


@dataclass(frozen=True)
class GridField:
    """Immutable real field over the lattice."""

    values: np.ndarray
    spec: GridSpec

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.spec.shape:
            raise ValueError(f"field shape {v.shape} != grid shape {self.spec.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zero(cls, spec: GridSpec) -> "GridField":
        return cls(np.zeros(spec.shape), spec)

    @classmethod
    def constant(cls, spec: GridSpec, value: float) -> "GridField":
        return cls(np.full(spec.shape, float(value)), spec)

    def __add__(self, other):
        if isinstance(other, GridField):
            return GridField(self.values + other.values, self.spec)
        return GridField(self.values + other, self.spec)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, GridField):
            return GridField(self.values - other.values, self.spec)
        return GridField(self.values - other, self.spec)

    def __mul__(self, other):
        if isinstance(other, GridField):
            return GridField(self.values * other.values, self.spec)
        return GridField(self.values * other, self.spec)

    __rmul__ = __mul__

    def __neg__(self):
        return GridField(-self.values, self.spec)

    def at(self, p: GridPoint) -> float:
        return float(self.values[p.idx])

    def mean(self) -> float:
        return float(np.mean(self.values))

    def roll(self, cells: tuple) -> "GridField":
        return GridField(np.roll(self.values, cells, axis=tuple(range(len(cells)))), self.spec)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


# --- frequency tables -------------------------------------------------------


@lru_cache(maxsize=64)
def _freqs(spec: GridSpec):
    """Angular frequencies (omega, k_1, ..., k_d) as broadcastable arrays."""
    out = []
    for axis, (n, period) in enumerate(
        [(spec.N0, spec.L0)] + [(spec.N1, spec.L)] * spec.d
    ):
        w = 2.0 * np.pi * np.fft.fftfreq(n, d=period / n)
        shape = [1] * (spec.d + 1)
        shape[axis] = n
        out.append(w.reshape(shape))
    return tuple(out)


@lru_cache(maxsize=64)
def _freqs_odd(spec: GridSpec):
    """Frequencies for odd-order derivatives: the unpaired Nyquist entry of
    every fully transformed axis is zeroed (a real-to-real multiplier
    cannot represent an odd derivative there)."""
    out = []
    for axis, w in enumerate(_freqs(spec)):
        n = spec.shape[axis]
        w = np.array(w)
        if n % 2 == 0:
            idx = [slice(None)] * (spec.d + 1)
            idx[axis] = n // 2
            w[tuple(idx)] = 0.0
        out.append(w)
    return tuple(out)


@lru_cache(maxsize=64)
def _parabolic_symbol(spec: GridSpec):
    """omega^2 + |k|^4 per mode."""
    fr = _freqs(spec)
    k2 = sum(f * f for f in fr[1:])
    return fr[0] ** 2 + k2 * k2


@lru_cache(maxsize=64)
def _heat_symbol(spec: GridSpec):
    """i*omega + |k|^2 per mode, zero mode replaced by inf for safe division.

    The unpaired time-Nyquist row (present for even N0) carries i*omega
    with no conjugate partner, which a real-to-real multiplier cannot
    represent; there the time derivative is replaced by the dissipative
    |omega|.  This touches only the single unresolved frequency and makes
    heat_solve and heat_apply exactly mutually inverse on real fields.
    """
    fr = _freqs(spec)
    k2 = sum(f * f for f in fr[1:])
    omega = np.array(np.broadcast_to(fr[0], spec.shape))
    i_omega = 1j * omega
    if spec.N0 % 2 == 0:
        nyq = spec.N0 // 2
        i_omega[nyq] = np.abs(omega[nyq])
    sym = i_omega + np.broadcast_to(k2, spec.shape)
    sym = np.array(sym, dtype=np.complex128)
    zero = (0,) * (spec.d + 1)
    sym[zero] = np.inf
    return sym


def _multiplier_apply(f: GridField, mult) -> GridField:
    spec = f.spec
    axes = tuple(range(spec.d + 1))
    half = np.asarray(np.broadcast_to(mult, spec.shape))[..., : spec.shape[-1] // 2 + 1]
    out = np.fft.irfftn(np.fft.rfftn(f.values, axes=axes) * half, s=spec.shape, axes=axes)
    return GridField(out, spec)


# --- geometry ----------------------------------------------------------------


def _min_image(delta: np.ndarray, period: float) -> np.ndarray:
    return delta - period * np.round(delta / period)


@lru_cache(maxsize=256)
def displacement(spec: GridSpec, base_idx: tuple):
    """Minimal-image coordinate offsets from the base node, one array per
    axis, each of full grid shape."""
    out = []
    st = spec.steps
    periods = (spec.L0,) + (spec.L,) * spec.d
    for axis in range(spec.d + 1):
        n = spec.shape[axis]
        coord = (np.arange(n) - base_idx[axis]) * st[axis]
        coord = _min_image(coord, periods[axis])
        shape = [1] * (spec.d + 1)
        shape[axis] = n
        out.append(np.broadcast_to(coord.reshape(shape), spec.shape))
    return tuple(out)


@lru_cache(maxsize=256)
def _parabolic_radius(spec: GridSpec, base_idx: tuple) -> np.ndarray:
    disp = displacement(spec, base_idx)
    rho = np.sqrt(np.abs(disp[0]))
    for a in disp[1:]:
        rho = rho + np.abs(a)
    return rho


def parabolic_distance(spec: GridSpec, x: GridPoint, y: GridPoint) -> float:
    """sqrt|x0-y0| + sum_i |xi-yi| with minimal periodic images."""
    st = spec.steps
    periods = (spec.L0,) + (spec.L,) * spec.d
    total = 0.0
    for axis in range(spec.d + 1):
        delta = (x.idx[axis] - y.idx[axis]) * st[axis]
        delta = float(_min_image(np.array(delta), periods[axis]))
        total += math.sqrt(abs(delta)) if axis == 0 else abs(delta)
    return total


# --- kernels ------------------------------------------------------------------


def semigroup_convolve(f: GridField, t: float) -> GridField:
    """Convolution with the semigroup kernel: multiply each mode by
    exp(-t(w^2+|k|^4)).  Mass preserving (zero mode untouched)."""
    if t <= 0:
        raise ValueError(f"semigroup time must be positive, got {t}")
    return _multiplier_apply(f, np.exp(-t * _parabolic_symbol(f.spec)))


def heat_solve(f: GridField) -> GridField:
    """Spectral inverse of (d_0 - Laplace); the zero mode of the result is
    set to 0 (the additive constant is fixed downstream by re-anchoring)."""
    return _multiplier_apply(f, 1.0 / _heat_symbol(f.spec))


def heat_apply(f: GridField) -> GridField:
    """(d_0 - Laplace) f, spectrally."""
    sym = np.array(_heat_symbol(f.spec))
    sym[(0,) * (f.spec.d + 1)] = 0.0
    return _multiplier_apply(f, sym)


def laplacian(f: GridField) -> GridField:
    fr = _freqs(f.spec)
    k2 = sum(g * g for g in fr[1:])
    return _multiplier_apply(f, -k2)


def partial_derivative(f: GridField, n: tuple) -> GridField:
    """d^n f with n = (n0, ..., nd), spectrally; odd orders use the
    Nyquist-zeroed frequency tables."""
    fr = _freqs(f.spec)
    fro = _freqs_odd(f.spec)
    mult = np.ones((1,) * (f.spec.d + 1), dtype=np.complex128)
    for axis, order in enumerate(n):
        if order:
            w = fro[axis] if order % 2 else fr[axis]
            mult = mult * (1j * w) ** order
    return _multiplier_apply(f, mult)


def sobolev_norm(f: GridField, s: float) -> float:
    """Anisotropic homogeneous Sobolev norm of order s; the zero mode is
    excluded so negative orders are finite."""
    spec = f.spec
    fhat = np.fft.fftn(f.values)
    sym = np.array(np.broadcast_to(_parabolic_symbol(spec), spec.shape))
    zero = (0,) * (spec.d + 1)
    sym[zero] = 1.0
    weights = sym ** (s / 2.0)
    weights[zero] = 0.0
    total = np.sum(np.abs(fhat) ** 2 * weights)
    norm2 = total * spec.cell_volume / math.prod(spec.shape)
    return float(np.sqrt(norm2))


@lru_cache(maxsize=128)
def _psi_values(spec: GridSpec, t: float) -> np.ndarray:
    axes = tuple(range(spec.d + 1))
    sym = np.broadcast_to(np.exp(-t * _parabolic_symbol(spec)), spec.shape)
    half = np.array(sym[..., : spec.shape[-1] // 2 + 1], dtype=np.complex128)
    vals = np.fft.irfftn(half, s=spec.shape, axes=axes) / spec.cell_volume
    vals.setflags(write=False)
    return vals


def psi_kernel(spec: GridSpec, t: float) -> GridField:
    """The semigroup kernel as a real-space field centered at the origin
    node, normalized so that sum * cell_volume = 1."""
    if t <= 0:
        raise ValueError("kernel time must be positive")
    return GridField(np.array(_psi_values(spec, t)), spec)


# --- Taylor machinery ---------------------------------------------------------


def derivative_keys_below(order: float, d: int) -> list:
    """Derivative multi-indices n with parabolic degree 2*n0+|n_sp| < order."""
    if order <= 0:
        return []
    out = []
    cap = int(math.ceil(order))
    for n0 in range(cap // 2 + 1):
        for sp in itertools.product(range(cap + 1), repeat=d):
            deg = 2 * n0 + sum(sp)
            if deg < order:
                out.append((n0,) + sp)
    return sorted(out, key=lambda n: (2 * n[0] + sum(n[1:]), n))


def _n_factorial(n: tuple) -> int:
    out = 1
    for v in n:
        out *= math.factorial(v)
    return out


def taylor_coefficients(f: GridField, x: GridPoint, order: float) -> dict:
    """Coefficients {n: d^n f(x) / n!} for parabolic degree < order,
    derivatives computed spectrally."""
    coeffs = {}
    for n in derivative_keys_below(order, f.spec.d):
        dval = partial_derivative(f, n).at(x) if any(n) else f.at(x)
        coeffs[n] = dval / _n_factorial(n)
    return coeffs


def poly_eval(spec: GridSpec, x: GridPoint, coeffs: dict) -> GridField:
    """Evaluate sum_n c_n (y-x)^n on the grid with minimal-image offsets."""
    disp = displacement(spec, x.idx)
    out = np.zeros(spec.shape)
    for n, c in coeffs.items():
        if c == 0.0:
            continue
        term = np.full(spec.shape, float(c))
        for axis, order in enumerate(n):
            if order:
                term = term * disp[axis] ** order
        out += term
    return GridField(out, spec)


def poly_partial(coeffs: dict, axis: int) -> dict:
    out: dict = {}
    for n, c in coeffs.items():
        if n[axis] == 0:
            continue
        m = list(n)
        m[axis] -= 1
        m = tuple(m)
        out[m] = out.get(m, 0.0) + c * n[axis]
    return out


def poly_laplacian(coeffs: dict) -> dict:
    out: dict = {}
    if not coeffs:
        return out
    d = len(next(iter(coeffs))) - 1
    for axis in range(1, d + 1):
        second = poly_partial(poly_partial(coeffs, axis), axis)
        for n, c in second.items():
            out[n] = out.get(n, 0.0) + c
    return {n: c for n, c in out.items() if c != 0.0}


def taylor_subtract(f: GridField, x: GridPoint, order: float):
    """f minus its space-time Taylor polynomial at x of parabolic degree
    < order.  Returns (remainder field, coefficient dict).  The largest
    requested derivative must stay well below the Nyquist degree."""
    if order <= 0:
        return f, {}
    max_deg = max(
        (2 * n[0] + sum(n[1:]) for n in derivative_keys_below(order, f.spec.d)),
        default=0,
    )
    if max_deg > min(f.spec.N0, f.spec.N1) // 2:
        raise ValueError(
            f"Taylor order {order} needs degree-{max_deg} derivatives, "
            "beyond this grid's resolution"
        )
    coeffs = taylor_coefficients(f, x, order)
    poly = poly_eval(f.spec, x, coeffs)
    return GridField(f.values - poly.values, f.spec), coeffs


# --- diagnostics --------------------------------------------------------------


def moment_bound_probe(
    spec: GridSpec, t: float, x: GridPoint, y: GridPoint, theta: float, n: tuple
) -> float:
    """Ratio of the kernel moment integral to its claimed bound.

    Evaluates int dz |d^n psi_t(y-z)| (t^{1/4} + |x-y| + |y-z|)^theta on
    the grid and divides by (t^{1/4})^{-|n|} (t^{1/4} + |x-y|)^theta.
    Bounded ratios across sweeps in t and |x-y| certify kernel quality.
    """
    if theta <= -(spec.d + 2):
        raise ValueError("theta must exceed -D")
    quarter = t**0.25
    dpsi = partial_derivative(psi_kernel(spec, t), n) if any(n) else psi_kernel(spec, t)
    dist_xy = parabolic_distance(spec, x, y)
    rho = _parabolic_radius(spec, y.idx)
    integrand = np.abs(dpsi.roll(y.idx).values) * (quarter + dist_xy + rho) ** theta
    lhs = float(np.sum(integrand) * spec.cell_volume)
    deg = 2 * n[0] + sum(n[1:])
    rhs = quarter ** (-deg) * (quarter + dist_xy) ** theta
    return lhs / rhs
