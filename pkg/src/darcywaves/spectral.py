"""Periodic grids, spectral transforms, differentiation, and Sobolev norms.

Everything here works on the torus [0, 2*pi)^d, d in {1, 2}, sampled on a
uniform grid with n points per axis (n a power of two).  Fourier
coefficients follow the Parseval-normalized convention

    f(x) = sum_k fhat(k) exp(i k.x),      ||f||_{L2}^2 = sum_k |fhat(k)|^2,

where the L2 norm is taken with the normalized (unit-mass) measure on the
torus, i.e. ||f||_{L2}^2 = (2*pi)^{-d} * integral of |f|^2.  Under this
convention cos(x) has coefficients fhat(+-1) = 1/2 and squared L2 norm 1/2,
and every multiplier symbol in the package is convention-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import OrderTooHigh

_ROUNDTRIP_RTOL = 1e-12
_MEANZERO_RTOL = 1e-12


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform grid on the torus [0, 2*pi)^d with n points per axis.

    Wavenumbers per axis are the integers in [-n/2, n/2), stored in FFT
    order.  n must be a power of two, n >= 8.
    """

    d: int
    n: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def npoints(self):
        return self.n**self.d

    def axis_nodes(self):
        return 2.0 * np.pi * np.arange(self.n) / self.n

    def nodes(self):
        """Coordinate arrays, each of shape `self.shape` ('ij' indexing)."""
        x = self.axis_nodes()
        if self.d == 1:
            return (x,)
        return tuple(np.meshgrid(x, x, indexing="ij"))

    def axis_wavenumbers(self):
        """Integer wavenumbers for one axis in FFT order."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)

    def wavenumbers(self):
        """d arrays of shape `self.shape` with the wavenumber of each mode."""
        return _wavenumber_grids(self)

    def abs_k(self):
        """|k| per mode, shape `self.shape`."""
        return _absk_grid(self)


@lru_cache(maxsize=32)
def _wavenumber_grids(grid: PeriodicGrid):
    k = grid.axis_wavenumbers().astype(np.float64)
    if grid.d == 1:
        out = (k,)
    else:
        out = tuple(np.meshgrid(k, k, indexing="ij"))
    for a in out:
        a.flags.writeable = False
    return out

@lru_cache(maxsize=32)
def _absk_grid(grid: PeriodicGrid):
    ks = _wavenumber_grids(grid)
    a = np.sqrt(sum(k**2 for k in ks))
    a.flags.writeable = False
    return a


def _freeze(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


class SurfaceField:
    """Real periodic scalar field with dual physical/spectral representation.

    Immutable: arrays are frozen on construction, and all operations return
    new fields.  Instances are therefore safe to share between threads.
    """

    __slots__ = ("grid", "_values", "_coeffs")

    def __init__(self, grid: PeriodicGrid, values=None, coeffs=None):
        if values is None and coeffs is None:
            raise ValueError("need values or coeffs")
        self.grid = grid
        self._values = None
        self._coeffs = None
        if values is not None:
            values = np.asarray(values, dtype=np.float64)
            if values.shape != grid.shape:
                raise ValueError(f"values shape {values.shape} != grid {grid.shape}")
            self._values = _freeze(values)
        if coeffs is not None:
            coeffs = np.asarray(coeffs, dtype=np.complex128)
            if coeffs.shape != grid.shape:
                raise ValueError(f"coeffs shape {coeffs.shape} != grid {grid.shape}")
            self._coeffs = _freeze(coeffs)

    # -- construction ------------------------------------------------------

    @classmethod
    def zero(cls, grid):
        return cls(grid, values=np.zeros(grid.shape))

    @classmethod
    def from_values(cls, grid, values):
        return cls(grid, values=values)

    @classmethod
    def from_coeffs(cls, grid, coeffs):
        return cls(grid, coeffs=coeffs)

    @classmethod
    def from_modes(cls, grid, modes):
        """Build sum of cosine modes: modes is {k: (amplitude, phase)}.

        Keys are ints (d=1) or tuples (d=2); each contributes
        amplitude * cos(k.x + phase).  k = 0 is rejected (fields built this
        way are mean-zero by construction).
        """
        xs = grid.nodes()
        vals = np.zeros(grid.shape)
        for k, (amp, phase) in modes.items():
            kvec = (k,) if np.isscalar(k) else tuple(k)
            if len(kvec) != grid.d:
                raise ValueError(f"mode {k} has wrong dimension")
            if all(kj == 0 for kj in kvec):
                raise ValueError("k = 0 mode not allowed (mean-zero table)")
            phase_field = sum(kj * x for kj, x in zip(kvec, xs))
            vals += amp * np.cos(phase_field + phase)
        return cls(grid, values=vals)

    # -- representations ----------------------------------------------------

    @property
    def values(self):
        if self._values is None:
            v = np.fft.ifftn(self._coeffs) * self.grid.npoints
            self._values = _freeze(v.real)
        return self._values

    @property
    def coeffs(self):
        if self._coeffs is None:
            self._coeffs = _freeze(np.fft.fftn(self._values) / self.grid.npoints)
        return self._coeffs

    # -- basic reductions ----------------------------------------------------

    @property
    def mean(self):
        if self._coeffs is not None:
            return float(self._coeffs[(0,) * self.grid.d].real)
        return float(np.mean(self._values))

    @property
    def mean_zero(self):
        nrm = self.l2_norm()
        if nrm == 0.0:
            return True
        return abs(self.coeffs[(0,) * self.grid.d]) <= _MEANZERO_RTOL * nrm

    def l2_norm(self):
        if self._values is not None:
            return float(np.sqrt(np.mean(self._values**2)))
        return float(np.sqrt(np.sum(np.abs(self._coeffs) ** 2)))

    def max_norm(self):
        return float(np.max(np.abs(self.values)))

    def __repr__(self):
        return (f"SurfaceField(d={self.grid.d}, n={self.grid.n}, "
                f"l2={self.l2_norm():.3e})")

    # -- algebra -------------------------------------------------------------

    def _binary(self, other, op):
        if isinstance(other, SurfaceField):
            if other.grid != self.grid:
                raise ValueError("grid mismatch")
            return SurfaceField(self.grid, values=op(self.values, other.values))
        return SurfaceField(self.grid, values=op(self.values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __radd__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, scalar):
        return SurfaceField(self.grid, values=self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return SurfaceField(self.grid, values=-self.values)

    def product(self, other: "SurfaceField"):
        """Pointwise product on the grid (no dealiasing)."""
        if other.grid != self.grid:
            raise ValueError("grid mismatch")
        return SurfaceField(self.grid, values=self.values * other.values)


def transform(f: SurfaceField):
    """Fourier coefficients of f (Parseval-normalized; see module docstring)."""
    return f.coeffs


def inverse_transform(grid: PeriodicGrid, coeffs):
    """Field with the given coefficients."""
    return SurfaceField(grid, coeffs=coeffs)


def l2_inner(f: SurfaceField, g: SurfaceField):
    """L2 inner product under the unit-mass measure: (f, g) = mean(f*g)."""
    if f.grid != g.grid:
        raise ValueError("grid mismatch")
    return float(np.mean(f.values * g.values))


def project_mean_zero(f: SurfaceField):
    """Remove the k=0 mode.  Linear idempotent, exactly mean-free after."""
    c = f.coeffs.copy()
    c[(0,) * f.grid.d] = 0.0
    return SurfaceField(f.grid, coeffs=c)


_MAX_DERIV_ORDER = 6


def _normalize_multiindex(grid, alpha):
    if np.isscalar(alpha):
        alpha = (int(alpha),) * 1 if grid.d == 1 else None
        if alpha is None:
            raise ValueError("scalar multiindex only valid for d=1")
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != grid.d:
        raise ValueError(f"multiindex {alpha} has wrong length for d={grid.d}")
    if any(a < 0 for a in alpha):
        raise ValueError(f"multiindex must be nonnegative, got {alpha}")
    return alpha


def derivative(f: SurfaceField, alpha):
    """Spectral partial derivative d^alpha f, |alpha| <= 6.

    Fourier multiplier (ik)^alpha, exact on resolved modes.  The Nyquist
    plane k_j = -n/2 is zeroed on axes with odd alpha_j so the result stays
    real; it is unresolved for odd derivatives on an even grid.
    """
    alpha = _normalize_multiindex(f.grid, alpha)
    if sum(alpha) > _MAX_DERIV_ORDER:
        raise OrderTooHigh(f"|alpha| = {sum(alpha)} exceeds {_MAX_DERIV_ORDER}")
    if sum(alpha) == 0:
        return f
    c = f.coeffs.copy()
    ks = f.grid.wavenumbers()
    mult = np.ones(f.grid.shape, dtype=np.complex128)
    for ax, a in enumerate(alpha):
        if a == 0:
            continue
        k = ks[ax]
        mult = mult * (1j * k) ** a
        if a % 2 == 1:
            mult = mult * (k != -f.grid.n // 2)
    return SurfaceField(f.grid, coeffs=c * mult)


def gradient(f: SurfaceField):
    """Tuple of first partials along each axis."""
    outs = []
    for ax in range(f.grid.d):
        alpha = tuple(1 if i == ax else 0 for i in range(f.grid.d))
        outs.append(derivative(f, alpha))
    return tuple(outs)


def laplacian(f: SurfaceField):
    c = f.coeffs * -(f.grid.abs_k() ** 2)
    return SurfaceField(f.grid, coeffs=c)


@dataclass(frozen=True)
class SobolevIndex:
    """Sobolev exponent s in [-2, 12]; homogeneous norms drop the k=0 mode."""

    s: float
    homogeneous: bool = False

    def __post_init__(self):
        if not -2.0 <= self.s <= 12.0:
            raise ValueError(f"s = {self.s} outside supported range [-2, 12]")


def sobolev_norm(f: SurfaceField, idx, homogeneous=False):
    """H^s norm: (sum_k w(k)^{2s} |fhat(k)|^2)^{1/2}.

    w(k) = (1 + |k|^2)^{1/2} for the inhomogeneous norm, w(k) = |k| over
    k != 0 for the homogeneous one.  `idx` may be a SobolevIndex or a bare
    exponent (then `homogeneous` applies).

    The homogeneous H^{1/2} norm uses weight |k| (exponent 2s = 1).  A
    variant with weight |k|^2 shows up in some conventions; it is simply the
    homogeneous norm at s = 1 and is available through that index.
    """
    if not isinstance(idx, SobolevIndex):
        idx = SobolevIndex(float(idx), homogeneous)
    c2 = np.abs(f.coeffs) ** 2
    if idx.homogeneous:
        absk = f.grid.abs_k()
        w = np.zeros(f.grid.shape)
        nz = absk > 0
        w[nz] = absk[nz] ** (2.0 * idx.s)
        return float(np.sqrt(np.sum(w * c2)))
    w = (1.0 + f.grid.abs_k() ** 2) ** idx.s
    return float(np.sqrt(np.sum(w * c2)))


def hdot_half_norm(f: SurfaceField, squared_weight=False):
    """Homogeneous 1/2-norm, weight |k| per mode.

    With squared_weight=True uses the alternative displayed weight |k|^2,
    which coincides with the homogeneous s=1 norm and is exposed here only
    for comparison studies.
    """
    return sobolev_norm(f, SobolevIndex(1.0 if squared_weight else 0.5,
                                        homogeneous=True))


def w_inf_norm(f: SurfaceField, order: int):
    """Grid proxy for the W^{k,inf} norm: max over |alpha| <= order of
    the sup of the spectral derivative on the grid."""
    if order < 0:
        raise ValueError("order must be >= 0")
    best = f.max_norm()
    for alpha in _multiindices_up_to(f.grid.d, order):
        if sum(alpha) == 0:
            continue
        best = max(best, derivative(f, alpha).max_norm())
    return best


def _multiindices_up_to(d, order):
    if d == 1:
        return [(a,) for a in range(order + 1)]
    return [(a, b) for a in range(order + 1) for b in range(order + 1 - a)]


def dealias(f: SurfaceField, rule="2/3"):
    """Zero every coefficient with any |k_j| > rule * n/2.

    rule is '2/3' (or the float 2/3) or None for a no-op.  Idempotent.
    """
    if rule is None or rule == "none":
        return f
    frac = 2.0 / 3.0 if rule == "2/3" else float(rule)
    cutoff = frac * f.grid.n / 2.0
    ks = f.grid.wavenumbers()
    keep = np.ones(f.grid.shape, dtype=bool)
    for k in ks:
        keep &= np.abs(k) <= cutoff
    return SurfaceField(f.grid, coeffs=f.coeffs * keep)


def dealiased_product(f: SurfaceField, g: SurfaceField, rule="2/3"):
    """Pointwise product followed by dealiasing (one pseudospectral product)."""
    return dealias(f.product(g), rule)


def random_smooth_field(grid, rng, kmax=6, decay=1.0, mean_zero=True):
    """Random band-limited field with |fhat(k)| ~ exp(-decay*|k|), seeded rng.

    Used by test ensembles and the property harness; amplitude is O(1),
    rescale as needed.
    """
    c = np.zeros(grid.shape, dtype=np.complex128)
    ks = grid.wavenumbers()
    absk = grid.abs_k()
    band = (absk <= kmax) & (absk > 0 if mean_zero else absk >= 0)
    phases = rng.uniform(0, 2 * np.pi, size=grid.shape)
    amps = rng.normal(size=grid.shape)
    c[band] = (amps * np.exp(1j * phases))[band] * np.exp(-decay * absk[band])
    # hermitian-symmetrize so values are real
    f = SurfaceField(grid, coeffs=c)
    v = f.values  # ifft of non-symmetric coeffs: take the real part
    out = SurfaceField(grid, values=v)
    if mean_zero:
        out = project_mean_zero(out)
    return out
