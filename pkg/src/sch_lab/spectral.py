"""Real periodic fields on the torus and their Fourier-multiplier calculus.

Conventions: the torus has length 2*pi and N uniform collocation points.
Fourier coefficients follow the integral convention

    uhat(k) = int_T u(x) exp(-i k x) dx,

realized as (2*pi/N) times the raw DFT.  Frequencies are stored in
numpy fft order; the Nyquist bin k = -N/2 is zeroed by every odd
(derivative-type) multiplier so that all operators map real fields to
real fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import struct

import numpy as np

TWO_PI = 2.0 * np.pi
MAGIC = b"SCHG"


@lru_cache(maxsize=32)
def _grid_cache(n_points: int):
    x = TWO_PI * np.arange(n_points) / n_points
    k = np.fft.fftfreq(n_points, d=1.0 / n_points)
    x.setflags(write=False)
    k.setflags(write=False)
    return x, k


class TorusGrid:
    """Uniform grid of N points on [0, 2*pi); N even and >= 8."""

    def __init__(self, n_points: int):
        if n_points < 8 or n_points % 2 != 0:
            raise ValueError(f"n_points must be even and >= 8, got {n_points}")
        self.n_points = int(n_points)
        self.length = TWO_PI
        self.points, self.freqs = _grid_cache(self.n_points)

    @property
    def nyquist_index(self) -> int:
        return self.n_points // 2

    def __eq__(self, other):
        return isinstance(other, TorusGrid) and other.n_points == self.n_points

    def __hash__(self):
        return hash(("TorusGrid", self.n_points))

    def __repr__(self):
        return f"TorusGrid(n_points={self.n_points})"


class GridFunction:
    """Real field on a TorusGrid with a lazily cached spectrum.

    Instances are immutable: operations return new GridFunctions.
    """

    __slots__ = ("grid", "_values", "_spectrum")

    def __init__(self, grid: TorusGrid, values=None, spectrum=None):
        if values is None and spectrum is None:
            raise ValueError("need values or spectrum")
        self.grid = grid
        if values is not None:
            values = np.asarray(values, dtype=float)
            if values.shape != (grid.n_points,):
                raise ValueError("values shape mismatch")
            if not np.all(np.isfinite(values)):
                bad = int(np.flatnonzero(~np.isfinite(values))[0])
                raise ValueError(f"non-finite value at grid index {bad}")
        self._values = values
        if spectrum is not None:
            spectrum = np.asarray(spectrum, dtype=complex)
            if spectrum.shape != (grid.n_points,):
                raise ValueError("spectrum shape mismatch")
        self._spectrum = spectrum

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            n = self.grid.n_points
            self._values = np.fft.ifft(self._spectrum).real * (n / TWO_PI)
        return self._values

    @property
    def spectrum(self) -> np.ndarray:
        if self._spectrum is None:
            n = self.grid.n_points
            self._spectrum = np.fft.fft(self._values) * (TWO_PI / n)
        return self._spectrum

    @classmethod
    def from_values(cls, grid: TorusGrid, values) -> "GridFunction":
        return cls(grid, values=values)

    @classmethod
    def from_spectrum(cls, grid: TorusGrid, spectrum) -> "GridFunction":
        return cls(grid, spectrum=spectrum)

    @classmethod
    def from_callable(cls, grid: TorusGrid, f) -> "GridFunction":
        return cls(grid, values=f(grid.points))

    @classmethod
    def zero(cls, grid: TorusGrid) -> "GridFunction":
        return cls(grid, values=np.zeros(grid.n_points))

    def __add__(self, other):
        return GridFunction(self.grid, values=self.values + other.values)

    def __sub__(self, other):
        return GridFunction(self.grid, values=self.values - other.values)

    def __mul__(self, scalar):
        return GridFunction(self.grid, values=self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, values=-self.values)


def forward_transform(u: GridFunction) -> np.ndarray:
    """Fourier coefficients of u under the integral convention."""
    return u.spectrum


def inverse_transform(grid: TorusGrid, spectrum) -> GridFunction:
    return GridFunction.from_spectrum(grid, spectrum)


class MultiplierSymbol:
    """x-independent symbol m(k), checked for realness and growth order."""

    def __init__(self, grid: TorusGrid, table, order: float):
        table = np.asarray(table, dtype=complex)
        if table.shape != (grid.n_points,):
            raise ValueError("multiplier table shape mismatch")
        # realness constraint m(-k) = conj(m(k)); Nyquist bin must be real
        idx = (-np.arange(grid.n_points)) % grid.n_points
        mirror = np.conj(table[idx])
        scale = np.max(np.abs(table)) or 1.0
        if np.max(np.abs(table - mirror)) > 1e-12 * scale:
            raise ValueError("multiplier violates realness constraint m(-k) = conj(m(k))")
        if abs(table[grid.nyquist_index].imag) > 1e-12 * scale:
            raise ValueError("multiplier has imaginary Nyquist component")
        self.grid = grid
        self.table = table
        self.order = float(order)
        self.order_constant = float(
            np.max(np.abs(table) / (1.0 + np.abs(grid.freqs)) ** self.order)
        )
        self.table.setflags(write=False)


def apply_multiplier(m: MultiplierSymbol, u: GridFunction) -> GridFunction:
    if m.grid != u.grid:
        raise ValueError("grid mismatch")
    return GridFunction.from_spectrum(u.grid, m.table * u.spectrum)


# ---------------------------------------------------------------------------
# standard multipliers


def _nyquist_zeroed(grid: TorusGrid, table: np.ndarray) -> np.ndarray:
    table = np.array(table, dtype=complex)
    table[grid.nyquist_index] = 0.0
    return table


@lru_cache(maxsize=128)
def derivative_symbol(n_points: int) -> MultiplierSymbol:
    """First derivative: m(k) = i k, Nyquist zeroed."""
    grid = TorusGrid(n_points)
    return MultiplierSymbol(grid, _nyquist_zeroed(grid, 1j * grid.freqs), order=1.0)


@lru_cache(maxsize=128)
def fractional_laplacian_symbol(n_points: int, s: float) -> MultiplierSymbol:
    """|k|^s, the spectral form of (-d^2/dx^2)^(s/2)."""
    grid = TorusGrid(n_points)
    return MultiplierSymbol(grid, np.abs(grid.freqs) ** s + 0j, order=s)


@lru_cache(maxsize=128)
def bessel_symbol(n_points: int, s: float) -> MultiplierSymbol:
    """(1 + k^2)^(s/2), the spectral form of (I - d^2/dx^2)^(s/2)."""
    grid = TorusGrid(n_points)
    return MultiplierSymbol(grid, (1.0 + grid.freqs**2) ** (s / 2.0) + 0j, order=s)


def helmholtz_inverse_symbol(n_points: int) -> MultiplierSymbol:
    return bessel_symbol(n_points, -2.0)


def derivative(u: GridFunction) -> GridFunction:
    return apply_multiplier(derivative_symbol(u.grid.n_points), u)


# ---------------------------------------------------------------------------
# mollifier


def cutoff_profile(y):
    """Smooth cutoff j: 1 on |y|<=1, 0 on |y|>=2, bump transition between."""
    y = np.abs(np.asarray(y, dtype=float))
    out = np.zeros_like(y)
    out[y <= 1.0] = 1.0
    mid = (y > 1.0) & (y < 2.0)
    t = y[mid] - 1.0
    out[mid] = np.exp(1.0 - 1.0 / (1.0 - t**2))
    return out


@lru_cache(maxsize=256)
def mollifier_symbol(n_points: int, n: int) -> MultiplierSymbol:
    if n < 1:
        raise ValueError("mollifier index must be >= 1")
    grid = TorusGrid(n_points)
    return MultiplierSymbol(grid, cutoff_profile(grid.freqs / n) + 0j, order=0.0)


def mollify(n: int, u: GridFunction) -> GridFunction:
    return apply_multiplier(mollifier_symbol(u.grid.n_points, n), u)


# ---------------------------------------------------------------------------
# norms and inner products


def sobolev_inner(s: float, u: GridFunction, v: GridFunction) -> float:
    """<u, v>_{H^s} = sum_k (1+k^2)^s uhat conj(vhat) / (2 pi)."""
    w = (1.0 + u.grid.freqs**2) ** s
    return float(np.sum(w * u.spectrum * np.conj(v.spectrum)).real / TWO_PI)


def sobolev_norm_sq(s: float, u: GridFunction) -> float:
    if s < 0:
        raise ValueError("s must be >= 0")
    w = (1.0 + u.grid.freqs**2) ** s
    return float(np.sum(w * np.abs(u.spectrum) ** 2) / TWO_PI)


def lipschitz_norm(u: GridFunction) -> float:
    """W^{1,inf} norm: grid max of |u| plus grid max of |u_x|."""
    ux = derivative(u)
    return float(np.max(np.abs(u.values)) + np.max(np.abs(ux.values)))


def max_abs_slope(u: GridFunction) -> float:
    return float(np.max(np.abs(derivative(u).values)))


# ---------------------------------------------------------------------------
# random band-limited sampling (shared by the constant estimators and tests)


def random_band_limited(grid: TorusGrid, k_max: int, rng: np.random.Generator) -> GridFunction:
    """Hermitian-symmetrized iid normal coefficients on 1 <= |k| <= k_max."""
    spec = np.zeros(grid.n_points, dtype=complex)
    for k in range(1, k_max + 1):
        c = rng.standard_normal() + 1j * rng.standard_normal()
        spec[k] = c
        spec[-k % grid.n_points] = np.conj(c)
    return GridFunction.from_spectrum(grid, spec)


# ---------------------------------------------------------------------------
# binary snapshot format: magic "SCHG", little-endian u32 N, N float64 values


def write_snapshot(fh, u: GridFunction) -> None:
    fh.write(MAGIC)
    fh.write(struct.pack("<I", u.grid.n_points))
    fh.write(u.values.astype("<f8").tobytes())


def read_snapshot(fh) -> GridFunction:
    magic = fh.read(4)
    if magic != MAGIC:
        raise ValueError(f"bad snapshot magic {magic!r}")
    (n,) = struct.unpack("<I", fh.read(4))
    values = np.frombuffer(fh.read(8 * n), dtype="<f8")
    return GridFunction(TorusGrid(n), values=values.copy())
