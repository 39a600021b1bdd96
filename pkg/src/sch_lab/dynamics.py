"""Deterministic Camassa-Holm vector field and its structural identities.

The evolution is written as du/dt = -[eps*Lambda^{2theta} u + lambda(t) u
+ u u_x + F(u)] with the nonlocal term

    F(u) = d/dx (I - d^2/dx^2)^{-1} (u^2 + u_x^2 / 2).

Pointwise products are 2/3-rule dealiased by default; the H^1 pairing
identity <u u_x + F(u), u>_{H^1} = 0 then holds at grid scale and is
exposed as a test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .spectral import (
    TWO_PI,
    GridFunction,
    TorusGrid,
    mollifier_symbol,
    random_band_limited,
    sobolev_inner,
    sobolev_norm_sq,
    lipschitz_norm,
)


# ---------------------------------------------------------------------------
# damping profiles lambda(t) >= 0


class DampingProfile:
    """Named nonnegative damping schedules with numeric time integrals."""

    def __init__(self, name: str, **params):
        self.name = name
        self.params = params
        if name == "constant":
            lam0 = float(params["lambda0"])
            if lam0 < 0:
                raise ValueError("lambda0 must be >= 0")
        elif name == "piecewise":
            times = np.asarray(params["times"], dtype=float)
            values = np.asarray(params["values"], dtype=float)
            if len(values) != len(times) + 1 or np.any(values < 0):
                raise ValueError("piecewise profile needs len(values) == len(times)+1, all >= 0")
            self._times, self._values = times, values
        elif name == "sin_plus":
            if float(params["lambda0"]) < 0:
                raise ValueError("lambda0 must be >= 0")
        elif name == "integrable_tail":
            if float(params.get("p", 2.0)) <= 1:
                raise ValueError("integrable tail requires p > 1")
        else:
            raise ValueError(f"unknown damping profile {name!r}")

    def value(self, t: float) -> float:
        if self.name == "constant":
            return float(self.params["lambda0"])
        if self.name == "piecewise":
            return float(self._values[np.searchsorted(self._times, t, side="right")])
        if self.name == "sin_plus":
            lam0 = float(self.params["lambda0"])
            om = float(self.params.get("omega", 1.0))
            return lam0 * max(1.0 + np.sin(om * t), 0.0)
        lam0 = float(self.params["lambda0"])
        p = float(self.params.get("p", 2.0))
        return lam0 / (1.0 + abs(t)) ** p

    def integral(self, t0: float, t1: float, n_quad: int = 4096) -> float:
        """int_{t0}^{t1} lambda; analytic for the constant profile."""
        if self.name == "constant":
            return float(self.params["lambda0"]) * (t1 - t0)
        tt = np.linspace(t0, t1, n_quad + 1)
        vv = np.array([self.value(t) for t in tt])
        return float(np.trapezoid(vv, tt))

    def to_dict(self) -> dict:
        return {"name": self.name, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "DampingProfile":
        d = dict(d)
        return cls(d.pop("name"), **d)


@dataclass(frozen=True)
class DriftConfig:
    epsilon: float
    theta: float
    damping: DampingProfile
    dealias: bool = True

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must lie in (0, 1]")


# ---------------------------------------------------------------------------
# spectral helpers (raw-spectrum fast paths used by the integrator)


@lru_cache(maxsize=64)
def _tables(n_points: int):
    grid = TorusGrid(n_points)
    k = grid.freqs
    ik = 1j * k
    ik[grid.nyquist_index] = 0.0
    helm_dx = ik / (1.0 + k**2)      # d/dx (I - d^2/dx^2)^{-1}
    cut = int(np.floor(n_points / 3.0))
    dealias_mask = (np.abs(k) <= cut).astype(float)
    for a in (ik, helm_dx, dealias_mask):
        a.setflags(write=False)
    return ik, helm_dx, dealias_mask


def nonlocal_F_spectrum(spec: np.ndarray, dealias: bool = True) -> np.ndarray:
    """Spectrum-in, spectrum-out form of F(u)."""
    n = spec.shape[0]
    ik, helm_dx, mask = _tables(n)
    s = spec * mask if dealias else spec
    u = np.fft.ifft(s).real * (n / TWO_PI)
    ux = np.fft.ifft(ik * s).real * (n / TWO_PI)
    q = np.fft.fft(u * u + 0.5 * ux * ux) * (TWO_PI / n)
    if dealias:
        q = q * mask
    return helm_dx * q


def convection_spectrum(spec: np.ndarray, dealias: bool = True) -> np.ndarray:
    """Spectrum of u u_x with spectral derivative."""
    n = spec.shape[0]
    ik, _, mask = _tables(n)
    s = spec * mask if dealias else spec
    u = np.fft.ifft(s).real * (n / TWO_PI)
    ux = np.fft.ifft(ik * s).real * (n / TWO_PI)
    q = np.fft.fft(u * ux) * (TWO_PI / n)
    return q * mask if dealias else q


def nonlocal_F(u: GridFunction, dealias: bool = True) -> GridFunction:
    return GridFunction.from_spectrum(u.grid, nonlocal_F_spectrum(u.spectrum, dealias))


def convection(u: GridFunction, dealias: bool = True) -> GridFunction:
    return GridFunction.from_spectrum(u.grid, convection_spectrum(u.spectrum, dealias))


def deterministic_drift(cfg: DriftConfig, t: float, u: GridFunction,
                        include_nonlinear: bool = True) -> GridFunction:
    """du/dt contribution: -[eps Lambda^{2theta} u + lambda(t) u + u u_x + F(u)]."""
    spec = u.spectrum
    k = u.grid.freqs
    out = -(cfg.epsilon * np.abs(k) ** (2.0 * cfg.theta) + cfg.damping.value(t)) * spec
    if include_nonlinear:
        out = out - convection_spectrum(spec, cfg.dealias) - nonlocal_F_spectrum(spec, cfg.dealias)
    return GridFunction.from_spectrum(u.grid, out)


def h1_pairing_residual(u: GridFunction, dealias: bool = True) -> float:
    """<u u_x + F(u), u>_{H^1}; zero to round-off for dealiased band-limited u."""
    w = convection(u, dealias) + nonlocal_F(u, dealias)
    return sobolev_inner(1.0, w, u)


def estimate_Theta(
    s: float,
    n_samples: int,
    seed: int,
    grid: TorusGrid,
    k_max: Optional[int] = None,
    mollifier_levels=(4, 16, None),
) -> float:
    """Working bound for |<J_n(u u_x), J_n u>| + |<J_n F(u), J_n u>| in H^s,
    relative to ||u||_{W^{1,inf}} ||u||^2_{H^s}, maximized over samples and
    mollifier levels (None = no mollification)."""
    if s <= 1.5:
        raise ValueError("estimate_Theta requires s > 3/2")
    k_max = k_max or grid.n_points // 4
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        u = random_band_limited(grid, k_max, rng)
        denom = lipschitz_norm(u) * sobolev_norm_sq(s, u)
        if denom <= 0.0:
            continue
        uux = convection(u)
        fu = nonlocal_F(u)
        for n in mollifier_levels:
            if n is None:
                ju, juux, jfu = u, uux, fu
            else:
                m = mollifier_symbol(grid.n_points, n).table
                ju = GridFunction.from_spectrum(grid, m * u.spectrum)
                juux = GridFunction.from_spectrum(grid, m * uux.spectrum)
                jfu = GridFunction.from_spectrum(grid, m * fu.spectrum)
            num = abs(sobolev_inner(s, juux, ju)) + abs(sobolev_inner(s, jfu, ju))
            worst = max(worst, num / denom)
    return worst
