"""Brownian drivers and the two noise families.

The Stratonovich channel bank contributes the Ito-form drift correction
(1/2) sum_k Q_k^2 u plus the martingale term sum_k Q_k u dW_k; the
nonlinear Ito channels contribute sum_k h_k(t, u) dW~_k.  Increments are
generated counter-based (Philox keyed by seed and path, counter carrying
the absolute step index) so paths are reproducible independent of
evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .psdo import NoiseChannel, NoiseOperatorSpec
from .spectral import (
    TWO_PI,
    GridFunction,
    TorusGrid,
    bessel_symbol,
    derivative_symbol,
    lipschitz_norm,
    sobolev_inner,
    sobolev_norm_sq,
)

# keeps Philox counter words unsigned for negative absolute step indices
_STEP_BIAS = 1 << 62


class BrownianDriver:
    """Counter-based N(0, dt) increment streams for channel_count channels."""

    def __init__(self, root_seed: int, channel_count: int, dt: float, path_index: int = 0):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.root_seed = int(root_seed)
        self.channel_count = int(channel_count)
        self.dt = float(dt)
        self.path_index = int(path_index)
        self._scale = np.sqrt(self.dt)

    def sample_increments(self, step: int) -> np.ndarray:
        bits = np.random.Philox(
            key=[self.root_seed, self.path_index],
            counter=[0, 0, 0, _STEP_BIAS + int(step)],
        )
        rng = np.random.Generator(bits)
        return rng.standard_normal(self.channel_count) * self._scale


def stratonovich_correction(channels: Sequence[NoiseChannel], u: GridFunction) -> GridFunction:
    """(1/2) sum_k Q_k (Q_k u)."""
    if not channels:
        return GridFunction.zero(u.grid)
    acc = np.zeros(u.grid.n_points)
    for ch in channels:
        acc = acc + ch.apply_twice(u).values
    return GridFunction(u.grid, values=0.5 * acc)


def q_noise_apply(channels: Sequence[NoiseChannel], u: GridFunction, dw: np.ndarray) -> GridFunction:
    """sum_k Q_k u * dW_k."""
    acc = np.zeros(u.grid.n_points)
    for ch, w in zip(channels, dw):
        acc = acc + w * ch.apply(u).values
    return GridFunction(u.grid, values=acc)


# ---------------------------------------------------------------------------
# nonlinear Ito channels h_k(t, u)


@dataclass(frozen=True)
class ItoNoiseSpec:
    """Shipped h_k families.

    zero                -- no Ito noise.
    smoothing_quadratic -- h_k = 2^{-k} q0 R[u^2 + u_x^2], with R the
                           order -1 multiplier (1+k^2)^{-1/2}.
    band_projection     -- h_k = Psi(||u||_{W^{1,inf}}) * (band-pass of u to
                           (k-1) band_width < |xi| <= k band_width); Psi is
                           either the constant psi_const or
                           sqrt(c_psi + 4*theta_hat*x).  A single channel
                           with band_width >= n/2 gives h = Psi(.) u.
    band_additive       -- h_k = psi_const * (band-pass of a fixed reference
                           field); the linear test hook with per-mode
                           Ornstein-Uhlenbeck statistics.
    """

    family: str
    channels: int = 0
    q0: float = 1.0
    psi_const: Optional[float] = None
    c_psi: Optional[float] = None
    theta_hat: Optional[float] = None
    reference_seed: int = 0
    band_width: float = 1.0

    def __post_init__(self):
        if self.family not in ("zero", "smoothing_quadratic", "band_projection", "band_additive"):
            raise ValueError(f"unknown Ito noise family {self.family!r}")
        if self.family in ("band_projection", "band_additive"):
            if self.psi_const is None and (self.c_psi is None or self.theta_hat is None):
                raise ValueError("band family needs psi_const or (c_psi, theta_hat)")
        if self.band_width <= 0:
            raise ValueError("band_width must be positive")

    def bind(self, grid: TorusGrid) -> "ItoNoise":
        return ItoNoise(self, grid)


class ItoNoise:
    """An ItoNoiseSpec bound to a grid."""

    def __init__(self, spec: ItoNoiseSpec, grid: TorusGrid):
        self.spec = spec
        self.grid = grid
        self.channels = int(spec.channels)
        if spec.family in ("band_projection", "band_additive"):
            cap = int(np.ceil((grid.n_points // 2) / spec.band_width))
            self.channels = min(self.channels, cap) if self.channels else min(cap, 32)
            # band index per frequency bin: band k covers
            # (k-1) w < |xi| <= k w; the zero mode joins band 1 so that a
            # single wide band acts as h = Psi(.) u on the whole state
            band = np.ceil(np.abs(grid.freqs) / spec.band_width).astype(int)
            band[grid.freqs == 0] = 1
            self._band = band
            self._band_mask = (band >= 1) & (band <= self.channels)
        if spec.family == "smoothing_quadratic":
            self.channels = self.channels or 16
            self._weights = 2.0 ** (-np.arange(1, self.channels + 1))
            self._smooth = bessel_symbol(grid.n_points, -1.0).table
        if spec.family == "band_additive":
            rng = np.random.default_rng(spec.reference_seed)
            from .spectral import random_band_limited

            ref_k = min(int(np.ceil(self.channels * spec.band_width)), grid.n_points // 2 - 1)
            self._reference = random_band_limited(grid, ref_k, rng)

    # -- Psi ----------------------------------------------------------------
    def _psi(self, u: GridFunction) -> float:
        if self.spec.psi_const is not None:
            return float(self.spec.psi_const)
        x = lipschitz_norm(u)
        return float(np.sqrt(self.spec.c_psi + 4.0 * self.spec.theta_hat * x))

    # -- per-family shapes ---------------------------------------------------
    def _quadratic_core(self, u: GridFunction) -> np.ndarray:
        ik = derivative_symbol(self.grid.n_points).table
        n = self.grid.n_points
        s = u.spectrum
        uu = u.values
        ux = np.fft.ifft(ik * s).real * (n / TWO_PI)
        q = np.fft.fft(uu * uu + ux * ux) * (TWO_PI / n)
        return self._smooth * q

    def apply_sum(self, t: float, u: GridFunction, dw: np.ndarray) -> GridFunction:
        """sum_k h_k(t, u) dW~_k for the supplied increment vector."""
        fam = self.spec.family
        if fam == "zero" or self.channels == 0:
            return GridFunction.zero(u.grid)
        if len(dw) < self.channels:
            raise ValueError("increment vector shorter than channel count")
        if fam == "smoothing_quadratic":
            core = self._quadratic_core(u)
            coef = self.spec.q0 * float(np.dot(self._weights, dw[: self.channels]))
            return GridFunction.from_spectrum(u.grid, coef * core)
        # band families: one spectral pass with per-band increment weights
        weights = np.where(self._band_mask, np.take(dw, self._band - 1, mode="clip"), 0.0)
        if fam == "band_projection":
            return GridFunction.from_spectrum(u.grid, self._psi(u) * weights * u.spectrum)
        ref = self._reference.spectrum
        return GridFunction.from_spectrum(u.grid, float(self.spec.psi_const) * weights * ref)

    def sq_norm_sum(self, t: float, u: GridFunction, s: float) -> float:
        """sum_k ||h_k(t, u)||^2_{H^s}."""
        fam = self.spec.family
        if fam == "zero" or self.channels == 0:
            return 0.0
        if fam == "smoothing_quadratic":
            core = GridFunction.from_spectrum(u.grid, self._quadratic_core(u))
            return float(self.spec.q0**2 * np.sum(self._weights**2) * sobolev_norm_sq(s, core))
        w = (1.0 + u.grid.freqs**2) ** s
        if fam == "band_projection":
            amp, spec = self._psi(u), u.spectrum
        else:
            amp, spec = float(self.spec.psi_const), self._reference.spectrum
        density = w * np.abs(spec) ** 2 / TWO_PI
        return float(amp**2 * np.sum(density[self._band_mask]))

    def inner_sq_sum(self, t: float, u: GridFunction, s: float) -> float:
        """sum_k <h_k(t, u), u>^2_{H^s}."""
        fam = self.spec.family
        if fam == "zero" or self.channels == 0:
            return 0.0
        if fam == "smoothing_quadratic":
            core = GridFunction.from_spectrum(u.grid, self._quadratic_core(u))
            ip = sobolev_inner(s, core, u)
            return float(self.spec.q0**2 * np.sum(self._weights**2) * ip**2)
        w = (1.0 + u.grid.freqs**2) ** s
        if fam == "band_projection":
            amp, spec = self._psi(u), u.spectrum
        else:
            amp, spec = float(self.spec.psi_const), self._reference.spectrum
        density = (w * spec * np.conj(u.spectrum)).real / TWO_PI
        total = 0.0
        for k in range(1, self.channels + 1):
            total += float(np.sum(density[self._band == k])) ** 2
        return amp**2 * total


# ---------------------------------------------------------------------------
# Lyapunov condition checker


def lyapunov_V(x: float) -> float:
    return float(np.log(np.e + x))


def _V_prime(x: float) -> float:
    return 1.0 / (np.e + x)


def _V_second(x: float) -> float:
    return -1.0 / (np.e + x) ** 2


def check_lyapunov_condition(
    spec: ItoNoiseSpec,
    bank: Sequence[NoiseOperatorSpec],
    damping,
    g,
    sample_set,
    s: float,
    Xi: float,
    Theta: float,
    V: str = "log",
    times=(0.0,),
) -> dict:
    """Evaluates the drift-domination condition for V(x) = log(e + x).

    For every (t, u) computes

        LHS = V'(E)[(Xi + 2 Theta ||u||_{W^{1,inf}}) E - 2 lambda(t) E
              + sum ||h_k||^2] + 2 V''(E) sum <h_k, u>^2,   E = ||u||^2_{H^s},

    and reports max over samples of LHS - g(t) V(E); the condition holds
    when the max is <= 0.
    """
    if V != "log":
        raise ValueError(f"unsupported Lyapunov family {V!r}")
    margins = []
    for u in sample_set:
        noise = spec.bind(u.grid)
        e = sobolev_norm_sq(s, u)
        w1 = lipschitz_norm(u)
        for t in times:
            lhs = _V_prime(e) * (
                (Xi + 2.0 * Theta * w1) * e
                - 2.0 * damping.value(t) * e
                + noise.sq_norm_sum(t, u, s)
            ) + 2.0 * _V_second(e) * noise.inner_sq_sum(t, u, s)
            margins.append(lhs - g(t) * lyapunov_V(e))
    margins = np.asarray(margins)
    return {
        "max_margin": float(margins.max()),
        "holds": bool(margins.max() <= 0.0),
        "n_samples": len(margins),
        "margins": margins,
    }
