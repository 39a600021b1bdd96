"""Time discretization of the stochastic CH equation in Ito form.

Schemes: EulerMaruyama (explicit, with the (1/2) sum Q_k^2 drift
correction), ExponentialEM (diffusion + damping integrated exactly by an
integrating-factor multiplier), and StratonovichHeun (trapezoid on the
deterministic part, iterated midpoint on the Q-channels, no explicit
Q^2 correction).  Blow-up is detected by the two criteria: the
W^{1,inf} threshold and the running integral of max|u_x|.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .dynamics import DriftConfig, deterministic_drift
from .noise import BrownianDriver, ItoNoise, ItoNoiseSpec, q_noise_apply, stratonovich_correction
from .psdo import NoiseChannel, NoiseOperatorSpec
from .spectral import (
    GridFunction,
    TorusGrid,
    derivative,
    lipschitz_norm,
    sobolev_norm_sq,
    write_snapshot,
)

SCHEMES = ("EulerMaruyama", "StratonovichHeun", "ExponentialEM")
HEUN_MIDPOINT_ITERS = 4
CSV_HEADER = ["t", "l2_sq", "h1_sq", "hs_sq", "w1inf", "min_ux", "max_u", "slope_int", "blowup_kind"]


class NumericalFailure(RuntimeError):
    """Overflow/NaN or CFL violation before a blow-up threshold crossing."""


@dataclass
class SchemeConfig:
    scheme: str
    dt: float
    t0: float
    t_end: float
    record_every: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end <= self.t0:
            raise ValueError("t_end must exceed t0")


@dataclass
class BlowupMonitor:
    w1inf_threshold: float = 1e3
    slope_integral_threshold: float = 1e3
    slope_integral: float = 0.0
    t_detect_kind1: Optional[float] = None
    t_detect_kind2: Optional[float] = None

    def __post_init__(self):
        if self.w1inf_threshold <= 0 or self.slope_integral_threshold <= 0:
            raise ValueError("thresholds must be positive")

    def update(self, u: GridFunction, t: float, dt: float) -> Optional[int]:
        """Advance the slope integral and test both criteria at time t."""
        ux = derivative(u).values
        max_slope = float(np.max(np.abs(ux)))
        self.slope_integral += dt * max_slope
        w1inf = float(np.max(np.abs(u.values))) + max_slope
        fired = 0
        if self.t_detect_kind1 is None and w1inf >= self.w1inf_threshold:
            self.t_detect_kind1 = t
            fired |= 1
        if self.t_detect_kind2 is None and self.slope_integral >= self.slope_integral_threshold:
            self.t_detect_kind2 = t
            fired |= 2
        return fired or None

    @property
    def blowup_kind(self) -> int:
        """0 none, 1 kind-1 only, 2 kind-2 only, 3 both."""
        return (1 if self.t_detect_kind1 is not None else 0) | (
            2 if self.t_detect_kind2 is not None else 0
        )


@dataclass
class SimConfig:
    """One trajectory: grid, drift, noise banks, scheme, monitors, seed."""

    n_points: int
    drift: DriftConfig
    scheme: SchemeConfig
    q_bank: Sequence[NoiseOperatorSpec] = ()
    ito_spec: Optional[ItoNoiseSpec] = None
    seed: int = 0
    path_index: int = 0
    diagnostic_s: float = 2.0
    monitor: Optional[BlowupMonitor] = None
    include_nonlinear: bool = True
    mollify_n: Optional[int] = None
    cfl_limit: float = 0.5
    adaptive_halving: bool = False
    time_origin: float = 0.0
    record_snapshots: bool = False

    def make_driver(self) -> BrownianDriver:
        q_channels = len(self.q_bank)
        ito_channels = self.ito_spec.bind(TorusGrid(self.n_points)).channels if self.ito_spec else 0
        return BrownianDriver(self.seed, q_channels + ito_channels, self.scheme.dt, self.path_index)


@dataclass
class Trajectory:
    times: np.ndarray
    diagnostics: dict
    blowup: Optional[dict]
    snapshots: Optional[list] = None
    failure: Optional[str] = None
    final_state: Optional[GridFunction] = None

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        kind = self.blowup["kind"] if self.blowup else 0
        d = self.diagnostics
        for i, t in enumerate(self.times):
            writer.writerow(
                [f"{t:.10g}"]
                + [f"{d[c][i]:.12g}" for c in CSV_HEADER[1:-1]]
                + [kind if i == len(self.times) - 1 else 0]
            )

    def write_snapshots(self, fh) -> None:
        for snap in self.snapshots or ():
            write_snapshot(fh, snap)


class _StepKernel:
    """Per-run bound state: channels, noise, scheme closures."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.grid = TorusGrid(cfg.n_points)
        self.channels = [spec.bind(self.grid) for spec in cfg.q_bank]
        self.ito = cfg.ito_spec.bind(self.grid) if cfg.ito_spec else None
        self.n_q = len(self.channels)
        # dense channel matrices let the Heun corrector solve its (linear)
        # midpoint equation exactly; the fixed-point fallback above this
        # size diverges on Brownian tail events when |dW| k / 2 > 1
        self._dense_q = (
            [ch.dense() for ch in self.channels]
            if self.channels and cfg.n_points <= 1024
            else None
        )

    def drift(self, t: float, u: GridFunction) -> GridFunction:
        return deterministic_drift(self.cfg.drift, t, u, self.cfg.include_nonlinear)

    def _ito_part(self, t, u, dw):
        if self.ito is None:
            return None
        return self.ito.apply_sum(t, u, dw[self.n_q :])

    def step(self, t: float, u: GridFunction, dw: np.ndarray) -> GridFunction:
        scheme = self.cfg.scheme.scheme
        dt = self.cfg.scheme.dt
        if scheme == "EulerMaruyama":
            out = u + dt * self.drift(t, u)
            if self.channels:
                out = out + dt * stratonovich_correction(self.channels, u)
                out = out + q_noise_apply(self.channels, u, dw[: self.n_q])
            ito = self._ito_part(t, u, dw)
            return out + ito if ito is not None else out

        if scheme == "ExponentialEM":
            lam = self.cfg.drift.damping.value(t)
            k = self.grid.freqs
            env = np.exp(-dt * (self.cfg.drift.epsilon * np.abs(k) ** (2.0 * self.cfg.drift.theta) + lam))
            nl = deterministic_drift(
                replace(self.cfg.drift, epsilon=0.0,
                        damping=_ZERO_DAMPING), t, u, self.cfg.include_nonlinear)
            out = u + dt * nl
            if self.channels:
                out = out + dt * stratonovich_correction(self.channels, u)
                out = out + q_noise_apply(self.channels, u, dw[: self.n_q])
            ito = self._ito_part(t, u, dw)
            if ito is not None:
                out = out + ito
            return GridFunction.from_spectrum(self.grid, env * out.spectrum)

        # StratonovichHeun: trapezoid on the drift, implicit midpoint on the
        # Q-channels (conserves quadratic invariants of skew banks; no
        # explicit Q^2 correction), Ito channels as EM
        dwq = dw[: self.n_q]
        ito = self._ito_part(t, u, dw)
        f0 = self.drift(t, u)
        pred = u + dt * f0
        if self.channels:
            pred = pred + q_noise_apply(self.channels, u, dwq)
        if ito is not None:
            pred = pred + ito
        f1 = self.drift(t + dt, pred)
        det = u + (0.5 * dt) * (f0 + f1)
        if not self.channels:
            return det + ito if ito is not None else det
        if self._dense_q is not None:
            # midpoint equation (I - B) out = det + B u + ito with
            # B = (1/2) sum_k dW_k Q_k, solved exactly at grid scale
            b = sum(0.5 * w * m for w, m in zip(dwq, self._dense_q))
            rhs = det.values + b @ u.values
            if ito is not None:
                rhs = rhs + ito.values
            out_vals = np.linalg.solve(np.eye(self.grid.n_points) - b, rhs)
            return GridFunction(self.grid, values=out_vals)
        out = pred
        for _ in range(HEUN_MIDPOINT_ITERS):
            mid = 0.5 * (u + out)
            out = det + q_noise_apply(self.channels, mid, dwq)
            if ito is not None:
                out = out + ito
        return out


_ZERO_DAMPING = None  # initialized below to avoid an import cycle at class body


def _init_zero_damping():
    global _ZERO_DAMPING
    from .dynamics import DampingProfile

    _ZERO_DAMPING = DampingProfile("constant", lambda0=0.0)


_init_zero_damping()


def step(cfg: SimConfig, state: GridFunction, t: float, dw: np.ndarray) -> GridFunction:
    """One step of the configured scheme (module-level convenience)."""
    return _StepKernel(cfg).step(t, state, dw)


def run(cfg: SimConfig, u0: GridFunction) -> Trajectory:
    """Integrate from t0 to t_end or to blow-up detection."""
    kernel = _StepKernel(cfg)
    sc = cfg.scheme
    driver = cfg.make_driver()
    monitor = cfg.monitor or BlowupMonitor()
    u = u0
    if cfg.mollify_n is not None:
        from .spectral import mollify

        u = mollify(cfg.mollify_n, u)

    n_steps = int(round((sc.t_end - sc.t0) / sc.dt))
    times, rows = [], {c: [] for c in CSV_HEADER[1:-1]}
    snapshots = [] if cfg.record_snapshots else None
    failure = None
    blowup = None

    def record(t, u):
        ux = derivative(u).values
        times.append(t)
        rows["l2_sq"].append(sobolev_norm_sq(0.0, u))
        rows["h1_sq"].append(sobolev_norm_sq(1.0, u))
        rows["hs_sq"].append(sobolev_norm_sq(cfg.diagnostic_s, u))
        rows["w1inf"].append(lipschitz_norm(u))
        rows["min_ux"].append(float(ux.min()))
        rows["max_u"].append(float(u.values.max()))
        rows["slope_int"].append(monitor.slope_integral)
        if snapshots is not None:
            snapshots.append(u)

    record(sc.t0, u)
    step_offset = int(round((sc.t0 - cfg.time_origin) / sc.dt))
    halt = False
    for i in range(n_steps):
        t = sc.t0 + i * sc.dt
        max_slope = float(np.max(np.abs(derivative(u).values)))
        if sc.dt * max_slope > cfg.cfl_limit:
            if cfg.adaptive_halving:
                u = _substep(kernel, driver, u, t, step_offset + i, cfg)
            else:
                failure = f"CFL violation at t={t:.6g}: dt*max|u_x|={sc.dt * max_slope:.3g}"
                break
        else:
            dw = driver.sample_increments(step_offset + i)
            u = kernel.step(t, u, dw)
        t_next = t + sc.dt
        if not np.all(np.isfinite(u.values)):
            failure = f"non-finite state at t={t_next:.6g}"
            break
        fired = monitor.update(u, t_next, sc.dt)
        kind1 = monitor.t_detect_kind1 is not None
        kind2 = monitor.t_detect_kind2 is not None
        stop_now = kind1 or (kind2 and not np.isfinite(monitor.w1inf_threshold))
        if (i + 1) % sc.record_every == 0 or i == n_steps - 1 or stop_now:
            record(t_next, u)
        if stop_now:
            halt = True
            break

    if monitor.blowup_kind:
        blowup = {
            "kind": monitor.blowup_kind,
            "t_detect_kind1": monitor.t_detect_kind1,
            "t_detect_kind2": monitor.t_detect_kind2,
        }
    return Trajectory(
        times=np.asarray(times),
        diagnostics={c: np.asarray(v) for c, v in rows.items()},
        blowup=blowup,
        snapshots=snapshots,
        failure=failure,
        final_state=u if failure is None else None,
    )


def _substep(kernel, driver, u, t, abs_step, cfg):
    """Adaptive halving within one macro step: the Brownian increment for
    the macro step is split into two half-step increments derived from a
    sub-keyed stream so the macro-scale path stays reproducible."""
    dw = driver.sample_increments(abs_step)
    half = replace(cfg.scheme, dt=cfg.scheme.dt / 2.0)
    sub = _StepKernel(replace(cfg, scheme=half))
    bits = np.random.Philox(key=[driver.root_seed ^ 0x5C5C5C5C, driver.path_index],
                            counter=[0, 0, 0, _abs(abs_step)])
    rng = np.random.Generator(bits)
    z = rng.standard_normal(len(dw)) * np.sqrt(cfg.scheme.dt / 4.0)
    dw1 = dw / 2.0 + z
    dw2 = dw / 2.0 - z
    u = sub.step(t, u, dw1)
    return sub.step(t + half.dt, u, dw2)


def _abs(step: int) -> int:
    from .noise import _STEP_BIAS

    return _STEP_BIAS + int(step)


def detect_blowup(monitor: BlowupMonitor, u: GridFunction, t: float, dt: float):
    """Spec-surface alias for the monitor update."""
    return monitor.update(u, t, dt)
