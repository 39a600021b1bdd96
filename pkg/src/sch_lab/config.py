"""Run-configuration parsing and validation.

Configs are strict JSON: all physics parameters explicit, no silent
defaults.  Validation derives the noise smoothness parameter gamma0 from
the declared channel orders and enforces the regularity threshold

    s > 3/2 + max{2*gamma0, 1, 2*theta*[epsilon > 0]}

for the configured diagnostic s, plus the sigma window for the measure
and stability experiments.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

from .dynamics import DampingProfile, DriftConfig
from .integrate import BlowupMonitor, SchemeConfig, SimConfig
from .noise import ItoNoiseSpec
from .psdo import NoiseOperatorSpec


class ConfigError(ValueError):
    """Carries the full list of validation failures."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def gamma0(q_bank) -> float:
    """Largest declared channel order among active A- and B-channels."""
    alpha = max((c.alpha_or_beta for c in q_bank if c.kind == "A_family"), default=0.0)
    beta = max((c.alpha_or_beta for c in q_bank if c.kind == "B_family"), default=0.0)
    return max(alpha, beta)


def s_threshold(q_bank, epsilon: float, theta: float) -> float:
    g0 = gamma0(q_bank)
    return 1.5 + max(2.0 * g0, 1.0, 2.0 * theta if epsilon > 0 else 0.0)


def load_bank(channels) -> tuple:
    """Channel list from the symbol-bank description (list of dicts)."""
    out = []
    for ch in channels:
        out.append(
            NoiseOperatorSpec(
                kind=ch["kind"],
                coefficient=tuple(ch["coefficient"]) if isinstance(ch["coefficient"], list)
                else (float(ch["coefficient"]),),
                base_name=ch["base"],
                base_params=tuple(sorted(ch.get("base_params", {}).items())),
                alpha_or_beta=float(ch["order"]),
            )
        )
    return tuple(out)


@dataclass
class RunConfig:
    sim: SimConfig
    experiment: str
    experiment_params: dict
    output_dir: str
    raw: dict
    sigma: Optional[float] = None

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True).encode()
        ).hexdigest()[:16]


EXPERIMENTS = (
    "simulate",
    "ensemble",
    "decay",
    "lyapunov",
    "stability",
    "measure",
    "estimate-constants",
    "blowup-scan",
)


def validate(text: str) -> RunConfig:
    """Parse and validate; raises ConfigError with every violation listed."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"malformed JSON: {exc}"])

    errors = []

    def need(block, key, typ=None):
        if key not in block:
            errors.append(f"missing field {key!r}")
            return None
        return block[key]

    grid = raw.get("grid", {})
    drift = raw.get("drift", {})
    noise = raw.get("noise", {})
    scheme = raw.get("scheme", {})
    experiment = raw.get("experiment", {})
    for name, blk in (("grid", grid), ("drift", drift), ("scheme", scheme),
                      ("experiment", experiment)):
        if not isinstance(blk, dict):
            errors.append(f"block {name!r} must be an object")
            return _fail(errors)

    n = grid.get("N")
    if not isinstance(n, int) or n < 8 or n % 2:
        errors.append(f"grid.N must be an even integer >= 8, got {n!r}")
    dealias = grid.get("dealias", True)

    eps = drift.get("epsilon")
    theta = drift.get("theta")
    if eps is None or eps < 0:
        errors.append(f"drift.epsilon must be >= 0, got {eps!r}")
    if theta is None or not (0.0 < theta <= 1.0):
        errors.append(f"drift.theta must lie in (0, 1], got {theta!r}")
    lam = None
    try:
        lam = DampingProfile.from_dict(drift.get("damping", {}))
    except (KeyError, ValueError, TypeError) as exc:
        errors.append(f"drift.damping invalid: {exc}")

    bank = ()
    try:
        bank = load_bank(noise.get("q_bank", []))
    except (KeyError, ValueError, TypeError) as exc:
        errors.append(f"noise.q_bank invalid: {exc}")
    ito = None
    if noise.get("h_family"):
        try:
            ito = ItoNoiseSpec(
                family=noise["h_family"],
                channels=int(noise.get("K_max", 0)),
                q0=float(noise.get("q0", 1.0)),
                psi_const=noise.get("psi_const"),
                c_psi=noise.get("c_psi"),
                theta_hat=noise.get("theta_hat"),
                reference_seed=int(noise.get("reference_seed", 0)),
                band_width=float(noise.get("band_width", 1.0)),
            )
        except (KeyError, ValueError, TypeError) as exc:
            errors.append(f"noise.h block invalid: {exc}")
    seed = noise.get("seed", raw.get("seed"))
    if seed is None:
        errors.append("missing noise.seed")

    scheme_cfg = None
    try:
        scheme_cfg = SchemeConfig(
            scheme=scheme.get("scheme", ""),
            dt=float(scheme.get("dt", 0.0)),
            t0=float(scheme.get("t0", 0.0)),
            t_end=float(scheme.get("t_end", 0.0)),
            record_every=int(scheme.get("record_every", 1)),
        )
    except (ValueError, TypeError) as exc:
        errors.append(f"scheme block invalid: {exc}")

    s = raw.get("diagnostic_s")
    if s is None:
        errors.append("missing diagnostic_s")
    elif eps is not None and theta is not None and not errors:
        thr = s_threshold(bank, eps, theta)
        if s <= thr:
            errors.append(
                f"diagnostic_s={s} violates the regularity threshold s > {thr} "
                f"(gamma0={gamma0(bank)})"
            )

    kind = experiment.get("kind")
    if kind not in EXPERIMENTS:
        errors.append(f"experiment.kind must be one of {EXPERIMENTS}, got {kind!r}")

    sigma = raw.get("sigma")
    if kind in ("stability", "measure"):
        if sigma is None:
            errors.append(f"experiment {kind!r} requires sigma")
        elif s is not None and eps is not None:
            lo = 1.5
            hi = s - max(2.0 * gamma0(bank), 1.0, 2.0 * theta if eps > 0 else 0.0)
            if not (lo < sigma < hi):
                errors.append(f"sigma={sigma} outside the admissible window ({lo}, {hi})")

    if errors:
        return _fail(errors)

    monitor_blk = raw.get("monitor", {})
    monitor = BlowupMonitor(
        w1inf_threshold=float(monitor_blk.get("w1inf_threshold", 1e3)),
        slope_integral_threshold=float(monitor_blk.get("slope_integral_threshold", 1e3)),
    )
    sim = SimConfig(
        n_points=n,
        drift=DriftConfig(epsilon=eps, theta=theta, damping=lam, dealias=dealias),
        scheme=scheme_cfg,
        q_bank=bank,
        ito_spec=ito,
        seed=int(seed),
        diagnostic_s=float(s),
        monitor=monitor,
        include_nonlinear=bool(raw.get("include_nonlinear", True)),
        time_origin=float(raw.get("time_origin", 0.0)),
    )
    return RunConfig(
        sim=sim,
        experiment=kind,
        experiment_params={k: v for k, v in experiment.items() if k != "kind"},
        output_dir=raw.get("output_dir", "out"),
        raw=raw,
        sigma=sigma,
    )


def _fail(errors):
    raise ConfigError(errors)
