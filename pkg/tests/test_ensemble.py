"""Ensemble statistics: energy distance, decay/Lyapunov envelopes,
coupled stability, measure construction plumbing."""

import numpy as np
import pytest

from sch_lab.dynamics import DampingProfile, DriftConfig
from sch_lab.ensemble import (
    EnsembleConfig,
    decay_experiment,
    deterministic_decay_check,
    energy_distance,
    lyapunov_experiment,
    measure_experiment,
    propagator_composition_check,
    stability_experiment,
    summary_vector,
)
from sch_lab.integrate import BlowupMonitor, SchemeConfig, SimConfig
from sch_lab.noise import ItoNoiseSpec
from sch_lab.psdo import NoiseOperatorSpec
from sch_lab.spectral import GridFunction, TorusGrid, sobolev_norm_sq


def base_sim(n=32, scheme="StratonovichHeun", dt=2e-3, t_end=0.5, eps=0.0,
             lam0=0.0, **kw):
    return SimConfig(
        n_points=n,
        drift=DriftConfig(epsilon=eps, theta=0.75,
                          damping=DampingProfile("constant", lambda0=lam0)),
        scheme=SchemeConfig(scheme=scheme, dt=dt, t0=0.0, t_end=t_end,
                            record_every=50),
        monitor=BlowupMonitor(),
        **kw,
    )


def sine(n, amp=0.25):
    grid = TorusGrid(n)
    return GridFunction.from_callable(grid, lambda x: amp * np.sin(x))


class TestEnergyDistance:
    def test_identical_clouds(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((50, 4))
        d, se = energy_distance(a, a)
        assert abs(d) < 1e-12

    def test_point_masses(self):
        a = np.zeros((10, 2))
        b = np.zeros((10, 2))
        b[:, 0] = 3.0
        d, _ = energy_distance(a, b)
        assert abs(d - 6.0) < 1e-12

    def test_same_distribution_calibration(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((500, 1))
        b = rng.standard_normal((500, 1))
        d, se = energy_distance(a, b, seed=2)
        assert d <= 3.0 * se

    def test_validation(self):
        with pytest.raises(ValueError):
            energy_distance(np.zeros((0, 2)), np.zeros((3, 2)))
        with pytest.raises(ValueError):
            energy_distance(np.zeros((3, 2)), np.zeros((3, 3)))


class TestSummaryVector:
    def test_known_field(self):
        u = sine(64, amp=1.0)
        v = summary_vector(u, 2.0)
        assert abs(v[0] - np.sqrt(sobolev_norm_sq(1.0, u))) < 1e-12
        assert abs(v[2] - np.max(u.values)) < 1e-12
        assert abs(v[3] + 1.0) < 1e-6  # min of cos on a fine grid


class TestDecay:
    def test_deterministic_envelope_holds(self):
        # epsilon > 0 per the decay regime; viscous dissipation dominates the
        # O(dt^2) time-discretization growth so the envelope holds pointwise
        lam = DampingProfile("constant", lambda0=0.5)
        cfg = base_sim(eps=0.5, lam0=0.5, t_end=1.0, dt=1e-3)
        rep = deterministic_decay_check(cfg, sine(32), lam)
        assert rep["holds"] is True
        assert min(rep["margin"]) >= 0.0

    def test_requires_viscosity(self):
        cfg = EnsembleConfig(base=base_sim(), paths=2)
        with pytest.raises(ValueError):
            decay_experiment(cfg, sine(32), DampingProfile("constant", lambda0=1.0),
                              0.0, 0.0)

    def test_zero_initial_state(self):
        cfg = EnsembleConfig(
            base=base_sim(eps=0.5, lam0=1.0, t_end=0.2), paths=2)
        rep = decay_experiment(cfg, GridFunction.zero(TorusGrid(32)),
                               DampingProfile("constant", lambda0=1.0), 0.0, 0.0)
        assert rep["valid"] is True
        assert max(rep["mean_h1_sq"]) == 0.0


class TestLyapunov:
    def test_refuses_on_failed_condition(self):
        cfg = EnsembleConfig(base=base_sim(), paths=2)
        rep = lyapunov_experiment(cfg, sine(32), lambda t: 1.0,
                                  condition_report={"holds": False, "max_margin": 1.0})
        assert rep["valid"] is False
        assert "condition" in rep

    def test_zero_initial_state_bound(self):
        cfg = EnsembleConfig(
            base=base_sim(t_end=0.2,
                          ito_spec=ItoNoiseSpec(family="band_projection", channels=2,
                                                psi_const=0.5)),
            paths=2)
        rep = lyapunov_experiment(cfg, GridFunction.zero(TorusGrid(32)), lambda t: 0.5)
        assert rep["valid"] is True
        assert min(rep["margin"]) >= -1e-12


class TestStability:
    def test_delta_zero_bitwise(self):
        bank = (NoiseOperatorSpec(kind="B_family", coefficient=(0.2,),
                                  base_name="derivative", base_params=(),
                                  alpha_or_beta=1.0),)
        cfg = EnsembleConfig(base=base_sim(t_end=0.1, q_bank=bank, seed=3), paths=2)
        pert = GridFunction.from_callable(TorusGrid(32), np.cos)
        rep = stability_experiment(cfg, sine(32), pert, [0.0], sigma=1.0)
        assert rep["rows"][0]["mean_sq_diff"] == 0.0
        assert rep["rows"][0]["excluded"] == 0


class TestMeasurePlumbing:
    def test_zero_noise_contraction(self):
        # no noise, strong damping: every cloud collapses toward the origin
        base = base_sim(scheme="ExponentialEM", dt=5e-3, lam0=2.0,
                        include_nonlinear=False, seed=1)
        rep = measure_experiment(base, sine(32), paths=8,
                                 start_horizons=(2.0, 4.0), handoffs=(1.0, 1.5),
                                 t_eval=0.5, sample_seed=0)
        for row in rep["ladder"]:
            assert row["distance"] < 1e-2
        assert rep["n_independence"]["distance"] < 1e-2

    def test_propagator_composition_bitwise(self):
        base = base_sim(dt=5e-3, t_end=0.5, seed=4,
                        ito_spec=ItoNoiseSpec(family="band_additive", channels=4,
                                              psi_const=0.3, reference_seed=2))
        base.time_origin = 0.0
        assert propagator_composition_check(base, sine(32), -1.0, -0.5, 0.25)


class TestEnsembleConfig:
    def test_needs_two_paths(self):
        with pytest.raises(ValueError):
            EnsembleConfig(base=base_sim(), paths=1)

    def test_distinct_path_indices(self):
        cfg = EnsembleConfig(base=base_sim(), paths=4)
        idx = [cfg.path_config(i).path_index for i in range(4)]
        assert len(set(idx)) == 4
