"""Pseudo-spectral Monte Carlo laboratory for the stochastic
Camassa-Holm equation on the torus with fractional diffusion,
time-dependent damping, pseudo-differential Stratonovich noise, and
nonlinear Ito noise."""

__version__ = "0.1.0"
