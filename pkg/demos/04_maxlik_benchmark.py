"""Reconstruct a single photon by iterative maximum likelihood.

The benchmark path: homodyne samples of the photon-added vacuum feed the
fixed-point tomography, and the parity sum at the phase-space origin
recovers the Wigner minimum that the analytic form gives exactly.
"""

import numpy as np

from wignet import (
    NonGaussianOp,
    build_wigner_form,
    draw_phase_protocol,
    maxlik_reconstruct,
    sample_joint_quadratures,
    wigner_min,
    wmin_parity,
)

rng = np.random.default_rng(12)
single_photon = build_wigner_form(np.eye(2), NonGaussianOp("add", np.array([1.0, 0.0])))
analytic = wigner_min(single_photon)
print(f"analytic W_min = {analytic:+.6f} (= -1/2pi)")

protocol = draw_phase_protocol(1, rng)
batch = sample_joint_quadratures(single_photon, protocol, 1000, rng)
print(f"sampled {len(batch)} quadratures at 3 phases")

rho, log_likelihood = maxlik_reconstruct(batch, mode_count=1, photon_cutoff=5, iterations=15)
populations = np.diagonal(rho.matrix).real
print("\nreconstructed Fock populations:")
for n, p in enumerate(populations):
    print(f"  |{n}>: {p:.4f}")
print(f"\nparity estimate of W_min = {wmin_parity(rho):+.6f}")
print(f"absolute error           = {abs(wmin_parity(rho) - analytic):.6f}")

steps = np.diff(log_likelihood)
print(f"\nlog-likelihood climbed {log_likelihood[-1] - log_likelihood[0]:+.1f} over 15 iterations")
print(f"smallest per-iteration step: {steps.min():+.3e} (never decreases)")
