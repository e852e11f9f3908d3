"""Build Gaussian and photon-added/subtracted states and inspect their Wigner functions.

Walks through the state zoo: the vacuum, a squeezed thermal state, and the
single-photon operations that create negativity. Ends by exporting a 2D
Wigner slice of the photon-added vacuum as CSV.
"""

import numpy as np

from wignet import (
    NonGaussianOp,
    StateSpecConfig,
    assemble_covariance,
    attenuate,
    build_wigner_form,
    mode_axis_vector,
    sample_state_spec,
    wigner_at,
    wigner_min,
)
from wignet.gaussian import GaussianStateSpec

TWO_PI = 2 * np.pi

# --- the vacuum: covariance = identity, Wigner peak (2 pi)^-m ------------
vacuum = build_wigner_form(np.eye(2))
print(f"vacuum W(0)           = {wigner_at(vacuum, np.zeros(2)):+.6f}  (1/2pi = {1/TWO_PI:.6f})")

# --- an 8 dB squeezed single mode ----------------------------------------
squeezed_spec = GaussianStateSpec(1, np.array([1.0]), np.array([8.0]), np.eye(2), None, 0.0)
squeezed = build_wigner_form(assemble_covariance(squeezed_spec))
print(f"8 dB squeezed W(0)    = {wigner_at(squeezed, np.zeros(2)):+.6f}  (still positive: Gaussian)")

# --- photon addition on the vacuum: the single photon --------------------
added = build_wigner_form(np.eye(2), NonGaussianOp("add", mode_axis_vector(1, 1)))
print(f"single photon W(0)    = {wigner_min(added):+.6f}  (maximal negativity -1/2pi)")

# losses wash the negativity out; the threshold sits exactly at 50%
for loss in (0.2, 0.5, 0.8):
    print(f"  after {loss:.0%} loss      = {wigner_min(attenuate(added, loss)):+.6f}")

# --- a random three-mode state from the corpus distribution --------------
rng = np.random.default_rng(1)
config = StateSpecConfig(mode_count=3, squeezing_max_db=8.0, loss_range=(0.0, 0.5))
spec = sample_state_spec(config, rng)
direction = rng.standard_normal(6)
direction /= np.linalg.norm(direction)
subtracted = build_wigner_form(assemble_covariance(spec), NonGaussianOp("subtract", direction))
scaled = wigner_min(subtracted) * TWO_PI**3
print(f"random 3-mode subtracted state: (2pi)^3 W_min = {scaled:+.4f}")

# --- export a Wigner slice for plotting ----------------------------------
axis = np.linspace(-4, 4, 81)
xx, pp = np.meshgrid(axis, axis, indexing="ij")
points = np.column_stack([xx.ravel(), pp.ravel()])
values = wigner_at(added, points).reshape(xx.shape)
np.savetxt("single_photon_wigner_slice.csv", values, delimiter=",")
print("wrote single_photon_wigner_slice.csv (81 x 81 grid over [-4, 4]^2)")
