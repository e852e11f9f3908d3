"""Iterative maximum-likelihood tomography on a truncated Fock space.

The benchmark reconstructor: each homodyne outcome contributes a rank-one
projector onto the measured quadrature eigenstate, the density matrix is
refined by the fixed-point iteration rho <- N[R rho R] with
R = sum_j P_j / p_j, and the Wigner minimum is read off the reconstruction
through the parity sum at the phase-space origin.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .sampling import QuadratureBatch

__all__ = [
    "ZeroProbabilityError",
    "DimensionLimitError",
    "FockDensityMatrix",
    "quadrature_amplitudes",
    "maxlik_reconstruct",
    "maxlik_reconstruct_modes",
    "maxlik_wmin",
    "wmin_parity",
    "maxlik_classify",
]

PROBABILITY_FLOOR = 1e-300
DEFAULT_MAX_DIMENSION = 10_000


class ZeroProbabilityError(RuntimeError):
    """A measurement has vanishing probability; the photon cutoff is too small."""


class DimensionLimitError(ValueError):
    """The truncated Fock space exceeds the configured size limit."""


@dataclass
class FockDensityMatrix:
    """Hermitian, unit-trace, positive matrix on the truncated m-mode Fock space.

    The matrix dimension is (photon_cutoff + 1)^mode_count, with the first
    mode's occupation number as the slowest index.
    """

    mode_count: int
    photon_cutoff: int
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return (self.photon_cutoff + 1) ** self.mode_count

    def validate(self) -> None:
        if self.matrix.shape != (self.dim, self.dim):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match dimension {self.dim}")
        if np.max(np.abs(self.matrix - self.matrix.conj().T)) > 1e-10:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(self.matrix).real - 1.0) > 1e-10:
            raise ValueError("density matrix does not have unit trace")
        if np.min(np.linalg.eigvalsh(self.matrix)) < -1e-8:
            raise ValueError("density matrix has a significantly negative eigenvalue")

    def to_json_dict(self, log_likelihood=None, iterations: int | None = None) -> dict:
        return {
            "mode_count": self.mode_count,
            "photon_cutoff": self.photon_cutoff,
            "iterations": iterations,
            "rho_real": self.matrix.real.ravel().tolist(),
            "rho_imag": self.matrix.imag.ravel().tolist(),
            "log_likelihood": None if log_likelihood is None else list(map(float, log_likelihood)),
            "wmin_parity": wmin_parity(self),
        }

    def save_json(self, path, log_likelihood=None, iterations: int | None = None) -> None:
        with open(path, "w") as handle:
            json.dump(self.to_json_dict(log_likelihood, iterations), handle)

    @classmethod
    def from_json_dict(cls, record: dict) -> FockDensityMatrix:
        m = int(record["mode_count"])
        cutoff = int(record["photon_cutoff"])
        dim = (cutoff + 1) ** m
        matrix = (
            np.array(record["rho_real"], dtype=float) + 1j * np.array(record["rho_imag"], dtype=float)
        ).reshape(dim, dim)
        return cls(mode_count=m, photon_cutoff=cutoff, matrix=matrix)


def quadrature_amplitudes(photon_cutoff: int, x, theta) -> np.ndarray:
    """Fock amplitudes exp(i n theta) psi_n(x) of a rotated quadrature eigenstate.

    psi_n are the harmonic-oscillator eigenfunctions under the vacuum
    variance-1 convention, psi_0(x) = (2 pi)^(-1/4) exp(-x^2 / 4), built by
    the three-term recursion. Scalars give a vector of length cutoff + 1;
    arrays of shape (n,) give an (n, cutoff + 1) matrix.
    """
    if photon_cutoff < 0:
        raise ValueError("photon cutoff must be >= 0")
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    theta_arr = np.broadcast_to(np.asarray(theta, dtype=float), x_arr.shape)
    levels = photon_cutoff + 1
    psi = np.empty((levels, x_arr.size))
    psi[0] = (2.0 * np.pi) ** -0.25 * np.exp(-0.25 * x_arr**2)
    if levels > 1:
        psi[1] = x_arr * psi[0]
    for n in range(1, levels - 1):
        psi[n + 1] = (x_arr * psi[n] - np.sqrt(n) * psi[n - 1]) / np.sqrt(n + 1)
    phases = np.exp(1j * np.outer(theta_arr, np.arange(levels)))
    amplitudes = psi.T * phases
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return amplitudes[0]
    return amplitudes


def _measurement_table(batch: QuadratureBatch, mode_count: int) -> tuple[np.ndarray, np.ndarray]:
    """Align batch entries into joint measurements: (values, phases) of shape (n, m).

    Entries are grouped by (phase slot, repetition); every group must contain
    each mode exactly once.
    """
    order = np.lexsort((batch.mode, batch.repetition, batch.phase_index))
    modes = batch.mode[order]
    n = len(batch)
    if n % mode_count != 0:
        raise ValueError("batch size is not a multiple of the mode count; cannot form joint measurements")
    groups = n // mode_count
    mode_grid = modes.reshape(groups, mode_count)
    if not np.all(mode_grid == np.arange(1, mode_count + 1)):
        raise ValueError(
            "repetitions are not aligned across modes; use the per-mode product reconstruction"
        )
    values = batch.value[order].reshape(groups, mode_count)
    phases = batch.phase[order].reshape(groups, mode_count)
    return values, phases


def _joint_amplitude_matrix(batch: QuadratureBatch, mode_count: int, photon_cutoff: int) -> np.ndarray:
    values, phases = _measurement_table(batch, mode_count)
    joint = quadrature_amplitudes(photon_cutoff, values[:, 0], phases[:, 0])
    for j in range(1, mode_count):
        amps = quadrature_amplitudes(photon_cutoff, values[:, j], phases[:, j])
        joint = (joint[:, :, None] * amps[:, None, :]).reshape(values.shape[0], -1)
    return joint


def _iterate_rr(psi: np.ndarray, iterations: int) -> tuple[np.ndarray, np.ndarray]:
    """Run the fixed-point iteration; returns (rho, per-iteration log-likelihood).

    The likelihood trace has ``iterations + 1`` entries: the value for the
    state entering each iteration, plus the final state's value.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    n_meas, dim = psi.shape
    rho = np.eye(dim, dtype=complex) / dim
    log_likelihood = np.empty(iterations + 1)
    for it in range(iterations):
        probs = np.einsum("ij,jk,ik->i", psi.conj(), rho, psi).real
        if np.min(probs) < PROBABILITY_FLOOR:
            raise ZeroProbabilityError(
                f"measurement probability {np.min(probs):g} below floor; increase the photon cutoff"
            )
        log_likelihood[it] = float(np.sum(np.log(probs)))
        update = (psi.T * (1.0 / probs)) @ psi.conj() / n_meas
        rho = update @ rho @ update
        rho = 0.5 * (rho + rho.conj().T)
        rho /= np.trace(rho).real
    probs = np.einsum("ij,jk,ik->i", psi.conj(), rho, psi).real
    if np.min(probs) < PROBABILITY_FLOOR:
        raise ZeroProbabilityError("final state assigns vanishing probability to a measurement")
    log_likelihood[iterations] = float(np.sum(np.log(probs)))
    return rho, log_likelihood


def maxlik_reconstruct(
    batch: QuadratureBatch,
    mode_count: int,
    photon_cutoff: int,
    iterations: int,
    max_dimension: int = DEFAULT_MAX_DIMENSION,
) -> tuple[FockDensityMatrix, np.ndarray]:
    """Joint m-mode reconstruction from aligned repetitions.

    Starts from the maximally mixed state and applies the R rho R iteration
    with trace renormalization. Returns the estimate and the log-likelihood
    trace (length iterations + 1).
    """
    dim = (photon_cutoff + 1) ** mode_count
    if dim > max_dimension:
        raise DimensionLimitError(
            f"Fock dimension {dim} exceeds the limit {max_dimension}; lower the cutoff or mode count"
        )
    if not np.all(np.isfinite(batch.value)):
        raise ValueError("batch contains non-finite quadrature values")
    psi = _joint_amplitude_matrix(batch, mode_count, photon_cutoff)
    rho, log_likelihood = _iterate_rr(psi, iterations)
    return FockDensityMatrix(mode_count=mode_count, photon_cutoff=photon_cutoff, matrix=rho), log_likelihood


def maxlik_reconstruct_modes(
    batch: QuadratureBatch,
    mode_count: int,
    photon_cutoff: int,
    iterations: int,
) -> tuple[list[FockDensityMatrix], list[np.ndarray]]:
    """Reconstruct each mode independently and return the per-mode estimates.

    Used when cross-mode correlations are ignored (the product-state
    shortcut for independently measured modes).
    """
    if not np.all(np.isfinite(batch.value)):
        raise ValueError("batch contains non-finite quadrature values")
    estimates = []
    traces = []
    for mode in range(1, mode_count + 1):
        mask = batch.mode == mode
        if not np.any(mask):
            raise ValueError(f"batch has no measurements for mode {mode}")
        psi = quadrature_amplitudes(photon_cutoff, batch.value[mask], batch.phase[mask])
        rho, log_likelihood = _iterate_rr(psi, iterations)
        estimates.append(FockDensityMatrix(mode_count=1, photon_cutoff=photon_cutoff, matrix=rho))
        traces.append(log_likelihood)
    return estimates, traces


def wmin_parity(rho: FockDensityMatrix) -> float:
    """Wigner value at the phase-space origin via the parity sum.

    W(0) = sum over Fock occupations of (-1)^(n_1 + ... + n_m) <n|rho|n>,
    divided by (2 pi)^m.
    """
    levels = rho.photon_cutoff + 1
    signs = (-1.0) ** np.arange(levels)
    parity = signs
    for _ in range(rho.mode_count - 1):
        parity = np.outer(parity, signs).ravel()
    populations = np.diagonal(rho.matrix).real
    return float(np.dot(parity, populations) / (2.0 * np.pi) ** rho.mode_count)


def maxlik_wmin(
    batch: QuadratureBatch,
    mode_count: int,
    photon_cutoff: int,
    iterations: int,
    product: bool = False,
    max_dimension: int = DEFAULT_MAX_DIMENSION,
) -> tuple[float, list[np.ndarray]]:
    """Reconstruct and return the estimated Wigner minimum.

    With ``product=True`` each mode is reconstructed separately and the
    origin values multiply, which is exact for uncorrelated modes.
    """
    if product:
        estimates, traces = maxlik_reconstruct_modes(batch, mode_count, photon_cutoff, iterations)
        w_min = float(np.prod([wmin_parity(rho) for rho in estimates]))
        return w_min, traces
    rho, trace = maxlik_reconstruct(batch, mode_count, photon_cutoff, iterations, max_dimension)
    return wmin_parity(rho), [trace]


def maxlik_classify(
    batch: QuadratureBatch,
    mode_count: int,
    photon_cutoff: int,
    iterations: int,
    cutoff: float,
    product: bool = False,
) -> int:
    """1 when the reconstructed Wigner minimum falls below the cutoff."""
    w_min, _ = maxlik_wmin(batch, mode_count, photon_cutoff, iterations, product=product)
    return int(w_min < cutoff)
