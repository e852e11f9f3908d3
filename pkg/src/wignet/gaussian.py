"""Random multimode Gaussian covariance matrices in the xxpp convention.

A state is parameterized by thermal symplectic eigenvalues, per-mode
squeezing on a dB scale, Haar-random passive basis changes, and a uniform
loss channel. The vacuum covariance is the identity, so every vacuum
quadrature marginal is a standard normal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ORTHOGONALITY_TOL",
    "PHYSICALITY_TOL",
    "GaussianStateSpec",
    "StateSpecConfig",
    "symplectic_form",
    "symplectic_from_unitary",
    "sample_haar_symplectic_orthogonal",
    "sample_state_spec",
    "assemble_covariance",
    "apply_loss",
    "validate_symplectic_orthogonal",
    "validate_covariance",
    "save_covariance_csv",
    "load_covariance_csv",
]

# Algebraic identities of constructed matrices are checked at 1e-10;
# spectra of composed products at 1e-8.
ORTHOGONALITY_TOL = 1e-10
PHYSICALITY_TOL = 1e-8


def symplectic_form(mode_count: int) -> np.ndarray:
    """Return the 2m x 2m symplectic form [[0, I], [-I, 0]] in xxpp ordering."""
    m = mode_count
    j = np.zeros((2 * m, 2 * m))
    j[:m, m:] = np.eye(m)
    j[m:, :m] = -np.eye(m)
    return j


def symplectic_from_unitary(u: np.ndarray) -> np.ndarray:
    """Embed an m x m unitary X + iY as the orthogonal symplectic [[X, Y], [-Y, X]]."""
    x, y = u.real, u.imag
    return np.block([[x, y], [-y, x]])


def sample_haar_symplectic_orthogonal(mode_count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a Haar-random symplectic orthogonal basis change.

    A Haar-random m x m unitary is generated by QR-decomposing a complex
    Ginibre matrix and fixing the phases of the R diagonal, then embedded
    into the 2m x 2m real representation.

    Parameters
    ----------
    mode_count:
        Number of optical modes m (>= 1).
    rng:
        Seeded random generator.
    """
    if mode_count < 1:
        raise ValueError(f"mode_count must be >= 1, got {mode_count}")
    m = mode_count
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    u = q * (diag / np.abs(diag))
    return symplectic_from_unitary(u)


def validate_symplectic_orthogonal(mat: np.ndarray, tol: float = ORTHOGONALITY_TOL) -> None:
    """Raise ValueError unless ``mat`` is orthogonal and preserves the symplectic form."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] % 2 != 0:
        raise ValueError(f"expected a square 2m x 2m matrix, got shape {mat.shape}")
    m = mat.shape[0] // 2
    eye = np.eye(2 * m)
    if np.max(np.abs(mat.T @ mat - eye)) > tol:
        raise ValueError("matrix is not orthogonal")
    j = symplectic_form(m)
    if np.max(np.abs(mat @ j @ mat.T - j)) > tol:
        raise ValueError("matrix does not preserve the symplectic form")


def validate_covariance(cov: np.ndarray, tol: float = PHYSICALITY_TOL) -> None:
    """Raise ValueError unless ``cov`` is a physical covariance matrix.

    Checks symmetry (1e-10), strict positive definiteness, and the
    uncertainty relation: the smallest eigenvalue of V + iJ must be
    >= -tol.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2 != 0:
        raise ValueError(f"expected a square 2m x 2m matrix, got shape {cov.shape}")
    m = cov.shape[0] // 2
    if np.max(np.abs(cov - cov.T)) > 1e-10:
        raise ValueError("covariance is not symmetric")
    if np.min(np.linalg.eigvalsh(cov)) <= 0:
        raise ValueError("covariance is not positive definite")
    j = symplectic_form(m)
    physicality = np.min(np.linalg.eigvalsh(cov + 1j * j))
    if physicality < -tol:
        raise ValueError(f"covariance violates the uncertainty relation (min eig {physicality:g})")


@dataclass
class GaussianStateSpec:
    """Random parameters defining one multimode Gaussian covariance matrix.

    The covariance is assembled as O2 K O1 D O1^T K O2^T, where D carries the
    thermal eigenvalues, K the per-mode squeezers, and O1/O2 are passive basis
    changes, followed by the uniform loss channel.
    """

    mode_count: int
    thermal_eigenvalues: np.ndarray
    squeezing_db: np.ndarray
    basis_change_1: np.ndarray
    basis_change_2: np.ndarray | None
    loss: float
    seed: int | None = None

    def validate(self) -> None:
        m = self.mode_count
        if m < 1:
            raise ValueError("mode_count must be >= 1")
        eta = np.asarray(self.thermal_eigenvalues, dtype=float)
        if eta.shape != (m,) or np.any(eta < 1.0):
            raise ValueError("thermal eigenvalues must be m values >= 1")
        sq = np.asarray(self.squeezing_db, dtype=float)
        if sq.shape != (m,) or np.any(sq < 0.0):
            raise ValueError("squeezing must be m nonnegative dB values")
        validate_symplectic_orthogonal(self.basis_change_1)
        if self.basis_change_2 is not None:
            validate_symplectic_orthogonal(self.basis_change_2)
        if not 0.0 <= self.loss <= 1.0:
            raise ValueError(f"loss must lie in [0, 1], got {self.loss}")

    def to_json_dict(self) -> dict:
        return {
            "mode_count": self.mode_count,
            "eta": np.asarray(self.thermal_eigenvalues, dtype=float).tolist(),
            "squeezing_db": np.asarray(self.squeezing_db, dtype=float).tolist(),
            "o1": np.asarray(self.basis_change_1, dtype=float).ravel().tolist(),
            "o2": None
            if self.basis_change_2 is None
            else np.asarray(self.basis_change_2, dtype=float).ravel().tolist(),
            "loss": float(self.loss),
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, record: dict) -> GaussianStateSpec:
        m = int(record["mode_count"])
        o2 = record.get("o2")
        return cls(
            mode_count=m,
            thermal_eigenvalues=np.array(record["eta"], dtype=float),
            squeezing_db=np.array(record["squeezing_db"], dtype=float),
            basis_change_1=np.array(record["o1"], dtype=float).reshape(2 * m, 2 * m),
            basis_change_2=None if o2 is None else np.array(o2, dtype=float).reshape(2 * m, 2 * m),
            loss=float(record["loss"]),
            seed=record.get("seed"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> GaussianStateSpec:
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class StateSpecConfig:
    """Sampling ranges for the random state parameters.

    Squeezing is uniform on a dB scale in [0, squeezing_max_db]; thermal
    eigenvalues are uniform on ``thermal_range``; the loss is uniform on
    ``loss_range``; the second basis change is applied with probability
    ``basis2_probability``.
    """

    mode_count: int
    squeezing_max_db: float = 8.0
    thermal_range: tuple[float, float] = (1.0, 1.1)
    loss_range: tuple[float, float] = (0.0, 0.0)
    basis2_probability: float = 0.5

    def __post_init__(self) -> None:
        if self.mode_count < 1:
            raise ValueError("mode_count must be >= 1")
        if self.squeezing_max_db < 0:
            raise ValueError("squeezing_max_db must be >= 0")
        lo, hi = self.thermal_range
        if not (1.0 <= lo <= hi):
            raise ValueError(f"thermal_range must satisfy 1 <= lo <= hi, got {self.thermal_range}")
        lo, hi = self.loss_range
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError(f"loss_range must lie inside [0, 1], got {self.loss_range}")
        if not 0.0 <= self.basis2_probability <= 1.0:
            raise ValueError("basis2_probability must lie in [0, 1]")


def sample_state_spec(config: StateSpecConfig, rng: np.random.Generator) -> GaussianStateSpec:
    """Draw the random parameters of one Gaussian state."""
    m = config.mode_count
    eta = rng.uniform(config.thermal_range[0], config.thermal_range[1], size=m)
    squeezing_db = rng.uniform(0.0, config.squeezing_max_db, size=m)
    o1 = sample_haar_symplectic_orthogonal(m, rng)
    o2 = None
    if rng.uniform() < config.basis2_probability:
        o2 = sample_haar_symplectic_orthogonal(m, rng)
    loss = rng.uniform(config.loss_range[0], config.loss_range[1])
    return GaussianStateSpec(
        mode_count=m,
        thermal_eigenvalues=eta,
        squeezing_db=squeezing_db,
        basis_change_1=o1,
        basis_change_2=o2,
        loss=float(loss),
    )


def apply_loss(cov: np.ndarray, loss: float) -> np.ndarray:
    """Mix a covariance with the vacuum: (1 - loss) V + loss I."""
    if not 0.0 <= loss <= 1.0:
        raise ValueError(f"loss must lie in [0, 1], got {loss}")
    cov = np.asarray(cov, dtype=float)
    return (1.0 - loss) * cov + loss * np.eye(cov.shape[0])


def assemble_covariance(spec: GaussianStateSpec) -> np.ndarray:
    """Build the covariance matrix O2 K O1 D O1^T K O2^T and apply the loss channel.

    D = diag(eta_1..eta_m, eta_1..eta_m) holds the thermal eigenvalues and
    K = diag(sqrt(s_1)..sqrt(s_m), 1/sqrt(s_1)..1/sqrt(s_m)) the squeezers,
    with s_i = 10^(dB_i / 10). A missing second basis change acts as the
    identity.
    """
    spec.validate()
    s = 10.0 ** (np.asarray(spec.squeezing_db, dtype=float) / 10.0)
    eta = np.asarray(spec.thermal_eigenvalues, dtype=float)
    thermal = np.diag(np.concatenate([eta, eta]))
    squeezer = np.diag(np.concatenate([np.sqrt(s), 1.0 / np.sqrt(s)]))
    o1 = np.asarray(spec.basis_change_1, dtype=float)
    cov = squeezer @ o1 @ thermal @ o1.T @ squeezer
    if spec.basis_change_2 is not None:
        o2 = np.asarray(spec.basis_change_2, dtype=float)
        cov = o2 @ cov @ o2.T
    cov = apply_loss(cov, spec.loss)
    return 0.5 * (cov + cov.T)


def save_covariance_csv(cov: np.ndarray, path) -> None:
    """Export a covariance matrix as row-major CSV (debugging aid)."""
    np.savetxt(path, np.asarray(cov, dtype=float), delimiter=",")


def load_covariance_csv(path) -> np.ndarray:
    matrix = np.loadtxt(path, delimiter=",")
    return np.atleast_2d(matrix)
