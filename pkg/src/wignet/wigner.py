"""Analytic Wigner functions of Gaussian and photon-added/subtracted states.

Every state handled here has the closed form

    W(beta) = 1/2 (beta^T Q beta + c) * G_V(beta),

where G_V is the zero-mean Gaussian Wigner function with covariance V. A
plain Gaussian state has Q = 0 and c = 2; adding or subtracting a single
photon in a mode g produces a rank-two Q that can push W negative. The same
closed form survives marginalization onto commuting quadrature axes and the
uniform loss channel, which is what makes exact homodyne sampling and exact
minima available without any numerical integration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .gaussian import symplectic_form, validate_covariance

__all__ = [
    "DegenerateSubtractionError",
    "NonGaussianOp",
    "GAUSSIAN_OP",
    "WignerForm",
    "MarginalForm",
    "KERNEL_TRACE_FLOOR",
    "mode_axis_vector",
    "photon_op_matrix",
    "build_wigner_form",
    "wigner_at",
    "wigner_min",
    "marginal",
    "attenuate",
]

# Photon subtraction is rejected when the kernel trace normalization falls
# below this floor (a vacuum-like mode holds no photon to subtract).
KERNEL_TRACE_FLOOR = 1e-9

NORMALIZATION_TOL = 1e-10


class DegenerateSubtractionError(ValueError):
    """Photon subtraction from a vacuum-like mode is undefined."""


@dataclass(frozen=True)
class NonGaussianOp:
    """A single-photon operation: ``kind`` is "none", "add" or "subtract".

    ``mode_vector`` is the unit vector in R^{2m} selecting the amplitude
    quadrature of the mode acted on; it is ignored for kind "none".
    """

    kind: str
    mode_vector: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("none", "add", "subtract"):
            raise ValueError(f"unknown operation kind {self.kind!r}")
        if self.kind != "none":
            if self.mode_vector is None:
                raise ValueError("add/subtract operations need a mode vector")
            g = np.asarray(self.mode_vector, dtype=float)
            if abs(np.linalg.norm(g) - 1.0) > 1e-12:
                raise ValueError("mode vector must have unit norm")


GAUSSIAN_OP = NonGaussianOp("none")


def mode_axis_vector(mode_count: int, mode: int, theta: float = 0.0) -> np.ndarray:
    """Unit vector of the theta-rotated quadrature axis of one mode (1-based)."""
    if not 1 <= mode <= mode_count:
        raise ValueError(f"mode must lie in 1..{mode_count}, got {mode}")
    g = np.zeros(2 * mode_count)
    g[mode - 1] = np.cos(theta)
    g[mode_count + mode - 1] = np.sin(theta)
    return g


def photon_op_matrix(cov: np.ndarray, mode_vector: np.ndarray, sign: int) -> np.ndarray:
    """Rank-two kernel of a single-photon addition (+1) or subtraction (-1).

    The kernel is 2 (V +/- I) P (V +/- I) / tr{(V +/- I) P} with P the
    projector onto the amplitude and phase quadratures of the chosen mode.

    Raises
    ------
    DegenerateSubtractionError
        If the trace normalization of a subtraction falls below
        ``KERNEL_TRACE_FLOOR``, i.e. the mode is vacuum-like.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 (addition) or -1 (subtraction)")
    cov = np.asarray(cov, dtype=float)
    g = np.asarray(mode_vector, dtype=float)
    if abs(np.linalg.norm(g) - 1.0) > 1e-12:
        raise ValueError("mode vector must have unit norm")
    m = cov.shape[0] // 2
    jg = symplectic_form(m) @ g
    projector = np.outer(g, g) + np.outer(jg, jg)
    shifted = cov + sign * np.eye(2 * m)
    norm_trace = np.trace(shifted @ projector)
    if norm_trace <= KERNEL_TRACE_FLOOR:
        raise DegenerateSubtractionError(
            f"kernel trace {norm_trace:g} below floor; cannot subtract a photon from a vacuum-like mode"
        )
    kernel = 2.0 * shifted @ projector @ shifted / norm_trace
    return 0.5 * (kernel + kernel.T)


@dataclass
class WignerForm:
    """Quadratic-polynomial-times-Gaussian Wigner function.

    W(beta) = 1/2 (beta^T quad beta + const) * G_cov(beta). A Gaussian state
    has quad = 0 and const = 2. The normalization identity
    tr(cov @ quad) + const = 2 holds for every valid form.
    """

    cov: np.ndarray
    quad: np.ndarray
    const: float
    op: NonGaussianOp = GAUSSIAN_OP

    @property
    def mode_count(self) -> int:
        return self.cov.shape[0] // 2

    def validate(self) -> None:
        validate_covariance(self.cov)
        if self.op.kind == "none":
            if np.max(np.abs(self.quad)) > NORMALIZATION_TOL or abs(self.const - 2.0) > NORMALIZATION_TOL:
                raise ValueError("a Gaussian form must have quad = 0 and const = 2")
        defect = 0.5 * (np.trace(self.cov @ self.quad) + self.const) - 1.0
        if abs(defect) > NORMALIZATION_TOL:
            raise ValueError(f"form violates the normalization identity by {defect:g}")

    def to_json_dict(self) -> dict:
        op_record = {"kind": self.op.kind}
        if self.op.mode_vector is not None:
            op_record["mode_vector"] = np.asarray(self.op.mode_vector, dtype=float).tolist()
        return {
            "mode_count": self.mode_count,
            "cov": self.cov.ravel().tolist(),
            "quad": self.quad.ravel().tolist(),
            "const": float(self.const),
            "op": op_record,
        }

    @classmethod
    def from_json_dict(cls, record: dict) -> WignerForm:
        m = int(record["mode_count"])
        op_record = record["op"]
        vec = op_record.get("mode_vector")
        op = NonGaussianOp(op_record["kind"], None if vec is None else np.array(vec, dtype=float))
        return cls(
            cov=np.array(record["cov"], dtype=float).reshape(2 * m, 2 * m),
            quad=np.array(record["quad"], dtype=float).reshape(2 * m, 2 * m),
            const=float(record["const"]),
            op=op,
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> WignerForm:
        return cls.from_json_dict(json.loads(text))


def build_wigner_form(cov: np.ndarray, op: NonGaussianOp = GAUSSIAN_OP) -> WignerForm:
    """Wigner form of a Gaussian state after an optional photon operation."""
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0]
    if op.kind == "none":
        return WignerForm(cov=cov, quad=np.zeros((n, n)), const=2.0, op=op)
    sign = 1 if op.kind == "add" else -1
    kernel = photon_op_matrix(cov, op.mode_vector, sign)
    cov_inv = np.linalg.inv(cov)
    quad = cov_inv @ kernel @ cov_inv
    quad = 0.5 * (quad + quad.T)
    const = 2.0 - np.trace(cov_inv @ kernel)
    form = WignerForm(cov=cov, quad=quad, const=float(const), op=op)
    defect = 0.5 * (np.trace(cov @ quad) + const) - 1.0
    if abs(defect) > NORMALIZATION_TOL:
        raise ValueError(f"constructed form violates normalization by {defect:g}")
    return form


def _gaussian_density(cov: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Normalized Gaussian density at points of shape (n, dim)."""
    dim = cov.shape[0]
    chol = np.linalg.cholesky(cov)
    white = np.linalg.solve(chol, points.T)
    quad_term = np.sum(white * white, axis=0)
    log_norm = -0.5 * dim * np.log(2.0 * np.pi) - np.sum(np.log(np.diagonal(chol)))
    return np.exp(log_norm - 0.5 * quad_term)


def wigner_at(form: WignerForm, beta: np.ndarray) -> float | np.ndarray:
    """Evaluate the Wigner function at one phase-space point or an array of them.

    ``beta`` has shape (2m,) for a single point or (n, 2m) for a batch.
    """
    beta = np.asarray(beta, dtype=float)
    single = beta.ndim == 1
    points = beta[None, :] if single else beta
    if points.shape[1] != 2 * form.mode_count:
        raise ValueError(f"points must have dimension {2 * form.mode_count}, got {points.shape[1]}")
    prefactor = 0.5 * (np.einsum("ij,jk,ik->i", points, form.quad, points) + form.const)
    values = prefactor * _gaussian_density(form.cov, points)
    return float(values[0]) if single else values


def wigner_min(
    form: WignerForm,
    verify: bool = False,
    rng: np.random.Generator | None = None,
    starts: int = 32,
) -> float:
    """Most negative Wigner value, attained at the phase-space origin.

    For zero-mean photon-added/subtracted Gaussian states the minimum sits
    at the origin, so the value is simply W(0) = c (2pi)^-m (det V)^-1/2 / 2.
    With ``verify=True`` a multi-start local minimization additionally checks
    that no probed point falls below min(W(0), 0) - 1e-9; a positive origin
    value coexists with W -> 0+ in the tails, so only negative excursions
    below the origin value are treated as violations.
    """
    m = form.mode_count
    origin_value = 0.5 * form.const * (2.0 * np.pi) ** (-m) / np.sqrt(np.linalg.det(form.cov))
    if verify:
        rng = np.random.default_rng(0) if rng is None else rng
        scale = np.sqrt(np.max(np.diagonal(form.cov)))
        floor = min(origin_value, 0.0) - 1e-9
        objective = lambda beta: wigner_at(form, beta)
        for _ in range(starts):
            start = rng.normal(scale=1.5 * scale, size=2 * m)
            result = minimize(objective, start, method="Nelder-Mead")
            if result.fun < floor:
                raise RuntimeError(
                    f"numerical search found W = {result.fun:g} below the origin value {origin_value:g}"
                )
    return float(origin_value)


@dataclass
class MarginalForm:
    """Joint density of commuting quadratures, in the same closed form.

    p(x) = 1/2 (x^T quad x + const) * G_cov(x) for x in R^d, where d is the
    number of measured axes. ``directions`` records the (mode, phase) pairs
    the density refers to, with 1-based modes.
    """

    cov: np.ndarray
    quad: np.ndarray
    const: float
    directions: tuple[tuple[int, float], ...]

    @property
    def dim(self) -> int:
        return self.cov.shape[0]

    def pdf(self, points: np.ndarray) -> np.ndarray:
        """Density at points of shape (n, d) or (n,) when d = 1."""
        points = np.asarray(points, dtype=float)
        if self.dim == 1 and points.ndim == 1:
            points = points[:, None]
        prefactor = 0.5 * (np.einsum("ij,jk,ik->i", points, self.quad, points) + self.const)
        return prefactor * _gaussian_density(self.cov, points)

    def validate(self, probe_points: int = 10_000, rng: np.random.Generator | None = None) -> None:
        defect = 0.5 * (np.trace(self.cov @ self.quad) + self.const) - 1.0
        if abs(defect) > NORMALIZATION_TOL:
            raise ValueError(f"marginal violates the normalization identity by {defect:g}")
        rng = np.random.default_rng(0) if rng is None else rng
        chol = np.linalg.cholesky(self.cov)
        probes = rng.standard_normal((probe_points, self.dim)) * 2.5 @ chol.T
        if np.min(self.pdf(probes)) < -1e-12:
            raise ValueError("marginal density is negative on the probe grid")


def measurement_matrix(mode_count: int, directions: list[tuple[int, float]]) -> np.ndarray:
    """Rows select the measured axes x_j cos(theta) + p_j sin(theta) (1-based modes)."""
    modes = [mode for mode, _ in directions]
    if len(set(modes)) != len(modes):
        raise ValueError("each mode may appear at most once in a measurement configuration")
    rows = [mode_axis_vector(mode_count, mode, theta) for mode, theta in directions]
    return np.stack(rows)


def marginal(form: WignerForm, directions: list[tuple[int, float]]) -> MarginalForm:
    """Integrate the Wigner function down to the measured quadrature axes.

    ``directions`` lists (mode, phase) pairs, one per distinct mode; the
    remaining 2m - d phase-space variables are integrated out analytically
    through the conditional moments of the underlying Gaussian.
    """
    m = form.mode_count
    if len(directions) > m:
        raise ValueError("cannot measure more axes than modes")
    sel = measurement_matrix(m, directions)
    cov_sel = sel @ form.cov  # d x 2m
    sigma = cov_sel @ sel.T
    sigma = 0.5 * (sigma + sigma.T)
    sigma_inv = np.linalg.inv(sigma)
    # beta | x is Gaussian with mean V L^T Sigma^-1 x and covariance
    # V - V L^T Sigma^-1 L V; averaging the quadratic prefactor over it
    # keeps the polynomial-times-Gaussian form closed.
    gain = cov_sel.T @ sigma_inv  # 2m x d
    quad = gain.T @ form.quad @ gain
    quad = 0.5 * (quad + quad.T)
    cond_cov = form.cov - gain @ cov_sel
    const = form.const + np.trace(form.quad @ cond_cov)
    return MarginalForm(
        cov=sigma,
        quad=quad,
        const=float(const),
        directions=tuple((int(mode), float(theta)) for mode, theta in directions),
    )


def attenuate(form: WignerForm, loss: float) -> WignerForm:
    """Apply the uniform loss channel to an already degaussified state.

    Losses commute with the closed form: with t = 1 - loss the covariance
    becomes V' = t V + loss I, the quadratic part t V'^-1 V Q V V'^-1, and
    the constant is fixed by the normalization identity. Applying this to a
    photon-added vacuum reproduces the known 50% loss threshold where the
    negativity at the origin vanishes.
    """
    if not 0.0 <= loss <= 1.0:
        raise ValueError(f"loss must lie in [0, 1], got {loss}")
    t = 1.0 - loss
    n = form.cov.shape[0]
    new_cov = t * form.cov + loss * np.eye(n)
    new_cov_inv = np.linalg.inv(new_cov)
    propagated = new_cov_inv @ (t * form.cov @ form.quad @ form.cov) @ new_cov_inv
    propagated = 0.5 * (propagated + propagated.T)
    new_const = 2.0 - np.trace(propagated @ new_cov)
    return WignerForm(cov=new_cov, quad=propagated, const=float(new_const), op=form.op)
