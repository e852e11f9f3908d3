"""Exact homodyne sampling via rejection from the analytic marginals.

A measurement protocol draws three phases per mode, one from each of three
fixed phase intervals. For every phase slot the joint distribution of the m
measured quadratures is available in closed form, so rejection sampling
against an inflated Gaussian proposal produces exact joint samples with no
discretization error.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .wigner import MarginalForm, WignerForm, marginal

__all__ = [
    "DEFAULT_PHASE_INTERVALS",
    "EnvelopeFailureError",
    "PhaseProtocol",
    "QuadratureBatch",
    "default_envelope_scale",
    "draw_phase_protocol",
    "rejection_sample_marginal",
    "sample_joint_quadratures",
    "sample_vacuum_quadratures",
    "inject_loss_replacement",
]

# Thirds of [0, pi): the three slots probe complementary quadrature axes.
DEFAULT_PHASE_INTERVALS = np.array(
    [[0.0, np.pi / 3.0], [np.pi / 3.0, 2.0 * np.pi / 3.0], [2.0 * np.pi / 3.0, np.pi]]
)

BATCH_COLUMNS = ("state_id", "repetition", "mode", "phase_index", "phase", "value", "is_vacuum_replacement")

_CHUNK_CAP = 262_144


class EnvelopeFailureError(RuntimeError):
    """Rejection sampling acceptance collapsed; the target form is pathological."""


@dataclass(frozen=True)
class PhaseProtocol:
    """Three measurement phases per mode, one from each interval.

    ``phases[j, s]`` is the phase of mode j+1 in slot s+1.
    """

    intervals: np.ndarray
    phases: np.ndarray

    @property
    def mode_count(self) -> int:
        return self.phases.shape[0]

    def validate(self) -> None:
        if self.intervals.shape != (3, 2):
            raise ValueError("expected 3 phase intervals")
        if self.phases.ndim != 2 or self.phases.shape[1] != 3:
            raise ValueError("expected an m x 3 phase matrix")
        for slot in range(3):
            lo, hi = self.intervals[slot]
            inside = (self.phases[:, slot] >= lo) & (self.phases[:, slot] <= hi)
            if not np.all(inside):
                raise ValueError(f"slot {slot + 1} phases leave their interval [{lo:g}, {hi:g})")


def draw_phase_protocol(
    mode_count: int,
    rng: np.random.Generator,
    intervals: np.ndarray | None = None,
) -> PhaseProtocol:
    """Draw one phase per (mode, slot), uniform within the slot's interval."""
    intervals = DEFAULT_PHASE_INTERVALS if intervals is None else np.asarray(intervals, dtype=float)
    phases = np.empty((mode_count, 3))
    for slot in range(3):
        lo, hi = intervals[slot]
        phases[:, slot] = rng.uniform(lo, hi, size=mode_count) if hi > lo else lo
    return PhaseProtocol(intervals=intervals, phases=phases)


@dataclass
class QuadratureBatch:
    """Raw homodyne outcomes, one row per (repetition, mode, phase slot).

    Modes, phase slots and repetitions are 1-based, matching the CSV schema
    used on disk. A complete batch holds k * 3 * m entries.
    """

    state_id: str
    repetition: np.ndarray
    mode: np.ndarray
    phase_index: np.ndarray
    phase: np.ndarray
    value: np.ndarray
    is_vacuum_replacement: np.ndarray

    def __len__(self) -> int:
        return self.value.shape[0]

    def copy(self) -> QuadratureBatch:
        return QuadratureBatch(
            state_id=self.state_id,
            repetition=self.repetition.copy(),
            mode=self.mode.copy(),
            phase_index=self.phase_index.copy(),
            phase=self.phase.copy(),
            value=self.value.copy(),
            is_vacuum_replacement=self.is_vacuum_replacement.copy(),
        )

    def values_for(self, mode: int, phase_index: int) -> np.ndarray:
        """All outcome values of one (mode, phase slot) group."""
        mask = (self.mode == mode) & (self.phase_index == phase_index)
        return self.value[mask]

    def subsample_repetitions(self, reps: int, rng: np.random.Generator) -> QuadratureBatch:
        """Keep a random subset of repetitions, renumbered 1..reps."""
        unique = np.unique(self.repetition)
        if reps > unique.size:
            raise ValueError(f"cannot keep {reps} repetitions out of {unique.size}")
        chosen = np.sort(rng.choice(unique, size=reps, replace=False))
        mask = np.isin(self.repetition, chosen)
        renumber = {old: new for new, old in enumerate(chosen, start=1)}
        new_reps = np.array([renumber[r] for r in self.repetition[mask]], dtype=int)
        return QuadratureBatch(
            state_id=self.state_id,
            repetition=new_reps,
            mode=self.mode[mask].copy(),
            phase_index=self.phase_index[mask].copy(),
            phase=self.phase[mask].copy(),
            value=self.value[mask].copy(),
            is_vacuum_replacement=self.is_vacuum_replacement[mask].copy(),
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(BATCH_COLUMNS)
            for i in range(len(self)):
                writer.writerow(
                    [
                        self.state_id,
                        int(self.repetition[i]),
                        int(self.mode[i]),
                        int(self.phase_index[i]),
                        repr(float(self.phase[i])),
                        repr(float(self.value[i])),
                        int(self.is_vacuum_replacement[i]),
                    ]
                )

    @classmethod
    def from_csv(cls, path) -> QuadratureBatch:
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header is None:
                raise ValueError(f"{path}: empty batch file")
            if tuple(header) != BATCH_COLUMNS:
                raise ValueError(f"{path}: unexpected columns {header}")
            rows = list(reader)
        if not rows:
            raise ValueError(f"{path}: batch file has no data rows")
        state_id = rows[0][0]
        return cls(
            state_id=state_id,
            repetition=np.array([int(r[1]) for r in rows]),
            mode=np.array([int(r[2]) for r in rows]),
            phase_index=np.array([int(r[3]) for r in rows]),
            phase=np.array([float(r[4]) for r in rows]),
            value=np.array([float(r[5]) for r in rows]),
            is_vacuum_replacement=np.array([bool(int(r[6])) for r in rows]),
        )


def default_envelope_scale(dim: int) -> float:
    """Proposal covariance inflation, shrunk in high dimension.

    The Gaussian acceptance rate scales like scale^(-dim/2), so the scale is
    capped to keep scale^(dim/2) <= 8 once the dimension exceeds six; below
    that the usual factor 2 applies.
    """
    return min(2.0, 8.0 ** (2.0 / dim))


def rejection_sample_marginal(
    marg: MarginalForm,
    count: int,
    rng: np.random.Generator,
    envelope_scale: float | None = None,
    probe_points: int = 100_000,
    safety: float = 1.2,
    min_acceptance: float = 1e-4,
) -> tuple[np.ndarray, float]:
    """Draw exact samples from a marginal density.

    The proposal is a zero-mean Gaussian with covariance
    ``envelope_scale * marg.cov``; the envelope constant is the largest
    target/proposal ratio over a probe set, times a safety factor. Should
    any later draw exceed the envelope, the envelope is rescaled and all
    accepted samples are discarded, which keeps the output distribution
    exact.

    Returns (samples, acceptance_rate) with samples of shape (count, d).

    Raises
    ------
    EnvelopeFailureError
        If the observed acceptance rate falls below ``min_acceptance``.
    """
    dim = marg.dim
    scale = default_envelope_scale(dim) if envelope_scale is None else float(envelope_scale)
    if scale <= 1.0:
        raise ValueError("envelope_scale must exceed 1 for a valid envelope")
    chol = np.linalg.cholesky(marg.cov)
    sigma_inv = np.linalg.inv(marg.cov)
    sqrt_scale = np.sqrt(scale)
    # target/proposal ratio, with tiny negative prefactors clamped to zero
    shrink = 0.5 * (1.0 - 1.0 / scale)
    log_scale_term = 0.5 * dim * np.log(scale)

    def ratio(points: np.ndarray) -> np.ndarray:
        prefactor = 0.5 * (np.einsum("ij,jk,ik->i", points, marg.quad, points) + marg.const)
        np.clip(prefactor, 0.0, None, out=prefactor)
        mahal = np.einsum("ij,jk,ik->i", points, sigma_inv, points)
        return prefactor * np.exp(log_scale_term - shrink * mahal)

    def propose(n: int) -> np.ndarray:
        return sqrt_scale * rng.standard_normal((n, dim)) @ chol.T

    probes = propose(probe_points)
    probe_ratios = ratio(probes)
    origin_ratio = ratio(np.zeros((1, dim)))[0]
    envelope = safety * max(float(np.max(probe_ratios)), float(origin_ratio), 1e-300)

    accepted: list[np.ndarray] = []
    n_accepted = 0
    n_proposed = 0
    while n_accepted < count:
        expect = max(count - n_accepted, 1) * envelope / max(origin_ratio, 1e-12)
        chunk = int(min(max(4096, 1.3 * expect), _CHUNK_CAP))
        points = propose(chunk)
        ratios = ratio(points)
        n_proposed += chunk
        worst = float(np.max(ratios))
        if worst > envelope:
            # Envelope breached: rescale and restart to preserve exactness.
            envelope = safety * worst
            accepted.clear()
            n_accepted = 0
            continue
        keep = rng.uniform(size=chunk) * envelope < ratios
        kept = points[keep]
        accepted.append(kept)
        n_accepted += kept.shape[0]
        if n_proposed >= max(1e5, 10.0 / min_acceptance) and n_accepted / n_proposed < min_acceptance:
            raise EnvelopeFailureError(
                f"acceptance rate {n_accepted / n_proposed:.2e} below {min_acceptance:g}"
            )
    samples = np.concatenate(accepted)[:count]
    return samples, n_accepted / n_proposed


def sample_joint_quadratures(
    form: WignerForm,
    protocol: PhaseProtocol,
    reps: int,
    rng: np.random.Generator,
    state_id: str = "state",
    **sampler_options,
) -> QuadratureBatch:
    """Sample ``reps`` joint homodyne outcomes for each of the three phase slots.

    Within a slot all m modes are measured jointly from the m-dimensional
    marginal, so cross-mode correlations survive in the raw data. The batch
    rows are ordered slot-major, then repetition, then mode.
    """
    m = form.mode_count
    if protocol.mode_count != m:
        raise ValueError("protocol and form disagree on the mode count")
    rep_block = np.repeat(np.arange(1, reps + 1), m)
    mode_block = np.tile(np.arange(1, m + 1), reps)
    parts = {"repetition": [], "mode": [], "phase_index": [], "phase": [], "value": []}
    for slot in range(3):
        directions = [(j + 1, float(protocol.phases[j, slot])) for j in range(m)]
        marg = marginal(form, directions)
        samples, _ = rejection_sample_marginal(marg, reps, rng, **sampler_options)
        parts["repetition"].append(rep_block)
        parts["mode"].append(mode_block)
        parts["phase_index"].append(np.full(reps * m, slot + 1, dtype=int))
        parts["phase"].append(protocol.phases[mode_block - 1, slot])
        parts["value"].append(samples.ravel())
    n_total = 3 * reps * m
    return QuadratureBatch(
        state_id=state_id,
        repetition=np.concatenate(parts["repetition"]),
        mode=np.concatenate(parts["mode"]),
        phase_index=np.concatenate(parts["phase_index"]),
        phase=np.concatenate(parts["phase"]),
        value=np.concatenate(parts["value"]),
        is_vacuum_replacement=np.zeros(n_total, dtype=bool),
    )


def sample_vacuum_quadratures(count: int, rng: np.random.Generator) -> np.ndarray:
    """Vacuum homodyne outcomes: independent standard normal draws."""
    return rng.standard_normal(count)


def inject_loss_replacement(
    batch: QuadratureBatch, fraction: float, rng: np.random.Generator
) -> QuadratureBatch:
    """Replace floor(fraction * N) random entries with vacuum draws.

    Replaced entries keep their metadata and are flagged. The replacement
    count is exact, not probabilistic.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    out = batch.copy()
    n_replace = int(np.floor(fraction * len(batch)))
    if n_replace == 0:
        return out
    indices = rng.choice(len(batch), size=n_replace, replace=False)
    out.value[indices] = sample_vacuum_quadratures(n_replace, rng)
    out.is_vacuum_replacement[indices] = True
    return out
