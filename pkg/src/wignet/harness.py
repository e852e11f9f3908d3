"""Experiment pipeline: corpus generation, benchmark comparisons, robustness.

Every command is deterministic under a master seed: per-unit random streams
are spawned from the seed by unit index, so results are identical for any
worker count. Heavy stages (state generation, tomography, repeated
trainings) fan out over a process pool.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, replace
from multiprocessing import get_context

import numpy as np

from .features import (
    Dataset,
    LabeledExample,
    bin_quadratures,
    default_cutoff,
    filter_cutoff_band,
    label_state,
    load_dataset,
    save_dataset,
    split_dataset,
)
from .gaussian import GaussianStateSpec, StateSpecConfig, assemble_covariance, sample_state_spec
from .maxlik import maxlik_wmin
from .mlp import (
    MlpModel,
    TrainConfig,
    load_model,
    precision_recall_curve,
    predict_proba,
    roc_curve,
    save_history,
    save_model,
    train,
)
from .sampling import (
    DEFAULT_PHASE_INTERVALS,
    QuadratureBatch,
    draw_phase_protocol,
    inject_loss_replacement,
    sample_joint_quadratures,
)
from .wigner import (
    DegenerateSubtractionError,
    GAUSSIAN_OP,
    NonGaussianOp,
    WignerForm,
    attenuate,
    build_wigner_form,
    mode_axis_vector,
    wigner_min,
)

__all__ = [
    "MalformedRowError",
    "CorpusConfig",
    "ComparisonConfig",
    "RobustnessConfig",
    "ExperimentConfig",
    "RobustnessReport",
    "ComparisonResult",
    "generate_state",
    "generate_example",
    "cmd_generate",
    "cmd_train",
    "cmd_evaluate",
    "cmd_compare",
    "cmd_robustness",
    "cmd_curves",
    "cmd_ingest",
    "make_experimental_analog",
    "experimental_corpus_config",
]

_MAX_STATE_RESAMPLES = 100


class MalformedRowError(ValueError):
    """An ingested CSV row could not be parsed; carries the line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


# ---------------------------------------------------------------------------
# configuration records


@dataclass(frozen=True)
class CorpusConfig:
    """Parameters of one generated corpus of labeled states.

    The default family draws fully random states (Haar bases, random
    degaussification directions). The "epr_subtracted" family instead mirrors
    the two-mode experimental setup: twin squeezers entangled by a fixed
    beamsplitter basis, with photon subtraction always acting on the second
    mode, so the corpus populates the state manifold the experimental
    replicas live on.
    """

    mode_count: int
    n_states: int = 4000
    reps: int = 1000
    cutoff: float | None = None
    squeezing_max_db: float = 8.0
    thermal_range: tuple[float, float] = (1.0, 1.1)
    loss_range: tuple[float, float] = (0.0, 0.5)
    basis2_probability: float = 0.5
    degauss_probability: float = 2.0 / 3.0
    band_filter: bool = True
    filter_band: float | None = None
    split_ratio: float = 0.8
    family: str = "generic"

    def __post_init__(self) -> None:
        if self.n_states < 1 or self.reps < 1:
            raise ValueError("n_states and reps must be positive")
        if self.cutoff is not None and self.cutoff > 0:
            raise ValueError("cutoff must be <= 0")
        if self.filter_band is not None and self.filter_band >= 0:
            raise ValueError("filter_band must be strictly negative")
        if not 0.0 <= self.degauss_probability <= 1.0:
            raise ValueError("degauss_probability must lie in [0, 1]")
        if self.family not in ("generic", "epr_subtracted"):
            raise ValueError(f"unknown corpus family {self.family!r}")
        if self.family == "epr_subtracted" and self.mode_count != 2:
            raise ValueError("the epr_subtracted family is a two-mode construction")

    @property
    def resolved_filter_band(self) -> float | None:
        """Training-only removal band [band, 0): explicit, or the labeling cutoff."""
        if self.filter_band is not None:
            return self.filter_band
        if self.band_filter and self.resolved_cutoff < 0:
            return self.resolved_cutoff
        return None

    @property
    def resolved_cutoff(self) -> float:
        return default_cutoff(self.mode_count) if self.cutoff is None else self.cutoff

    def state_config(self) -> StateSpecConfig:
        return StateSpecConfig(
            mode_count=self.mode_count,
            squeezing_max_db=self.squeezing_max_db,
            thermal_range=self.thermal_range,
            loss_range=self.loss_range,
            basis2_probability=self.basis2_probability,
        )

    def to_json_dict(self) -> dict:
        return {
            "mode_count": self.mode_count,
            "n_states": self.n_states,
            "reps": self.reps,
            "cutoff": self.cutoff,
            "squeezing_max_db": self.squeezing_max_db,
            "thermal_range": list(self.thermal_range),
            "loss_range": list(self.loss_range),
            "basis2_probability": self.basis2_probability,
            "degauss_probability": self.degauss_probability,
            "band_filter": self.band_filter,
            "filter_band": self.filter_band,
            "split_ratio": self.split_ratio,
            "family": self.family,
        }

    @classmethod
    def from_json_dict(cls, record: dict) -> CorpusConfig:
        record = dict(record)
        for key in ("thermal_range", "loss_range"):
            if key in record:
                record[key] = tuple(record[key])
        return cls(**record)


@dataclass(frozen=True)
class ComparisonConfig:
    """The data-budget comparison: both methods classify the same batches."""

    measurement_counts: tuple[int, ...] = (1000, 100, 30, 10)
    batches: int = 6
    states_per_batch: int = 100
    photon_cutoff: int = 5
    iterations: int = 15

    def to_json_dict(self) -> dict:
        return {
            "measurement_counts": list(self.measurement_counts),
            "batches": self.batches,
            "states_per_batch": self.states_per_batch,
            "photon_cutoff": self.photon_cutoff,
            "iterations": self.iterations,
        }

    @classmethod
    def from_json_dict(cls, record: dict) -> ComparisonConfig:
        record = dict(record)
        if "measurement_counts" in record:
            record["measurement_counts"] = tuple(record["measurement_counts"])
        return cls(**record)


@dataclass(frozen=True)
class RobustnessConfig:
    """The extra-loss study around the experimental two-mode state."""

    loss_grid: tuple[float, ...] = (0.0, 0.02, 0.04, 0.06, 0.08, 0.10, 0.12)
    replicas: int = 100
    trainings: int = 30
    consensus: float = 0.95
    replica_reps: int = 1000
    photon_cutoff: int = 3
    iterations: int = 15
    product_reconstruction: bool = True
    train_states: int = 4000
    train_reps: int = 1000

    def to_json_dict(self) -> dict:
        return {
            "loss_grid": list(self.loss_grid),
            "replicas": self.replicas,
            "trainings": self.trainings,
            "consensus": self.consensus,
            "replica_reps": self.replica_reps,
            "photon_cutoff": self.photon_cutoff,
            "iterations": self.iterations,
            "product_reconstruction": self.product_reconstruction,
            "train_states": self.train_states,
            "train_reps": self.train_reps,
        }

    @classmethod
    def from_json_dict(cls, record: dict) -> RobustnessConfig:
        record = dict(record)
        if "loss_grid" in record:
            record["loss_grid"] = tuple(record["loss_grid"])
        return cls(**record)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one CLI invocation needs, loadable from a JSON file."""

    corpus: CorpusConfig
    train: TrainConfig = TrainConfig()
    comparison: ComparisonConfig = ComparisonConfig()
    robustness: RobustnessConfig = RobustnessConfig()
    master_seed: int = 0
    workers: int = 1

    def to_json_dict(self) -> dict:
        return {
            "corpus": self.corpus.to_json_dict(),
            "train": self.train.to_json_dict(),
            "comparison": self.comparison.to_json_dict(),
            "robustness": self.robustness.to_json_dict(),
            "master_seed": self.master_seed,
            "workers": self.workers,
        }

    @classmethod
    def from_json_dict(cls, record: dict) -> ExperimentConfig:
        return cls(
            corpus=CorpusConfig.from_json_dict(record["corpus"]),
            train=TrainConfig.from_json_dict(record.get("train", {})),
            comparison=ComparisonConfig.from_json_dict(record.get("comparison", {})),
            robustness=RobustnessConfig.from_json_dict(record.get("robustness", {})),
            master_seed=record.get("master_seed", 0),
            workers=record.get("workers", 1),
        )

    @classmethod
    def from_json_file(cls, path) -> ExperimentConfig:
        with open(path) as handle:
            return cls.from_json_dict(json.load(handle))


# ---------------------------------------------------------------------------
# the per-state pipeline


def _spawn_rngs(master_seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(seq)) for seq in np.random.SeedSequence(master_seed).spawn(count)]


def _draw_operation(mode_count: int, degauss_probability: float, rng: np.random.Generator) -> NonGaussianOp:
    if rng.uniform() >= degauss_probability:
        return GAUSSIAN_OP
    kind = "add" if rng.uniform() < 0.5 else "subtract"
    direction = rng.standard_normal(2 * mode_count)
    direction /= np.linalg.norm(direction)
    return NonGaussianOp(kind, direction)


def generate_state(
    config: CorpusConfig, rng: np.random.Generator
) -> tuple[WignerForm, GaussianStateSpec, int]:
    """Sample a spec and operation until a valid Wigner form emerges.

    States failing photon subtraction (vacuum-like mode) are resampled;
    the resample count is returned for the manifest.
    """
    if config.family == "epr_subtracted":
        return _generate_epr_family_state(config, rng)
    state_config = config.state_config()
    resamples = 0
    while True:
        spec = sample_state_spec(state_config, rng)
        cov = assemble_covariance(spec)
        op = _draw_operation(config.mode_count, config.degauss_probability, rng)
        try:
            return build_wigner_form(cov, op), spec, resamples
        except DegenerateSubtractionError:
            resamples += 1
            if resamples > _MAX_STATE_RESAMPLES:
                raise


def _generate_epr_family_state(
    config: CorpusConfig, rng: np.random.Generator
) -> tuple[WignerForm, GaussianStateSpec, int]:
    """One state of the experimental family: twin squeezers, fixed
    entangling basis, subtraction on the second mode or none."""
    resamples = 0
    while True:
        squeezing = rng.uniform(0.0, config.squeezing_max_db)
        thermal = rng.uniform(config.thermal_range[0], config.thermal_range[1])
        loss = rng.uniform(config.loss_range[0], config.loss_range[1])
        spec = GaussianStateSpec(
            mode_count=2,
            thermal_eigenvalues=np.array([thermal, thermal]),
            squeezing_db=np.array([squeezing, squeezing]),
            basis_change_1=np.eye(4),
            basis_change_2=_balanced_beamsplitter(2, 1, 2) @ _rotation(2, 2, np.pi / 2.0),
            loss=float(loss),
        )
        cov = assemble_covariance(spec)
        if rng.uniform() < config.degauss_probability:
            op = NonGaussianOp("subtract", mode_axis_vector(2, 2, 0.0))
        else:
            op = GAUSSIAN_OP
        try:
            return build_wigner_form(cov, op), spec, resamples
        except DegenerateSubtractionError:
            resamples += 1
            if resamples > _MAX_STATE_RESAMPLES:
                raise


def generate_example(
    config: CorpusConfig, rng: np.random.Generator, state_id: str
) -> tuple[LabeledExample, QuadratureBatch, dict]:
    """Full pipeline for one state: spec, form, protocol, samples, features, label."""
    form, spec, resamples = generate_state(config, rng)
    protocol = draw_phase_protocol(config.mode_count, rng)
    batch = sample_joint_quadratures(form, protocol, config.reps, rng, state_id=state_id)
    w_min = wigner_min(form)
    label = label_state(w_min, config.resolved_cutoff)
    features = bin_quadratures(batch, config.mode_count)
    example = LabeledExample(state_id=state_id, features=features, w_min=w_min, label=label)
    info = {"resamples": resamples, "op": form.op.kind, "label": label}
    return example, batch, info


def _generate_worker(task) -> tuple[LabeledExample, dict]:
    config, entropy, index = task
    rng = np.random.Generator(np.random.PCG64(entropy))
    example, _, info = generate_example(config, rng, state_id=f"state_{index:06d}")
    return example, info


def _run_parallel(worker, tasks, workers: int, chunksize: int = 1):
    if workers <= 1:
        return [worker(task) for task in tasks]
    with get_context("fork").Pool(workers) as pool:
        return list(pool.imap(worker, tasks, chunksize=chunksize))


def cmd_generate(
    config: CorpusConfig,
    master_seed: int,
    out_path=None,
    workers: int = 1,
) -> tuple[Dataset, dict]:
    """Generate a labeled corpus; optionally write the dataset file + manifest.

    The cutoff band [cutoff, 0) is removed when band filtering is on and the
    cutoff is strictly negative; the stratified split is assigned afterwards.
    """
    sequences = np.random.SeedSequence(master_seed).spawn(config.n_states + 1)
    tasks = [(config, sequences[i], i) for i in range(config.n_states)]
    results = _run_parallel(_generate_worker, tasks, workers, chunksize=4)
    examples = [example for example, _ in results]
    infos = [info for _, info in results]
    cutoff = config.resolved_cutoff
    n_before = len(examples)
    band = config.resolved_filter_band
    if band is not None:
        examples = filter_cutoff_band(examples, band)
    dataset = Dataset(
        mode_count=config.mode_count,
        cutoff=cutoff,
        examples=examples,
        seed=master_seed,
        provenance="generated",
    )
    split_rng = np.random.Generator(np.random.PCG64(sequences[-1]))
    dataset = split_dataset(dataset, ratio=config.split_ratio, rng=split_rng)
    labels = [ex.label for ex in dataset.examples]
    manifest = {
        "config": config.to_json_dict(),
        "master_seed": master_seed,
        "n_generated": n_before,
        "n_kept": len(examples),
        "n_band_filtered": n_before - len(examples),
        "n_negative": int(sum(labels)),
        "n_positive": int(len(labels) - sum(labels)),
        "resampled_states": int(sum(info["resamples"] for info in infos)),
        "operations": {
            kind: int(sum(1 for info in infos if info["op"] == kind))
            for kind in ("none", "add", "subtract")
        },
    }
    if out_path is not None:
        save_dataset(dataset, out_path)
        with open(str(out_path) + ".manifest.json", "w") as handle:
            json.dump(manifest, handle, indent=2)
    return dataset, manifest


# ---------------------------------------------------------------------------
# training and evaluation commands


def cmd_train(dataset_path, config: TrainConfig, model_path=None, history_path=None):
    """Train on a dataset file; write the model and history files."""
    dataset = load_dataset(dataset_path)
    model, history = train(dataset, config)
    if model_path is not None:
        save_model(model, model_path, train_config=config, dataset_header=dataset.header_dict())
    if history_path is not None:
        save_history(history, history_path)
    return model, history


def cmd_evaluate(model_path, dataset_path, threshold: float = 0.5, split: str = "val") -> dict:
    """Confusion metrics of a saved model on one split of a dataset file."""
    from .mlp import evaluate

    model = load_model(model_path)
    dataset = load_dataset(dataset_path)
    examples = dataset.subset(split) if dataset.split is not None else dataset.examples
    metrics = evaluate(model, examples, threshold)
    return {
        "split": split,
        "threshold": threshold,
        "accuracy": metrics.accuracy,
        "mse": metrics.mse,
        "true_positives": metrics.true_positives,
        "true_negatives": metrics.true_negatives,
        "false_positives": metrics.false_positives,
        "false_negatives": metrics.false_negatives,
        "recall": metrics.recall,
        "specificity": metrics.specificity,
        "precision": metrics.precision,
    }


def cmd_curves(model_path, dataset_path, roc_path=None, pr_path=None, grid_points: int = 101):
    """Threshold-swept ROC and precision-recall curves of a saved model."""
    model = load_model(model_path)
    dataset = load_dataset(dataset_path)
    examples = dataset.subset("val") if dataset.split is not None else dataset.examples
    thresholds = np.linspace(0.0, 1.0, grid_points)
    roc = roc_curve(model, examples, thresholds)
    pr = precision_recall_curve(model, examples, thresholds)
    if roc_path is not None:
        with open(roc_path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["threshold", "false_positive_rate", "true_positive_rate"])
            for t, f, r in zip(roc.thresholds, roc.false_positive_rate, roc.true_positive_rate):
                writer.writerow([repr(float(t)), repr(float(f)), repr(float(r))])
    if pr_path is not None:
        with open(pr_path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["threshold", "recall", "precision"])
            for t, r, p in zip(pr.thresholds, pr.recall, pr.precision):
                writer.writerow([repr(float(t)), repr(float(r)), repr(float(p))])
    return roc, pr


# ---------------------------------------------------------------------------
# the data-budget comparison


@dataclass
class ComparisonResult:
    """Per-(method, k, batch) correct fractions plus likelihood diagnostics."""

    rows: list[dict]
    loglik_min_step: float

    def fractions(self, method: str, measurements: int) -> np.ndarray:
        return np.array(
            [
                row["fraction_correct"]
                for row in self.rows
                if row["method"] == method and row["k"] == measurements
            ]
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["method", "k", "batch", "fraction_correct"])
            for row in self.rows:
                writer.writerow([row["method"], row["k"], row["batch"], repr(row["fraction_correct"])])


def _compare_worker(task) -> dict:
    corpus_config, comparison, model, reps, batch_index, entropy, index = task
    rng = np.random.Generator(np.random.PCG64(entropy))
    config = replace(corpus_config, reps=reps)
    example, batch, _ = generate_example(config, rng, state_id=f"cmp_{reps}_{batch_index}_{index:04d}")
    nn_label = int(predict_proba(model, example.features[None, :])[0] > 0.5)
    w_min, traces = maxlik_wmin(
        batch,
        corpus_config.mode_count,
        comparison.photon_cutoff,
        comparison.iterations,
    )
    ml_label = int(w_min < config.resolved_cutoff)
    min_step = min(float(np.min(np.diff(trace))) for trace in traces)
    return {
        "k": reps,
        "batch": batch_index,
        "truth": example.label,
        "nn": nn_label,
        "maxlik": ml_label,
        "loglik_min_step": min_step,
    }


def cmd_compare(
    corpus_config: CorpusConfig,
    comparison: ComparisonConfig,
    model: MlpModel,
    master_seed: int,
    workers: int = 1,
    out_path=None,
) -> ComparisonResult:
    """Classify fresh states with the trained network and with tomography.

    For every measurement budget k and batch, ``states_per_batch`` fresh
    labeled states are generated; both methods see the identical k-repetition
    quadrature batches, and per-batch correct fractions are reported.
    """
    cells = [
        (reps, batch)
        for reps in comparison.measurement_counts
        for batch in range(1, comparison.batches + 1)
    ]
    n_states = len(cells) * comparison.states_per_batch
    sequences = np.random.SeedSequence(master_seed).spawn(n_states)
    tasks = []
    flat = 0
    for reps, batch_index in cells:
        for index in range(comparison.states_per_batch):
            tasks.append((corpus_config, comparison, model, reps, batch_index, sequences[flat], index))
            flat += 1
    outcomes = _run_parallel(_compare_worker, tasks, workers, chunksize=2)
    rows = []
    position = 0
    for reps, batch_index in cells:
        chunk = outcomes[position : position + comparison.states_per_batch]
        position += comparison.states_per_batch
        for method in ("nn", "maxlik"):
            correct = np.mean([o["truth"] == o[method] for o in chunk])
            rows.append(
                {"method": method, "k": reps, "batch": batch_index, "fraction_correct": float(correct)}
            )
    result = ComparisonResult(
        rows=rows,
        loglik_min_step=min(o["loglik_min_step"] for o in outcomes),
    )
    if out_path is not None:
        result.to_csv(out_path)
    return result


# ---------------------------------------------------------------------------
# the experimental analog and the loss-robustness study


def _rotation(mode_count: int, mode: int, theta: float) -> np.ndarray:
    out = np.eye(2 * mode_count)
    i, j = mode - 1, mode_count + mode - 1
    out[i, i] = np.cos(theta)
    out[i, j] = np.sin(theta)
    out[j, i] = -np.sin(theta)
    out[j, j] = np.cos(theta)
    return out


def _balanced_beamsplitter(mode_count: int, mode_a: int, mode_b: int) -> np.ndarray:
    mixer = np.eye(mode_count)
    mixer[mode_a - 1, mode_a - 1] = mixer[mode_a - 1, mode_b - 1] = 1.0 / np.sqrt(2.0)
    mixer[mode_b - 1, mode_a - 1] = 1.0 / np.sqrt(2.0)
    mixer[mode_b - 1, mode_b - 1] = -1.0 / np.sqrt(2.0)
    out = np.zeros((2 * mode_count, 2 * mode_count))
    out[:mode_count, :mode_count] = mixer
    out[mode_count:, mode_count:] = mixer
    return out


# Homodyne settings of the stand-in: one fixed phase per slot, maximally
# spread (the interval midpoints). Random phase draws can cluster and bias
# the three-angle tomography of the subtracted mode.
MIDPOINT_PHASE_INTERVALS = np.array(
    [[np.pi / 6.0, np.pi / 6.0], [np.pi / 2.0, np.pi / 2.0], [5.0 * np.pi / 6.0, 5.0 * np.pi / 6.0]]
)


def make_experimental_analog(
    rng: np.random.Generator,
    reps: int = 2500,
    squeezing_db: float = 2.0,
    thermal: float = 1.06,
    loss: float = 0.12,
    detection_loss: float = 0.04,
    state_id: str = "epr_subtracted",
) -> tuple[WignerForm, QuadratureBatch]:
    """Simulated stand-in for the photon-subtracted two-mode entangled state.

    Two identically squeezed thermal modes are turned into an entangled pair
    by a phase rotation plus a balanced beamsplitter; the source loss acts on
    the covariance, a photon is subtracted from the second mode, and the
    homodyne detection inefficiency attenuates the subtracted state. The
    defaults are calibrated to the measured characteristics of the
    experimental state rather than to the training-corpus maxima: the scaled
    origin value (2 pi)^2 W(0) is about -0.07, safely below the
    faint-negativity band removed from the training corpora, and the product
    of the two reduced-mode origin values sits in the reported range. The
    base batch is measured at the fixed spread phases of
    ``MIDPOINT_PHASE_INTERVALS``.
    """
    spec = GaussianStateSpec(
        mode_count=2,
        thermal_eigenvalues=np.array([thermal, thermal]),
        squeezing_db=np.array([squeezing_db, squeezing_db]),
        basis_change_1=np.eye(4),
        basis_change_2=_balanced_beamsplitter(2, 1, 2) @ _rotation(2, 2, np.pi / 2.0),
        loss=loss,
    )
    cov = assemble_covariance(spec)
    form = build_wigner_form(cov, NonGaussianOp("subtract", mode_axis_vector(2, 2, 0.0)))
    if detection_loss > 0:
        form = attenuate(form, detection_loss)
    protocol = draw_phase_protocol(2, rng, MIDPOINT_PHASE_INTERVALS)
    batch = sample_joint_quadratures(form, protocol, reps, rng, state_id=state_id)
    return form, batch


def experimental_corpus_config(n_states: int = 4000, reps: int = 1000) -> CorpusConfig:
    """Training corpus mirroring the experimental setup, no cutoff.

    States follow the epr_subtracted family; the uncertain physical
    parameters are randomized around the calibrated values (squeezing up to
    the 3 dB maximum, thermal noise up to 1.11, losses spanning the 12%
    estimate), so the corpus covers both sides of the negativity threshold
    along the directions the lossy replicas move in. As in the main corpora,
    a faint-negativity band is removed from training so the two classes
    separate cleanly; labels still use the zero cutoff.
    """
    return CorpusConfig(
        mode_count=2,
        n_states=n_states,
        reps=reps,
        cutoff=0.0,
        squeezing_max_db=3.0,
        thermal_range=(1.0, 1.11),
        loss_range=(0.0, 0.3),
        band_filter=False,
        filter_band=-0.05 / (2.0 * np.pi) ** 2,
        family="epr_subtracted",
    )


@dataclass
class RobustnessReport:
    """Consensus statistics of many trainings across injected-loss levels."""

    loss_levels: list[float]
    consensus: float
    fraction_negative: np.ndarray  # (levels, trainings)
    fraction_positive: np.ndarray
    maxlik_wmin_mean: list[float]
    maxlik_wmin_std: list[float]
    loglik_min_step: float

    @property
    def trainings(self) -> int:
        return self.fraction_negative.shape[1]

    def consensus_negative_pct(self) -> list[float]:
        return [float(100.0 * np.mean(self.fraction_negative[i] >= self.consensus)) for i in range(len(self.loss_levels))]

    def consensus_positive_pct(self) -> list[float]:
        return [float(100.0 * np.mean(self.fraction_positive[i] >= self.consensus)) for i in range(len(self.loss_levels))]

    def to_json_dict(self) -> dict:
        return {
            "loss_levels": self.loss_levels,
            "consensus": self.consensus,
            "fraction_negative": self.fraction_negative.tolist(),
            "fraction_positive": self.fraction_positive.tolist(),
            "consensus_negative_pct": self.consensus_negative_pct(),
            "consensus_positive_pct": self.consensus_positive_pct(),
            "maxlik_wmin_mean": self.maxlik_wmin_mean,
            "maxlik_wmin_std": self.maxlik_wmin_std,
            "loglik_min_step": self.loglik_min_step,
        }

    def save_json(self, path) -> None:
        with open(path, "w") as handle:
            json.dump(self.to_json_dict(), handle, indent=2)

    @classmethod
    def from_json_dict(cls, record: dict) -> RobustnessReport:
        return cls(
            loss_levels=list(record["loss_levels"]),
            consensus=record["consensus"],
            fraction_negative=np.array(record["fraction_negative"]),
            fraction_positive=np.array(record["fraction_positive"]),
            maxlik_wmin_mean=list(record["maxlik_wmin_mean"]),
            maxlik_wmin_std=list(record["maxlik_wmin_std"]),
            loglik_min_step=record["loglik_min_step"],
        )


def _train_worker(task) -> MlpModel:
    dataset, config = task
    model, _ = train(dataset, config)
    return model


def _replica_worker(task) -> dict:
    base, level, robust, entropy = task
    rng = np.random.Generator(np.random.PCG64(entropy))
    unique_reps = np.unique(base.repetition).size
    replica = base
    if robust.replica_reps < unique_reps:
        replica = base.subsample_repetitions(robust.replica_reps, rng)
    replica = inject_loss_replacement(replica, level, rng)
    features = bin_quadratures(replica, 2)
    w_min, traces = maxlik_wmin(
        replica,
        2,
        robust.photon_cutoff,
        robust.iterations,
        product=robust.product_reconstruction,
    )
    min_step = min(float(np.min(np.diff(trace))) for trace in traces)
    return {"features": features, "w_min": w_min, "loglik_min_step": min_step}


def cmd_robustness(
    robust: RobustnessConfig,
    base_batch: QuadratureBatch,
    master_seed: int,
    workers: int = 1,
    corpus: CorpusConfig | None = None,
    train_config: TrainConfig = TrainConfig(),
    models: list[MlpModel] | None = None,
    out_path=None,
) -> RobustnessReport:
    """Feed lossy replicas of one state to many trained networks.

    For every injected-loss level, ``replicas`` subsampled copies of the base
    batch receive vacuum replacement; each replica is classified by every one
    of the ``trainings`` networks (trained on replacement-free corpora with
    the experimental parameters) and reconstructed by tomography. The report
    carries per-training negative/positive fractions and the tomography
    minimum statistics.
    """
    if corpus is None:
        corpus = experimental_corpus_config(robust.train_states, robust.train_reps)
    root = np.random.SeedSequence(master_seed)
    corpus_seed, train_root, replica_root = root.spawn(3)
    if models is None:
        dataset, _ = cmd_generate(corpus, corpus_seed.generate_state(1)[0], workers=workers)
        train_seeds = train_root.generate_state(robust.trainings)
        configs = [replace(train_config, seed=int(seed)) for seed in train_seeds]
        models = _run_parallel(_train_worker, [(dataset, cfg) for cfg in configs], workers)
    elif len(models) != robust.trainings:
        raise ValueError(f"expected {robust.trainings} models, got {len(models)}")

    levels = list(robust.loss_grid)
    replica_sequences = replica_root.spawn(len(levels) * robust.replicas)
    tasks = []
    flat = 0
    for level in levels:
        for _ in range(robust.replicas):
            tasks.append((base_batch, float(level), robust, replica_sequences[flat]))
            flat += 1
    outcomes = _run_parallel(_replica_worker, tasks, workers, chunksize=4)

    fraction_negative = np.zeros((len(levels), robust.trainings))
    wmin_mean, wmin_std = [], []
    position = 0
    for li, level in enumerate(levels):
        chunk = outcomes[position : position + robust.replicas]
        position += robust.replicas
        feature_matrix = np.stack([o["features"] for o in chunk])
        wmins = np.array([o["w_min"] for o in chunk])
        wmin_mean.append(float(np.mean(wmins)))
        wmin_std.append(float(np.std(wmins)))
        for ti, model in enumerate(models):
            votes = predict_proba(model, feature_matrix) > train_config.threshold
            fraction_negative[li, ti] = float(np.mean(votes))
    report = RobustnessReport(
        loss_levels=[float(l) for l in levels],
        consensus=robust.consensus,
        fraction_negative=fraction_negative,
        fraction_positive=1.0 - fraction_negative,
        maxlik_wmin_mean=wmin_mean,
        maxlik_wmin_std=wmin_std,
        loglik_min_step=min(o["loglik_min_step"] for o in outcomes),
    )
    if out_path is not None:
        report.save_json(out_path)
    return report


# ---------------------------------------------------------------------------
# external data ingestion


def cmd_ingest(
    in_path,
    out_path=None,
    mode_column: str = "mode",
    phase_column: str = "phase",
    value_column: str = "value",
    state_id: str = "ingested",
    intervals: np.ndarray | None = None,
) -> QuadratureBatch:
    """Convert an external quadrature CSV into the canonical batch schema.

    Rows need a mode index, a phase in radians, and a quadrature value.
    Phases outside [0, 2pi) are folded back with a warning; each row is
    assigned the phase slot whose interval midpoint is nearest modulo pi
    (quadrature axes have period pi). Repetition indices count per
    (mode, slot) group in file order.
    """
    intervals = DEFAULT_PHASE_INTERVALS if intervals is None else np.asarray(intervals, dtype=float)
    midpoints = intervals.mean(axis=1)
    with open(in_path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{in_path}: file is empty")
        try:
            columns = {name: header.index(name) for name in (mode_column, phase_column, value_column)}
        except ValueError as exc:
            raise ValueError(f"{in_path}: missing required column: {exc}") from exc
        modes, phases, values = [], [], []
        for line_number, row in enumerate(reader, start=2):
            if not row or not any(field.strip() for field in row):
                continue
            try:
                mode = int(row[columns[mode_column]])
                phase = float(row[columns[phase_column]])
                value = float(row[columns[value_column]])
            except (ValueError, IndexError) as exc:
                raise MalformedRowError(line_number, str(exc)) from exc
            if not math.isfinite(phase) or not math.isfinite(value):
                raise MalformedRowError(line_number, "non-finite phase or value")
            if mode < 1:
                raise MalformedRowError(line_number, f"mode index {mode} must be >= 1")
            if not 0.0 <= phase < 2.0 * np.pi:
                warnings.warn(f"line {line_number}: phase {phase:g} folded into [0, 2pi)")
                phase = phase % (2.0 * np.pi)
            modes.append(mode)
            phases.append(phase)
            values.append(value)
    if not values:
        raise ValueError(f"{in_path}: no data rows")
    modes_arr = np.array(modes)
    phases_arr = np.array(phases)
    # nearest interval midpoint, with the pi-periodicity of quadrature axes
    deltas = np.abs(phases_arr[:, None] % np.pi - midpoints[None, :])
    deltas = np.minimum(deltas, np.pi - deltas)
    slots = np.argmin(deltas, axis=1) + 1
    repetitions = np.zeros(len(values), dtype=int)
    counters: dict[tuple[int, int], int] = {}
    for i, key in enumerate(zip(modes, slots)):
        counters[key] = counters.get(key, 0) + 1
        repetitions[i] = counters[key]
    batch = QuadratureBatch(
        state_id=state_id,
        repetition=repetitions,
        mode=modes_arr,
        phase_index=slots,
        phase=phases_arr,
        value=np.array(values),
        is_vacuum_replacement=np.zeros(len(values), dtype=bool),
    )
    if out_path is not None:
        batch.to_csv(out_path)
    return batch
