"""Histogram features, negativity labels, and dataset files.

Each (mode, phase slot) group of quadratures is reduced to five occurrence
frequencies over [-5, 5], giving a 15*m feature vector per state. Labels
compare the analytic Wigner minimum against a negative cutoff; a band of
near-zero minima can be removed from training corpora.
"""

from __future__ import annotations

import json
import os
import tempfile
import warnings
from dataclasses import dataclass

import numpy as np

from .sampling import QuadratureBatch

__all__ = [
    "BIN_EDGES",
    "EmptyGroupWarning",
    "LabeledExample",
    "Dataset",
    "default_cutoff",
    "bin_quadratures",
    "label_state",
    "filter_cutoff_band",
    "split_dataset",
    "dataset_arrays",
    "save_dataset",
    "load_dataset",
]

# Left-closed bins; the top edge at +5 is included so every in-range value
# lands in exactly one bin. Out-of-range values count toward the group
# total but toward no bin.
BIN_EDGES = np.array([-5.0, -3.0, -1.0, 1.0, 3.0, 5.0])


class EmptyGroupWarning(UserWarning):
    """A (mode, phase slot) group contained no measurements."""


def default_cutoff(mode_count: int) -> float:
    """Labeling cutoff -0.1 / (2pi)^m, one tenth of the maximal negativity."""
    return -0.1 / (2.0 * np.pi) ** mode_count


def bin_quadratures(batch: QuadratureBatch, mode_count: int) -> np.ndarray:
    """Reduce a batch to its 15*m histogram feature vector.

    Features are grouped mode-major: the five frequencies of (mode 1,
    slot 1) come first, then (mode 1, slot 2), and so on. Frequencies are
    counts divided by the group's total number of measurements, including
    any outcomes that fell outside [-5, 5].
    """
    modes = np.unique(batch.mode)
    if modes.size and (modes.min() < 1 or modes.max() > mode_count):
        raise ValueError(f"batch contains modes outside 1..{mode_count}")
    slots = np.unique(batch.phase_index)
    if slots.size and (slots.min() < 1 or slots.max() > 3):
        raise ValueError("batch contains phase indices outside 1..3")
    features = np.zeros(15 * mode_count)
    for mode in range(1, mode_count + 1):
        for slot in range(1, 4):
            values = batch.values_for(mode, slot)
            offset = ((mode - 1) * 3 + (slot - 1)) * 5
            if values.size == 0:
                warnings.warn(
                    f"state {batch.state_id}: no measurements for mode {mode}, phase slot {slot}",
                    EmptyGroupWarning,
                )
                continue
            counts, _ = np.histogram(values, bins=BIN_EDGES)
            features[offset : offset + 5] = counts / values.size
    return features


def label_state(w_min: float, cutoff: float) -> int:
    """1 when the Wigner minimum falls strictly below the cutoff, else 0."""
    if cutoff > 0:
        raise ValueError(f"cutoff must be <= 0, got {cutoff}")
    return 1 if w_min < cutoff else 0


@dataclass
class LabeledExample:
    """One training/evaluation row: features, analytic minimum, binary label."""

    state_id: str
    features: np.ndarray
    w_min: float
    label: int


def filter_cutoff_band(examples: list[LabeledExample], cutoff: float) -> list[LabeledExample]:
    """Drop examples whose minimum lies in [cutoff, 0).

    Removing this ambiguous band from training corpora sharpens the decision
    boundary; evaluation data should not be filtered.
    """
    if cutoff >= 0:
        raise ValueError(f"band filtering needs a strictly negative cutoff, got {cutoff}")
    return [ex for ex in examples if not (cutoff <= ex.w_min < 0.0)]


@dataclass
class Dataset:
    """A labeled corpus plus its split assignment and provenance header."""

    mode_count: int
    cutoff: float
    examples: list[LabeledExample]
    split: list[str] | None = None
    seed: int | None = None
    provenance: str = ""

    def __len__(self) -> int:
        return len(self.examples)

    def subset(self, split_name: str) -> list[LabeledExample]:
        if self.split is None:
            raise ValueError("dataset has no split assignment")
        return [ex for ex, s in zip(self.examples, self.split) if s == split_name]

    def header_dict(self) -> dict:
        return {
            "mode_count": self.mode_count,
            "cutoff": self.cutoff,
            "bins": BIN_EDGES.tolist(),
            "seed": self.seed,
            "provenance": self.provenance,
        }


def split_dataset(dataset: Dataset, ratio: float = 0.8, rng: np.random.Generator | None = None) -> Dataset:
    """Assign a stratified train/validation split.

    The total training count is round(ratio * N); it is distributed over the
    two classes proportionally (largest remainder), so both splits keep the
    corpus class balance.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must lie in (0, 1), got {ratio}")
    n = len(dataset)
    if n < 10:
        raise ValueError(f"refusing to split a dataset of only {n} examples")
    rng = np.random.default_rng(0) if rng is None else rng
    labels = np.array([ex.label for ex in dataset.examples])
    n_train = int(round(ratio * n))
    class_indices = [np.flatnonzero(labels == cls) for cls in (0, 1)]
    quotas = [ratio * idx.size for idx in class_indices]
    base = [int(np.floor(q)) for q in quotas]
    shortfall = n_train - sum(base)
    remainders = np.array([q - b for q, b in zip(quotas, base)])
    for cls in np.argsort(-remainders)[:shortfall]:
        base[cls] += 1
    split = np.array(["val"] * n, dtype=object)
    for cls, idx in enumerate(class_indices):
        chosen = rng.permutation(idx)[: base[cls]]
        split[chosen] = "train"
    return Dataset(
        mode_count=dataset.mode_count,
        cutoff=dataset.cutoff,
        examples=list(dataset.examples),
        split=list(split),
        seed=dataset.seed,
        provenance=dataset.provenance,
    )


def dataset_arrays(dataset: Dataset, split_name: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Stack (features, labels) for the whole corpus or one split."""
    examples = dataset.examples if split_name is None else dataset.subset(split_name)
    if not examples:
        raise ValueError(f"no examples in split {split_name!r}")
    x = np.stack([ex.features for ex in examples])
    y = np.array([ex.label for ex in examples], dtype=float)
    return x, y


def _atomic_write(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset file: one JSON header line, then CSV rows.

    The write is atomic (temp file + rename) so concurrent readers never
    observe a partial corpus.
    """
    lines = [json.dumps(dataset.header_dict())]
    n_features = 15 * dataset.mode_count
    columns = ["state_id"] + [f"f{i}" for i in range(n_features)] + ["w_min", "label", "split"]
    lines.append(",".join(columns))
    split = dataset.split if dataset.split is not None else [""] * len(dataset)
    for example, assigned in zip(dataset.examples, split):
        if example.features.shape != (n_features,):
            raise ValueError(
                f"example {example.state_id} has {example.features.shape} features, expected {n_features}"
            )
        row = [example.state_id]
        row.extend(repr(float(v)) for v in example.features)
        row.append(repr(float(example.w_min)))
        row.append(str(int(example.label)))
        row.append(assigned)
        lines.append(",".join(row))
    _atomic_write(path, "\n".join(lines) + "\n")


def load_dataset(path) -> Dataset:
    with open(path) as handle:
        header = json.loads(handle.readline())
        column_line = handle.readline().rstrip("\n")
        rows = [line.rstrip("\n").split(",") for line in handle if line.strip()]
    mode_count = int(header["mode_count"])
    n_features = 15 * mode_count
    expected_columns = 1 + n_features + 3
    examples = []
    split: list[str] = []
    for row in rows:
        if len(row) != expected_columns:
            raise ValueError(f"{path}: row with {len(row)} fields, expected {expected_columns}")
        examples.append(
            LabeledExample(
                state_id=row[0],
                features=np.array([float(v) for v in row[1 : 1 + n_features]]),
                w_min=float(row[1 + n_features]),
                label=int(row[2 + n_features]),
            )
        )
        split.append(row[3 + n_features])
    has_split = any(split)
    return Dataset(
        mode_count=mode_count,
        cutoff=float(header["cutoff"]),
        examples=examples,
        split=split if has_split else None,
        seed=header.get("seed"),
        provenance=header.get("provenance", ""),
    )
