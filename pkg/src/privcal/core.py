"""Confidence, accuracy, NLL and binned-ECE statistics over logit datasets.

Everything here is deterministic and noiseless. The private protocol layer
queries these functions on each source's shard and noises the results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

DEFAULT_BINS = 15
DEFAULT_NLL_CLIP = 10.0


@dataclass(frozen=True)
class LabeledLogits:
    """One sample: raw logit vector plus ground-truth class index."""

    logits: np.ndarray
    label: int

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        if logits.ndim != 1 or logits.shape[0] < 2:
            raise ValueError(f"need a logit vector with at least 2 classes, got shape {logits.shape}")
        if not np.all(np.isfinite(logits)):
            raise ValueError("logits must be finite")
        label = int(self.label)
        if not 0 <= label < logits.shape[0]:
            raise ValueError(f"label {label} out of range for {logits.shape[0]} classes")
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "label", label)

    @property
    def n_classes(self) -> int:
        return self.logits.shape[0]


@dataclass(frozen=True)
class Dataset:
    """A homogeneous collection of labelled logit vectors.

    Stored column-wise: ``logits`` has shape (n, m) and ``labels`` shape (n,).
    """

    logits: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        labels = np.asarray(self.labels)
        if logits.ndim != 2:
            raise ValueError(f"logits must be 2-D (n, m), got shape {logits.shape}")
        n, m = logits.shape
        if m < 2:
            raise ValueError("need at least 2 classes")
        if labels.shape != (n,):
            raise ValueError(f"labels shape {labels.shape} does not match {n} samples")
        if n and not np.all(np.isfinite(logits)):
            raise ValueError("logits must be finite")
        if labels.dtype.kind not in "iu":
            if n and not np.all(labels == np.round(labels)):
                raise ValueError("labels must be integers")
        labels = labels.astype(np.int64)
        if n and (labels.min() < 0 or labels.max() >= m):
            raise ValueError(f"labels must lie in [0, {m - 1}]")
        logits.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_samples(cls, samples: Sequence[LabeledLogits]) -> "Dataset":
        if not samples:
            raise ValueError("cannot infer class count from an empty sample list")
        m = samples[0].n_classes
        if any(s.n_classes != m for s in samples):
            raise ValueError("samples have differing class counts")
        return cls(np.stack([s.logits for s in samples]), np.array([s.label for s in samples]))

    def __len__(self) -> int:
        return self.logits.shape[0]

    def __iter__(self) -> Iterator[LabeledLogits]:
        for row, label in zip(self.logits, self.labels):
            yield LabeledLogits(row, int(label))

    def __getitem__(self, idx) -> LabeledLogits:
        return LabeledLogits(self.logits[idx], int(self.labels[idx]))

    @property
    def n_classes(self) -> int:
        return self.logits.shape[1]

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.logits[indices], self.labels[indices])


@dataclass(frozen=True)
class BinningScheme:
    """Equal-width partition of [0, 1] into ``k`` bins; the last bin is closed at 1."""

    k: int = DEFAULT_BINS

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"bin count must be a positive integer, got {self.k}")

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.k + 1)


@dataclass(frozen=True)
class ConfidenceStats:
    """Per-bin tallies of sample count, correct count and confidence sum."""

    n_bin: np.ndarray
    n_correct: np.ndarray
    conf_sum: np.ndarray
    n_total: int = field(default=0)

    @property
    def k(self) -> int:
        return self.n_bin.shape[0]


def _check_temperature(T: float) -> float:
    T = float(T)
    if not T > 0 or math.isnan(T):
        raise ValueError(f"temperature must be positive, got {T}")
    return T


def _check_nonempty(data: Dataset) -> None:
    if len(data) == 0:
        raise ValueError("dataset is empty")


def predict_label(sample: LabeledLogits) -> int:
    # np.argmax returns the first maximal index, which is the tie rule we want.
    return int(np.argmax(sample.logits))


def predict_labels(data: Dataset) -> np.ndarray:
    return np.argmax(data.logits, axis=1)


def softmax(logits: np.ndarray, T: float = 1.0) -> np.ndarray:
    """Temperature softmax along the last axis, shifted by the max logit."""
    T = _check_temperature(T)
    z = np.asarray(logits, dtype=np.float64) / T
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _confidences(logits: np.ndarray, T: float) -> np.ndarray:
    z = logits / T
    z = z - z.max(axis=-1, keepdims=True)
    # The maximal entry contributes exp(0) = 1 to the numerator.
    return 1.0 / np.exp(z).sum(axis=-1)


def confidence(sample: LabeledLogits, T: float = 1.0) -> float:
    """Largest class probability of ``sample`` after dividing its logits by ``T``."""
    T = _check_temperature(T)
    return float(_confidences(sample.logits, T))


def confidences(data: Dataset, T: float = 1.0) -> np.ndarray:
    T = _check_temperature(T)
    return _confidences(data.logits, T)


def correctness(data: Dataset) -> np.ndarray:
    """Boolean vector: predicted label equals the true label."""
    return predict_labels(data) == data.labels


def accuracy(data: Dataset) -> float:
    _check_nonempty(data)
    return float(np.mean(correctness(data)))


def average_confidence(data: Dataset, T: float = 1.0) -> float:
    _check_nonempty(data)
    return float(np.mean(confidences(data, T)))


def nll_per_sample(data: Dataset, T: float = 1.0) -> np.ndarray:
    """Unclipped negative log-likelihood of the true label, one value per sample."""
    T = _check_temperature(T)
    z = data.logits / T
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    return log_norm - z[np.arange(len(data)), data.labels]


def nll_sum(data: Dataset, T: float = 1.0, clip: float = DEFAULT_NLL_CLIP) -> float:
    """Summed NLL with each sample's loss capped at ``clip``.

    The cap bounds any one sample's contribution, so the sum has L1
    sensitivity ``clip`` under adding or removing a sample.
    """
    clip = float(clip)
    if not clip > 0:
        raise ValueError(f"clip must be positive, got {clip}")
    _check_nonempty(data)
    return float(np.minimum(clip, nll_per_sample(data, T)).sum())


def bin_index(c: float, scheme: BinningScheme) -> int:
    c = float(c)
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"confidence {c} outside [0, 1]")
    return min(int(math.floor(c * scheme.k)), scheme.k - 1)


def bin_indices(c: np.ndarray, scheme: BinningScheme) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    if c.size and (c.min() < 0.0 or c.max() > 1.0):
        raise ValueError("confidences must lie in [0, 1]")
    return np.minimum(np.floor(c * scheme.k).astype(np.int64), scheme.k - 1)


def confidence_stats(data: Dataset, T: float = 1.0, scheme: BinningScheme | None = None) -> ConfidenceStats:
    scheme = scheme or BinningScheme()
    _check_nonempty(data)
    conf = confidences(data, T)
    bins = bin_indices(conf, scheme)
    correct = correctness(data)
    k = scheme.k
    return ConfidenceStats(
        n_bin=np.bincount(bins, minlength=k).astype(np.float64),
        n_correct=np.bincount(bins, weights=correct.astype(np.float64), minlength=k),
        conf_sum=np.bincount(bins, weights=conf, minlength=k),
        n_total=len(data),
    )


def ece(data: Dataset, T: float = 1.0, scheme: BinningScheme | None = None) -> float:
    """Binned expected calibration error of ``data`` at temperature ``T``."""
    stats = confidence_stats(data, T, scheme)
    return float(np.abs(stats.n_correct - stats.conf_sum).sum() / stats.n_total)


def ece_from_confidences(conf: np.ndarray, correct: np.ndarray, scheme: BinningScheme | None = None) -> float:
    """Binned ECE for already-transformed confidences (e.g. histogram-binned)."""
    scheme = scheme or BinningScheme()
    conf = np.asarray(conf, dtype=np.float64)
    if conf.size == 0:
        raise ValueError("dataset is empty")
    bins = bin_indices(conf, scheme)
    n_correct = np.bincount(bins, weights=np.asarray(correct, dtype=np.float64), minlength=scheme.k)
    conf_sum = np.bincount(bins, weights=conf, minlength=scheme.k)
    return float(np.abs(n_correct - conf_sum).sum() / conf.size)
