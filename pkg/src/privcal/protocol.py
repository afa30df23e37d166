"""Calibrator/source query protocol.

A :class:`PrivateSource` owns one shard of labelled logits and an epsilon
ledger. The calibrator never touches raw samples: it sends a
:class:`QuerySpec`, the source computes the statistic on its shard, charges
its ledger and returns the Laplace-noised vector. The calibrator combines
responses with :func:`aggregate`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import core
from .core import BinningScheme, Dataset
from .dp import NoiseSpec, PrivacyBudget, mechanize


class QueryKind(enum.Enum):
    NLL_SUM = "nll_sum"
    ECE_BIN_RESIDUALS = "ece_bin_residuals"
    HIST_TALLIES = "hist_tallies"
    ACC_CONF_GAP = "acc_conf_gap"


# L1 sensitivity of each statistic under adding/removing one sample.
SENSITIVITY = {
    QueryKind.NLL_SUM: core.DEFAULT_NLL_CLIP,
    QueryKind.ECE_BIN_RESIDUALS: 1.0,
    QueryKind.HIST_TALLIES: 2.0,
    QueryKind.ACC_CONF_GAP: 1.0,
}


@dataclass(frozen=True)
class QuerySpec:
    kind: QueryKind
    epsilon_share: float
    temperature: float = 1.0
    scheme: BinningScheme = field(default_factory=BinningScheme)
    sensitivity: float | None = None

    def __post_init__(self):
        if self.sensitivity is None:
            object.__setattr__(self, "sensitivity", SENSITIVITY[self.kind])
        elif self.sensitivity != SENSITIVITY[self.kind]:
            raise ValueError(
                f"{self.kind.name} has sensitivity {SENSITIVITY[self.kind]}, got {self.sensitivity}"
            )
        if not self.epsilon_share > 0:
            raise ValueError(f"epsilon share must be positive, got {self.epsilon_share}")
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")

    @property
    def length(self) -> int:
        if self.kind is QueryKind.ECE_BIN_RESIDUALS:
            return self.scheme.k
        if self.kind is QueryKind.HIST_TALLIES:
            return 2 * self.scheme.k
        return 1

    @property
    def noise(self) -> NoiseSpec:
        return NoiseSpec(self.sensitivity, self.epsilon_share)


@dataclass(frozen=True)
class QueryResponse:
    values: np.ndarray
    source_id: int
    iteration: int
    kind: QueryKind


def evaluate_query(data: Dataset, q: QuerySpec) -> np.ndarray:
    """Exact (noiseless) statistic vector for one shard.

    HIST_TALLIES is laid out as ``[n_correct_0..n_correct_{k-1}, n_bin_0..n_bin_{k-1}]``.
    """
    if len(data) == 0:
        raise ValueError("cannot evaluate a query on an empty shard")
    if q.kind is QueryKind.NLL_SUM:
        return np.array([core.nll_sum(data, q.temperature, clip=q.sensitivity)])
    if q.kind is QueryKind.ACC_CONF_GAP:
        gap = core.correctness(data) - core.confidences(data, q.temperature)
        return np.array([gap.sum()])
    if q.kind is QueryKind.ECE_BIN_RESIDUALS:
        stats = core.confidence_stats(data, q.temperature, q.scheme)
        return stats.n_correct - stats.conf_sum
    if q.kind is QueryKind.HIST_TALLIES:
        stats = core.confidence_stats(data, 1.0, q.scheme)
        return np.concatenate([stats.n_correct, stats.n_bin])
    raise ValueError(f"unknown query kind {q.kind}")


class PrivateSource:
    """A data holder that only releases mechanized statistics."""

    def __init__(self, source_id: int, data: Dataset, budget: PrivacyBudget, rng: np.random.Generator):
        if len(data) == 0:
            raise ValueError("a private source needs at least one sample")
        self.id = source_id
        self.budget = budget
        self._data = data
        self._rng = rng
        self._iteration = 0

    def __repr__(self):
        return f"PrivateSource(id={self.id}, budget={self.budget})"

    @property
    def n_classes(self) -> int:
        return self._data.n_classes

    def respond(self, q: QuerySpec, overdraft: float = 0.0) -> QueryResponse:
        self.budget.charge(q.epsilon_share, overdraft)
        values = mechanize(evaluate_query(self._data, q), q.noise, self._rng)
        response = QueryResponse(values, self.id, self._iteration, q.kind)
        self._iteration += 1
        return response


    def answer_locally(self, q: QuerySpec) -> np.ndarray:
        """Exact aggregate-ready answer for use by the source itself.

        Nothing is released, so no epsilon is charged; this backs the
        single-source baseline where the holder recalibrates on its own data.
        """
        return aggregate([evaluate_query(self._data, q)])


def respond(source: PrivateSource, q: QuerySpec, overdraft: float = 0.0) -> QueryResponse:
    return source.respond(q, overdraft)


def aggregate(responses) -> np.ndarray:
    """Coordinate-wise mean of the response vectors.

    Exact pooling only when every shard has the same number of samples.
    """
    responses = list(responses)
    if not responses:
        raise ValueError("nothing to aggregate")
    vectors = [r.values if isinstance(r, QueryResponse) else np.asarray(r, dtype=np.float64) for r in responses]
    length = vectors[0].shape
    if any(v.shape != length for v in vectors):
        raise ValueError("responses have mismatched lengths")
    if isinstance(responses[0], QueryResponse):
        kinds = {r.kind for r in responses}
        iterations = {r.iteration for r in responses}
        if len(kinds) > 1 or len(iterations) > 1:
            raise ValueError("responses come from different queries")
    return np.mean(np.stack(vectors), axis=0)
