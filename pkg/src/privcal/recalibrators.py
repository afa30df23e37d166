"""Private recalibration methods built on the source query protocol.

Every temperature method drives :func:`~privcal.golden.golden_section` with an
objective that is evaluated by querying all sources and averaging their
noised answers. :func:`fit_nonprivate` runs the same fitting logic directly
on raw shards; with an infinite epsilon the private path must reproduce it
bit for bit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from . import core
from .core import BinningScheme, Dataset, LabeledLogits
from .dp import INFINITE
from .golden import SearchConfig, golden_section
from .protocol import PrivateSource, QueryKind, QuerySpec, aggregate, evaluate_query


class Method(enum.Enum):
    NONE = "none"
    ONE_SOURCE = "one_source"
    HIST_BIN = "hist_bin"
    NLL_T = "nll_t"
    ECE_T = "ece_t"
    ACC_T = "acc_t"


TEMPERATURE_METHODS = (Method.NLL_T, Method.ECE_T, Method.ACC_T)


class Accounting(enum.Enum):
    """How a temperature method splits epsilon over its golden-section queries.

    WORST_CASE charges epsilon/(K+2) for each of the K+2 evaluations, so a
    ledger never overdraws. PAPER_LITERAL uses epsilon/(K+1) per query
    (noise scale (K+1)*sensitivity/epsilon) as in the published Acc-T
    pseudocode, which spends one share more than the budget; the ledger
    tolerates that overdraft and flags it.
    """

    PAPER_LITERAL = "paper"
    WORST_CASE = "worstcase"


DEFAULT_EMPTY_BIN_THRESHOLD = 0.5


@dataclass(frozen=True)
class RecalConfig:
    method: Method = Method.ACC_T
    epsilon: float = INFINITE
    search: SearchConfig = field(default_factory=SearchConfig)
    scheme: BinningScheme = field(default_factory=BinningScheme)
    accounting: Accounting = Accounting.WORST_CASE
    inner: Method = Method.ECE_T
    empty_bin_threshold: float = DEFAULT_EMPTY_BIN_THRESHOLD

    def __post_init__(self):
        if math.isnan(self.epsilon) or not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive (or INFINITE), got {self.epsilon}")
        if self.inner is Method.ONE_SOURCE:
            raise ValueError("one-source baseline cannot nest itself")

    @property
    def n_queries(self) -> int:
        """Queries each source answers for this method."""
        if self.method in TEMPERATURE_METHODS:
            return self.search.n_evaluations
        if self.method is Method.HIST_BIN:
            return 1
        return 0

    def share_and_overdraft(self) -> tuple[float, float]:
        return query_share(self.method, self.epsilon, self.search.iterations, self.accounting)


def query_share(method: Method, epsilon: float, iterations: int, accounting: Accounting) -> tuple[float, float]:
    """Per-query epsilon share and the overdraft a ledger must tolerate."""
    if method is Method.HIST_BIN:
        return epsilon, 0.0
    if accounting is Accounting.PAPER_LITERAL:
        share = epsilon / (iterations + 1)
        return share, share
    return epsilon / (iterations + 2), 0.0


@dataclass(frozen=True)
class TemperatureModel:
    temperature: float

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")

    def confidences(self, data: Dataset) -> np.ndarray:
        return core.confidences(data, self.temperature)

    def apply(self, sample: LabeledLogits) -> tuple[int, float]:
        return core.predict_label(sample), core.confidence(sample, self.temperature)


@dataclass(frozen=True)
class BinRemapModel:
    """Per-bin confidence replacement; bins flagged invalid keep the original confidence."""

    scheme: BinningScheme
    remap: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        remap = np.clip(np.asarray(self.remap, dtype=np.float64), 0.0, 1.0)
        valid = np.asarray(self.valid, dtype=bool)
        if remap.shape != (self.scheme.k,) or valid.shape != (self.scheme.k,):
            raise ValueError("remap and valid must have one entry per bin")
        object.__setattr__(self, "remap", remap)
        object.__setattr__(self, "valid", valid)

    def confidences(self, data: Dataset) -> np.ndarray:
        original = core.confidences(data, 1.0)
        bins = core.bin_indices(original, self.scheme)
        return np.where(self.valid[bins], self.remap[bins], original)

    def apply(self, sample: LabeledLogits) -> tuple[int, float]:
        original = core.confidence(sample, 1.0)
        b = core.bin_index(original, self.scheme)
        return core.predict_label(sample), float(self.remap[b]) if self.valid[b] else original


RecalibratedModel = Union[TemperatureModel, BinRemapModel]


def apply(model: RecalibratedModel, sample: LabeledLogits) -> tuple[int, float]:
    return model.apply(sample)


def evaluate_ece(model: RecalibratedModel, data: Dataset, scheme: BinningScheme | None = None) -> float:
    """Binned ECE of ``data`` after passing it through ``model``."""
    return core.ece_from_confidences(model.confidences(data), core.correctness(data), scheme)


# An `ask` takes a query and returns the calibrator's aggregated answer.
Ask = Callable[[QuerySpec], np.ndarray]


def _temperature_objective(kind: QueryKind, ask: Ask, share: float, scheme: BinningScheme):
    def objective(T):
        v = ask(QuerySpec(kind, share, temperature=T, scheme=scheme))
        if kind is QueryKind.NLL_SUM:
            return float(v[0])
        if kind is QueryKind.ACC_CONF_GAP:
            return abs(float(v[0]))
        # Absolute value after averaging, per bin, then summed.
        return float(np.abs(v).sum())

    return objective


_OBJECTIVE_KIND = {
    Method.NLL_T: QueryKind.NLL_SUM,
    Method.ECE_T: QueryKind.ECE_BIN_RESIDUALS,
    Method.ACC_T: QueryKind.ACC_CONF_GAP,
}


def _hist_model(avg: np.ndarray, n_sources: int, cfg: RecalConfig) -> BinRemapModel:
    k = cfg.scheme.k
    n_correct, n_bin = avg[:k], avg[k:]
    # Threshold on the estimated pooled count, so noiseless empty bins (and
    # only those) fall back to the original confidence.
    valid = n_bin * n_sources > cfg.empty_bin_threshold
    with np.errstate(divide="ignore", invalid="ignore"):
        remap = np.where(valid, n_correct / np.where(valid, n_bin, 1.0), 0.0)
    return BinRemapModel(cfg.scheme, remap, valid)


def _fit(method: Method, ask: Ask, n_sources: int, cfg: RecalConfig, share: float) -> RecalibratedModel:
    if method is Method.NONE:
        return none_baseline()
    if method in _OBJECTIVE_KIND:
        objective = _temperature_objective(_OBJECTIVE_KIND[method], ask, share, cfg.scheme)
        return TemperatureModel(golden_section(objective, cfg.search))
    if method is Method.HIST_BIN:
        avg = ask(QuerySpec(QueryKind.HIST_TALLIES, share, scheme=cfg.scheme))
        return _hist_model(avg, n_sources, cfg)
    raise ValueError(f"{method} is not a fitting method")


def _private_ask(sources: Sequence[PrivateSource], overdraft: float) -> Ask:
    if not sources:
        raise ValueError("need at least one private source")
    return lambda q: aggregate([s.respond(q, overdraft) for s in sources])


def _run_private(method: Method, sources: Sequence[PrivateSource], cfg: RecalConfig) -> RecalibratedModel:
    share, overdraft = query_share(method, cfg.epsilon, cfg.search.iterations, cfg.accounting)
    return _fit(method, _private_ask(sources, overdraft), len(sources), cfg, share)


def acc_t(sources: Sequence[PrivateSource], cfg: RecalConfig) -> TemperatureModel:
    """Tune T until aggregated accuracy matches aggregated mean confidence."""
    return _run_private(Method.ACC_T, sources, cfg)


def nll_t(sources: Sequence[PrivateSource], cfg: RecalConfig) -> TemperatureModel:
    return _run_private(Method.NLL_T, sources, cfg)


def ece_t(sources: Sequence[PrivateSource], cfg: RecalConfig) -> TemperatureModel:
    return _run_private(Method.ECE_T, sources, cfg)


def hist_bin(sources: Sequence[PrivateSource], cfg: RecalConfig) -> BinRemapModel:
    """Single-query histogram binning from averaged per-bin tallies."""
    return _run_private(Method.HIST_BIN, sources, cfg)


def one_source(sources: Sequence[PrivateSource], cfg: RecalConfig) -> RecalibratedModel:
    """Recalibrate on the first source alone, without noise.

    Models a data holder fitting on its own shard: nothing leaves the source,
    so its ledger is not charged.
    """
    if not sources:
        raise ValueError("need at least one private source")
    local = sources[0]
    return _fit(cfg.inner, local.answer_locally, 1, cfg, INFINITE)


def none_baseline() -> TemperatureModel:
    return TemperatureModel(1.0)


_PRIVATE = {
    Method.ACC_T: acc_t,
    Method.NLL_T: nll_t,
    Method.ECE_T: ece_t,
    Method.HIST_BIN: hist_bin,
    Method.ONE_SOURCE: one_source,
}


def recalibrate(sources: Sequence[PrivateSource], cfg: RecalConfig) -> RecalibratedModel:
    if cfg.method is Method.NONE:
        return none_baseline()
    return _PRIVATE[cfg.method](sources, cfg)


def fit_nonprivate(shards: Sequence[Dataset], cfg: RecalConfig) -> RecalibratedModel:
    """Fit ``cfg.method`` directly on raw shards, with no mechanism or ledger."""
    shards = list(shards)
    if not shards:
        raise ValueError("need at least one shard")
    method = cfg.method
    if method is Method.ONE_SOURCE:
        shards, method = shards[:1], cfg.inner

    def ask(q):
        return aggregate([evaluate_query(d, q) for d in shards])

    return _fit(method, ask, len(shards), cfg, INFINITE)
