"""Data ingestion, synthetic fixtures, source splitting and trial sweeps."""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import math
import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import core
from .core import BinningScheme, Dataset
from .dp import INFINITE, PrivacyBudget
from .golden import SearchConfig
from .protocol import PrivateSource
from .recalibrators import (
    Accounting,
    Method,
    RecalConfig,
    TemperatureModel,
    evaluate_ece,
    recalibrate,
)

RESULT_HEADER = ["method", "factor", "value", "trials", "ece_mean", "ece_median", "ece_std"]
DEFAULT_TRIALS = 100
PAPER_TRIALS = 500


# -- logit files ------------------------------------------------------------


class LogitFileError(ValueError):
    """Base class for logit CSV parse failures; ``line`` is 1-based."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class HeaderError(LogitFileError):
    pass


class RaggedRowError(LogitFileError):
    pass


class NonFiniteError(LogitFileError):
    pass


class LabelError(LogitFileError):
    pass


def _header(m: int) -> list[str]:
    return ["label"] + [f"logit_{j}" for j in range(m)]


def load_logits(path) -> Dataset:
    """Read a ``label,logit_0,...,logit_{m-1}`` CSV into a :class:`Dataset`."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise HeaderError(path, 1, "file is empty") from None
        m = len(header) - 1
        if m < 2 or header != _header(m):
            raise HeaderError(path, 1, f"expected header label,logit_0,...,logit_{{m-1}} with m >= 2, got {header}")
        labels, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != m + 1:
                raise RaggedRowError(path, lineno, f"expected {m + 1} fields, got {len(row)}")
            try:
                label = int(row[0])
            except ValueError:
                raise LabelError(path, lineno, f"label {row[0]!r} is not an integer") from None
            if not 0 <= label < m:
                raise LabelError(path, lineno, f"label {label} out of range for {m} classes")
            try:
                values = [float(x) for x in row[1:]]
            except ValueError as exc:
                raise NonFiniteError(path, lineno, f"unparseable logit ({exc})") from None
            if not all(math.isfinite(v) for v in values):
                raise NonFiniteError(path, lineno, "non-finite logit")
            labels.append(label)
            rows.append(values)
    if not rows:
        return Dataset(np.empty((0, m)), np.empty(0, dtype=np.int64))
    return Dataset(np.array(rows, dtype=np.float64), np.array(labels, dtype=np.int64))


def save_logits(data: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_header(data.n_classes))
        for row, label in zip(data.logits, data.labels):
            writer.writerow([int(label)] + [repr(float(v)) for v in row])


# -- synthetic data -----------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    """Labels are drawn from softmax of the true logits; stored logits are
    the true ones multiplied by ``miscal_scale``, so temperature
    ``miscal_scale`` restores the generating distribution.
    """

    m: int = 10
    n: int = 60000
    logit_spread: float = 2.0
    miscal_scale: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("need at least 2 classes")
        if self.n < 1:
            raise ValueError("need at least 1 sample")
        if not self.logit_spread > 0 or not self.miscal_scale > 0:
            raise ValueError("logit_spread and miscal_scale must be positive")


def generate_synthetic(cfg: SynthConfig) -> Dataset:
    rng = np.random.default_rng(cfg.seed)
    true_logits = rng.normal(0.0, cfg.logit_spread, size=(cfg.n, cfg.m))
    probs = core.softmax(true_logits)
    u = rng.random(cfg.n)
    labels = (probs.cumsum(axis=1) < u[:, None]).sum(axis=1)
    labels = np.minimum(labels, cfg.m - 1)
    return Dataset(cfg.miscal_scale * true_logits, labels)


# -- splitting ----------------------------------------------------------------


def split_indices(n: int, n_sources: int, n_samples: int, rng: np.random.Generator):
    """Shuffle ``range(n)``; return per-source index blocks and the test indices."""
    if n_sources < 1 or n_samples < 1:
        raise ValueError("need at least one source with at least one sample")
    used = n_sources * n_samples
    if used >= n:
        raise ValueError(f"{n_sources} sources x {n_samples} samples needs more than {n} samples")
    perm = rng.permutation(n)
    return perm[:used].reshape(n_sources, n_samples), perm[used:]


def split_sources(
    data: Dataset,
    n_sources: int,
    n_samples: int,
    seed,
    epsilon: float = INFINITE,
    noise_key: tuple = (),
) -> tuple[list[PrivateSource], Dataset]:
    """Partition a shuffled copy of ``data`` into equal private shards plus a test split.

    The shuffle and each source's noise RNG are all derived from ``seed``.
    The shuffle depends on ``seed`` alone; ``noise_key`` (a tuple of
    nonnegative ints) selects an independent noise stream, so different
    methods can share one split without sharing noise.
    """
    split_seq = np.random.SeedSequence(seed, spawn_key=(0,))
    noise_seq = np.random.SeedSequence(seed, spawn_key=(1, *noise_key))
    blocks, test_idx = split_indices(len(data), n_sources, n_samples, np.random.default_rng(split_seq))
    noise_seqs = noise_seq.spawn(n_sources)
    sources = [
        PrivateSource(i, data.subset(block), PrivacyBudget(epsilon), np.random.default_rng(noise_seqs[i]))
        for i, block in enumerate(blocks)
    ]
    return sources, data.subset(test_idx)


# -- trials -------------------------------------------------------------------


@dataclass(frozen=True)
class SplitConfig:
    n_sources: int = 100
    n_samples: int = 50


@dataclass
class TrialResult:
    ece_test: float
    method: Method
    temperature: float | None
    epsilon_spent: list = field(default_factory=list)
    n_charges: list = field(default_factory=list)
    overdrawn: bool = False
    model: object = None


def run_trial(data: Dataset, cfg: RecalConfig, split: SplitConfig, seed, noise_key: tuple = ()) -> TrialResult:
    """Split, recalibrate on the sources, and score ECE on the held-out split."""
    sources, test = split_sources(data, split.n_sources, split.n_samples, seed, epsilon=cfg.epsilon,
                                  noise_key=noise_key)
    model = recalibrate(sources, cfg)
    return TrialResult(
        ece_test=evaluate_ece(model, test, cfg.scheme),
        method=cfg.method,
        temperature=model.temperature if isinstance(model, TemperatureModel) else None,
        epsilon_spent=[s.budget.epsilon_spent for s in sources],
        n_charges=[s.budget.n_charges for s in sources],
        overdrawn=any(s.budget.overdrawn for s in sources),
        model=model,
    )


# -- sweeps -------------------------------------------------------------------


class Factor(enum.Enum):
    SOURCES = "sources"
    SAMPLES = "samples"
    EPSILON = "epsilon"


# Reduced grids that finish in minutes; PAPER_GRIDS follow the ImageNet-C and
# CIFAR-C experiment grids.
DESK_GRIDS = {
    Factor.SOURCES: [10, 25, 50, 100],
    Factor.SAMPLES: [10, 30, 50],
    Factor.EPSILON: [0.2, 0.5, 1.0, 2.0],
}


def _steps(start, stop, step):
    n = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(n)]


PAPER_GRIDS = {
    "imagenet": {
        Factor.SOURCES: (_steps(100, 2000, 100), SplitConfig(n_sources=100, n_samples=10), 1.0),
        Factor.SAMPLES: (_steps(5, 100, 5), SplitConfig(n_sources=100, n_samples=10), 1.0),
        Factor.EPSILON: (_steps(0.2, 2.0, 0.2), SplitConfig(n_sources=100, n_samples=50), 1.0),
    },
    "cifar": {
        Factor.SOURCES: (_steps(10, 250, 10), SplitConfig(n_sources=10, n_samples=10), 1.0),
        Factor.SAMPLES: (_steps(5, 50, 5), SplitConfig(n_sources=50, n_samples=10), 1.0),
        Factor.EPSILON: (_steps(0.2, 2.0, 0.2), SplitConfig(n_sources=50, n_samples=30), 1.0),
    },
}

ALL_METHODS = [Method.NONE, Method.ONE_SOURCE, Method.HIST_BIN, Method.NLL_T, Method.ECE_T, Method.ACC_T]


@dataclass(frozen=True)
class SweepConfig:
    factor: Factor = Factor.EPSILON
    grid: tuple = tuple(DESK_GRIDS[Factor.EPSILON])
    trials: int = DEFAULT_TRIALS
    methods: tuple = tuple(ALL_METHODS)
    master_seed: int = 0
    split: SplitConfig = field(default_factory=SplitConfig)
    epsilon: float = 1.0
    scheme: BinningScheme = field(default_factory=BinningScheme)
    search: SearchConfig = field(default_factory=SearchConfig)
    accounting: Accounting = Accounting.WORST_CASE

    def __post_init__(self):
        if not self.grid:
            raise ValueError("sweep grid is empty")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if not self.methods:
            raise ValueError("need at least one method")


def _digest(key: str) -> int:
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")


def trial_seed(master_seed: int, trial: int) -> int:
    """Stable 64-bit seed for trial ``trial``; it fixes the data split.

    Every (method, grid value) cell reuses the same split for a given trial
    index, so cells are compared on common random splits and methods that
    ignore epsilon give identical results across an epsilon grid.
    """
    return _digest(f"{master_seed}|{trial}")


def noise_key(method: Method, value) -> tuple:
    """Spawn key separating the noise streams of different cells within one trial."""
    return (_digest(f"{method.value}|{format_value(value)}"),)


def format_value(value) -> str:
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return str(value)


def _cell_configs(cfg: SweepConfig, method: Method, value) -> tuple[RecalConfig, SplitConfig]:
    split, epsilon = cfg.split, cfg.epsilon
    if cfg.factor is Factor.SOURCES:
        split = replace(split, n_sources=int(value))
    elif cfg.factor is Factor.SAMPLES:
        split = replace(split, n_samples=int(value))
    else:
        epsilon = float(value)
    recal = RecalConfig(method=method, epsilon=epsilon, search=cfg.search, scheme=cfg.scheme,
                        accounting=cfg.accounting)
    return recal, split


def run_sweep(cfg: SweepConfig, data: Dataset, progress=None) -> list[dict]:
    """One aggregate row per (method, grid value), in method-major order."""
    rows = []
    for method in cfg.methods:
        for value in cfg.grid:
            recal, split = _cell_configs(cfg, method, value)
            eces = []
            for t in range(cfg.trials):
                seed = trial_seed(cfg.master_seed, t)
                try:
                    eces.append(run_trial(data, recal, split, seed, noise_key(method, value)).ece_test)
                except Exception as exc:
                    raise RuntimeError(
                        f"trial {t} failed for method={method.value} {cfg.factor.value}={value}: {exc}"
                    ) from exc
            rows.append({
                "method": method.value,
                "factor": cfg.factor.value,
                "value": format_value(value),
                "trials": cfg.trials,
                "ece_mean": statistics.fmean(eces),
                "ece_median": statistics.median(eces),
                "ece_std": statistics.pstdev(eces),
            })
            if progress is not None:
                progress(rows[-1])
    return rows


def rows_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_HEADER)
    for row in rows:
        writer.writerow([
            row["method"], row["factor"], row["value"], row["trials"],
            repr(row["ece_mean"]), repr(row["ece_median"]), repr(row["ece_std"]),
        ])
    return buf.getvalue()


def write_results(rows: Sequence[dict], path) -> None:
    Path(path).write_text(rows_to_csv(rows), encoding="utf-8")
