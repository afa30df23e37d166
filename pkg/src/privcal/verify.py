"""Statistical self-checks: Laplace mechanism behaviour and unimodality scans."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import core
from .core import Dataset
from .dp import NoiseSpec, laplace_samples, mechanize

SCAN_GRID = np.linspace(0.05, 20.0, 200)
SCAN_TOL = 1e-9


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def laplace_moments(scale: float = 1.0, n: int = 10**6, seed: int = 0) -> tuple[float, float]:
    draws = laplace_samples(scale, n, np.random.default_rng(seed))
    return float(draws.mean()), float(draws.var())


def neighbor_density_ratio(
    epsilon: float = 1.0,
    n: int = 10**6,
    cells: int = 41,
    lo: float = -10.0,
    hi: float = 10.0,
    min_hits: int = 1000,
    seed: int = 0,
) -> float:
    """Largest empirical density ratio between mechanism outputs on neighbouring databases.

    The query is a count (sensitivity 1) whose value is 0 on one database and
    1 on its neighbour. Only cells with at least ``min_hits`` draws under both
    databases are compared; the ratio is taken in both directions.
    """
    rng = np.random.default_rng(seed)
    spec = NoiseSpec(1.0, epsilon)
    edges = np.linspace(lo, hi, cells + 1)
    a = np.histogram(mechanize(np.zeros(n), spec, rng), edges)[0]
    b = np.histogram(mechanize(np.ones(n), spec, rng), edges)[0]
    ok = (a >= min_hits) & (b >= min_hits)
    if not ok.any():
        raise ValueError("no histogram cell has enough hits")
    a, b = a[ok].astype(np.float64), b[ok].astype(np.float64)
    return float(np.maximum(a / b, b / a).max())


def sign_changes(values, tol: float = SCAN_TOL) -> int:
    """Sign changes in the first differences, ignoring differences within ``tol``."""
    d = np.diff(np.asarray(values, dtype=np.float64))
    s = np.sign(d[np.abs(d) > tol])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def local_minima(values, tol: float = SCAN_TOL) -> int:
    """Count descending-to-ascending turns in ``values`` (plateaus within ``tol`` ignored)."""
    d = np.diff(np.asarray(values, dtype=np.float64))
    s = np.sign(d[np.abs(d) > tol])
    return int(np.count_nonzero((s[:-1] < 0) & (s[1:] > 0)))


def random_dataset(rng: np.random.Generator, max_m: int = 10, max_n: int = 200) -> Dataset:
    m = int(rng.integers(2, max_m + 1))
    n = int(rng.integers(1, max_n + 1))
    spread = rng.uniform(0.1, 5.0)
    return Dataset(rng.normal(0.0, spread, size=(n, m)), rng.integers(0, m, size=n))


def nll_curve(data: Dataset, grid=SCAN_GRID, clip: float = math.inf) -> np.ndarray:
    # Unclipped by default: the cap at 10 used for privacy can add extra
    # turning points on small, widely spread datasets.
    return np.array([core.nll_sum(data, T, clip=clip) for T in grid])


def gap_curve(data: Dataset, grid=SCAN_GRID) -> np.ndarray:
    acc = core.accuracy(data)
    return np.array([abs(acc - core.average_confidence(data, T)) for T in grid])


def unimodality_scan(n_datasets: int = 100, seed: int = 0) -> tuple[int, int]:
    """Number of random datasets whose NLL curve, resp. consistency-gap curve,
    turns more than once over the scan grid."""
    rng = np.random.default_rng(seed)
    bad_nll = bad_gap = 0
    for _ in range(n_datasets):
        data = random_dataset(rng)
        bad_nll += sign_changes(nll_curve(data)) > 1
        bad_gap += sign_changes(gap_curve(data)) > 1
    return bad_nll, bad_gap


def run_checks(seed: int = 0) -> list[CheckResult]:
    results = []
    mean, var = laplace_moments(seed=seed)
    results.append(CheckResult(
        "laplace moments", abs(mean) <= 0.01 and 1.9 <= var <= 2.1,
        f"mean={mean:.5f} (|.|<=0.01), variance={var:.5f} (in [1.9, 2.1])",
    ))
    ratio = neighbor_density_ratio(seed=seed)
    bound = math.e * 1.05
    results.append(CheckResult(
        "neighbouring-database density ratio", ratio <= bound,
        f"max ratio={ratio:.4f} (<= e*1.05 = {bound:.4f})",
    ))
    bad_nll, bad_gap = unimodality_scan(seed=seed)
    results.append(CheckResult("NLL unimodality", bad_nll == 0, f"{bad_nll}/100 datasets with >1 turn"))
    results.append(CheckResult("consistency-gap unimodality", bad_gap == 0, f"{bad_gap}/100 datasets with >1 turn"))
    return results
