"""Laplace mechanism and per-source epsilon ledgers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INFINITE = math.inf

# Relative slack when comparing accumulated float shares against a budget;
# six charges of 1/6 sum to 0.9999999999999999, seven of 1/7 may overshoot.
_BUDGET_RTOL = 1e-9


class BudgetExhausted(RuntimeError):
    """A charge would take a ledger past its epsilon budget."""


@dataclass
class PrivacyBudget:
    """Epsilon ledger owned by a single private source.

    ``epsilon_total`` may be :data:`INFINITE`, which models the noiseless
    regime: charges always succeed and noise scales collapse to zero.
    """

    epsilon_total: float
    epsilon_spent: float = 0.0
    n_charges: int = 0
    overdrawn: bool = False

    def __post_init__(self):
        if math.isnan(self.epsilon_total) or self.epsilon_total < 0:
            raise ValueError(f"epsilon_total must be nonnegative, got {self.epsilon_total}")

    @property
    def remaining(self) -> float:
        return self.epsilon_total - self.epsilon_spent

    def can_afford(self, share: float, overdraft: float = 0.0) -> bool:
        if math.isinf(self.epsilon_total):
            return True
        limit = self.epsilon_total + overdraft
        return self.epsilon_spent + share <= limit * (1 + _BUDGET_RTOL)

    def charge(self, share: float, overdraft: float = 0.0) -> "PrivacyBudget":
        """Record spending ``share`` of epsilon.

        Args:
            share: Positive epsilon consumed by one mechanism invocation.
            overdraft: Extra epsilon the caller explicitly tolerates beyond
                ``epsilon_total``. Used only by the paper-literal Acc-T
                accounting; exceeding the total sets ``overdrawn``.

        Raises:
            BudgetExhausted: if the charge does not fit.
        """
        if not share > 0:
            raise ValueError(f"epsilon share must be positive, got {share}")
        if not self.can_afford(share, overdraft):
            raise BudgetExhausted(
                f"charging {share:g} would bring spent epsilon to "
                f"{self.epsilon_spent + share:g} > budget {self.epsilon_total:g}"
            )
        spent = self.epsilon_spent + share
        if not math.isinf(self.epsilon_total) and math.isclose(spent, self.epsilon_total, rel_tol=_BUDGET_RTOL):
            # Float rounding of equal shares; the budget is exactly used up.
            spent = self.epsilon_total
        self.epsilon_spent = spent
        self.n_charges += 1
        if spent > self.epsilon_total:
            self.overdrawn = True
        return self


def charge(budget: PrivacyBudget, epsilon_share: float, overdraft: float = 0.0) -> PrivacyBudget:
    return budget.charge(epsilon_share, overdraft)


@dataclass(frozen=True)
class NoiseSpec:
    sensitivity: float
    epsilon_share: float

    def __post_init__(self):
        if math.isnan(self.sensitivity) or self.sensitivity < 0:
            raise ValueError(f"sensitivity must be nonnegative, got {self.sensitivity}")
        if not self.epsilon_share > 0:
            raise ValueError(f"epsilon share must be positive, got {self.epsilon_share}")

    @property
    def scale(self) -> float:
        if math.isinf(self.epsilon_share) or self.sensitivity == 0:
            return 0.0
        return self.sensitivity / self.epsilon_share


def _uniform_open(rng: np.random.Generator, size) -> np.ndarray:
    # Inverse CDF needs u strictly inside (0, 1); Generator.random is [0, 1).
    u = rng.random(size)
    while np.any(u == 0.0):
        zero = u == 0.0
        u[zero] = rng.random(int(zero.sum()))
    return u


def _inverse_cdf(u: np.ndarray, scale: float) -> np.ndarray:
    v = u - 0.5
    return -scale * np.sign(v) * np.log1p(-2.0 * np.abs(v))


def laplace_samples(scale: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` i.i.d. Laplace(0, scale) draws by inverse-CDF sampling.

    Consumes exactly one uniform per draw, so a vector of ``size`` draws
    equals ``size`` consecutive calls to :func:`laplace_sample`.
    """
    if math.isnan(scale) or scale < 0:
        raise ValueError(f"Laplace scale must be nonnegative, got {scale}")
    if scale == 0:
        return np.zeros(size)
    return _inverse_cdf(_uniform_open(rng, size), scale)


def laplace_sample(scale: float, rng: np.random.Generator) -> float:
    return float(laplace_samples(scale, 1, rng)[0])


def mechanize(values, spec: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """Return ``values`` plus independent Laplace(0, spec.scale) noise per coordinate."""
    values = np.asarray(values, dtype=np.float64)
    scale = spec.scale
    if scale == 0:
        return values.copy()
    return values + laplace_samples(scale, values.shape, rng)
