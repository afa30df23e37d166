import math

import pytest

from privcal.core import Dataset
from privcal.harness import SynthConfig, generate_synthetic


def loop_confidence(logits, T):
    """Scalar softmax max-probability, one sample at a time, stdlib only."""
    scaled = [x / T for x in logits]
    top = max(scaled)
    return 1.0 / sum(math.exp(s - top) for s in scaled)


def loop_predict(logits):
    best = 0
    for i, x in enumerate(logits):
        if x > logits[best]:
            best = i
    return best


def loop_tallies(data, T, k):
    """Per-bin (n_bin, n_correct, conf_sum) by walking samples one at a time."""
    n_bin = [0] * k
    n_correct = [0] * k
    conf_sum = [0.0] * k
    for row, label in zip(data.logits.tolist(), data.labels.tolist()):
        c = loop_confidence(row, T)
        b = k - 1 if c >= 1.0 else int(c * k)
        n_bin[b] += 1
        n_correct[b] += loop_predict(row) == label
        conf_sum[b] += c
    return n_bin, n_correct, conf_sum


def loop_ece(data, T, k):
    """ECE as sum over bins of |bin accuracy - bin confidence| * bin mass."""
    n_bin, n_correct, conf_sum = loop_tallies(data, T, k)
    n = len(data)
    total = 0.0
    for nb, nc, cs in zip(n_bin, n_correct, conf_sum):
        if nb:
            total += abs(nc / nb - cs / nb) * (nb / n)
    return total


def random_dataset(rng, max_m=10, max_n=200):
    m = int(rng.integers(2, max_m + 1))
    n = int(rng.integers(1, max_n + 1))
    spread = rng.uniform(0.1, 5.0)
    return Dataset(rng.normal(0.0, spread, size=(n, m)), rng.integers(0, m, size=n))


@pytest.fixture(scope="session")
def shifted_data():
    """The s=2 synthetic fixture: 60000 samples, 10 classes, overconfident."""
    return generate_synthetic(SynthConfig(m=10, n=60000, logit_spread=2.0, miscal_scale=2.0, seed=0))
