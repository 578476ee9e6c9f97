import numpy as np
import pytest

from calibkit.core import ScoreKind, validate


def make_probs(rows, labels, ids=None):
    return validate(np.asarray(rows, dtype=float), ScoreKind.PROBABILITIES, labels, example_ids=ids)


def make_logits(rows, labels, ids=None):
    return validate(np.asarray(rows, dtype=float), ScoreKind.LOGITS, labels, example_ids=ids)


def random_instance(rng, max_n=100, max_k=5):
    """Small random probability set. A third of the instances are quantized
    to tenths so ties (within and across rows) actually occur."""
    n = int(rng.integers(1, max_n + 1))
    k = int(rng.integers(2, max_k + 1))
    if rng.random() < 1 / 3:
        counts = rng.multinomial(10, np.ones(k) / k, size=n)
        probs = counts / 10.0
    else:
        probs = rng.dirichlet(np.full(k, rng.uniform(0.2, 3.0)), size=n)
    labels = rng.integers(0, k, n)
    return make_probs(probs, labels)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240601))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            terminalreporter.write_line(results[num])
