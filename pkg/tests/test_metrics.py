import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calibkit.core import BinningScheme, BinningSpec, top_label_view
from calibkit.errors import TooManyBins
from calibkit.metrics import (
    Aggregation,
    EceConfig,
    Norm,
    brier,
    classification_error,
    ece,
    nll,
    reliability_data,
)
from calibkit.synth import GeneratorSpec, gen_calibrated

from conftest import make_probs, random_instance

ALL_CONFIGS = [
    EceConfig(BinningSpec(s, m), norm=nm, aggregation=ag, class_wise_bins=cw)
    for s, nm, ag in itertools.product(BinningScheme, Norm, Aggregation)
    for m, cw in [(1, 1), (3, 2)]
]


def hand_instance():
    # confidences [1, 1, 0.5, 0.5], correct [T, F, T, F]
    rows = [[1, 0, 0], [1, 0, 0], [0.5, 0.3, 0.2], [0.5, 0.3, 0.2]]
    return make_probs(rows, [0, 1, 0, 2])


def test_defaults_follow_protocol():
    cfg = EceConfig()
    assert cfg.binning == BinningSpec("equal_mass", 100)
    assert (cfg.norm, cfg.aggregation, cfg.class_wise_bins) == (Norm.L1, Aggregation.TOP_LABEL, 15)


def test_single_bin_hand_value():
    p = hand_instance()
    v = top_label_view(p)
    assert v.confidence.tolist() == [1, 1, 0.5, 0.5]
    assert v.correct.tolist() == [True, False, True, False]
    cfg = EceConfig(BinningSpec("equal_mass", 1))
    assert ece(p, cfg) == 0.25


def test_single_bin_l2_and_rms():
    p = hand_instance()
    assert ece(p, EceConfig(BinningSpec("equal_width", 1), norm="l2")) == 0.0625
    assert ece(p, EceConfig(BinningSpec("equal_width", 1), norm="rms")) == 0.25


def test_two_equal_mass_bins_hand_value():
    # bins {0.5, 0.5} -> acc 0.5 conf 0.5 ; {1, 1} -> acc 0.5 conf 1
    p = hand_instance()
    assert ece(p, EceConfig(BinningSpec("equal_mass", 2))) == 0.25
    assert ece(p, EceConfig(BinningSpec("equal_mass", 2), norm="l2")) == 0.125


@pytest.mark.parametrize("cfg", ALL_CONFIGS, ids=lambda c: "-".join(map(str, c.to_dict().values())))
def test_one_hot_correct_is_zero(cfg):
    p = make_probs(np.eye(3)[[0, 1, 2, 1, 0, 2]], [0, 1, 2, 1, 0, 2])
    assert ece(p, cfg) == 0.0


def test_single_bin_equals_accuracy_confidence_gap(rng):
    for _ in range(50):
        p = random_instance(rng)
        v = top_label_view(p)
        got = ece(p, EceConfig(BinningSpec("equal_mass", 1)))
        want = abs(math.fsum(v.correct.astype(float)) / p.n - math.fsum(v.confidence) / p.n)
        assert got == want


def test_too_many_bins_propagates():
    p = make_probs([[0.6, 0.4], [0.3, 0.7]], [0, 1])
    with pytest.raises(TooManyBins):
        ece(p, EceConfig(BinningSpec("equal_mass", 3)))
    with pytest.raises(TooManyBins):
        ece(p, EceConfig(BinningSpec("equal_mass", 1), aggregation="class_wise", class_wise_bins=3))


def test_class_wise_manual():
    # k=2, one bin per class: class 0 probs [.8,.3] targets [1,0] -> |0.5-0.55|
    # class 1 probs [.2,.7] targets [0,1] -> |0.5-0.45|; mean 0.05
    p = make_probs([[0.8, 0.2], [0.3, 0.7]], [0, 1])
    cfg = EceConfig(BinningSpec("equal_width", 1), aggregation="class_wise", class_wise_bins=1)
    assert ece(p, cfg) == pytest.approx(0.05, abs=1e-15)


def test_all_label_single_bin_is_zero_for_any_probabilities(rng):
    # pooled over all classes, mean probability and mean indicator are both 1/k
    for _ in range(10):
        p = random_instance(rng)
        cfg = EceConfig(BinningSpec("equal_width", 1), aggregation="all_label")
        assert ece(p, cfg) == pytest.approx(0.0, abs=1e-15)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_permutation_invariance(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    p = random_instance(rng)
    perm = rng.permutation(p.n)
    q = make_probs(p.scores[perm], p.labels[perm])
    for scheme in BinningScheme:
        cfg = EceConfig(BinningSpec(scheme, min(5, p.n)))
        # equal-mass ties are broken by row index, so only distinct confidences are order-free
        if scheme is BinningScheme.EQUAL_MASS and len(set(top_label_view(p).confidence)) < p.n:
            continue
        assert ece(p, cfg) == ece(q, cfg)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_top_label_ignores_non_argmax_permutation(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    p = random_instance(rng)
    scores = p.scores.copy()
    for i in range(p.n):
        below = np.flatnonzero(scores[i] < scores[i].max())
        scores[i, below] = scores[i, rng.permutation(below)]
    q = make_probs(scores, p.labels)
    for scheme in BinningScheme:
        cfg = EceConfig(BinningSpec(scheme, min(7, p.n)))
        assert ece(q, cfg) == ece(p, cfg)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_rms_at_least_l1(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    p = random_instance(rng)
    for scheme in BinningScheme:
        spec = BinningSpec(scheme, int(rng.integers(1, p.n + 1)))
        assert ece(p, EceConfig(spec, norm="rms")) >= ece(p, EceConfig(spec, norm="l1"))


class TestScoringRules:
    def test_nll_one_hot(self):
        assert nll(make_probs([[1, 0, 0]], [0])) == 0.0

    def test_nll_half(self):
        assert nll(make_probs([[0.5, 0.5]], [0])) == pytest.approx(math.log(2), abs=1e-15)

    def test_nll_clamp(self):
        assert nll(make_probs([[1, 0]], [1])) == pytest.approx(-math.log(1e-12), abs=1e-12)
        assert nll(make_probs([[1, 0]], [1])) == pytest.approx(27.631021115928547, abs=1e-9)

    def test_brier_values(self):
        assert brier(make_probs([[1, 0, 0]], [0])) == 0.0
        assert brier(make_probs([[0.5, 0.5]], [0])) == 0.5
        assert brier(make_probs([[0.25] * 4], [3])) == 0.75

    def test_brier_upper_bound(self):
        assert brier(make_probs([[0, 1]], [0])) == 2.0

    def test_one_hot_minimizes(self, rng):
        p = make_probs(np.eye(4)[[0, 3, 2]], [0, 3, 2])
        assert nll(p) == 0.0 and brier(p) == 0.0
        q = random_instance(rng)
        assert nll(q) > 0 and brier(q) > 0

    def test_classification_error(self):
        assert classification_error(hand_instance()) == 0.5


class TestReliability:
    def test_single_bin(self):
        p = hand_instance()
        rel = reliability_data(p, BinningSpec("equal_width", 1), hist_bins=4)
        b = rel.bins
        assert b.counts.tolist() == [4]
        assert b.mean_confidence[0] == 0.75 and b.mean_accuracy[0] == 0.5
        assert rel.hist_counts.sum() == 4
        assert rel.hist_counts.tolist() == [0, 0, 2, 2]

    def test_empty_bin_kept(self):
        p = make_probs([[0.9, 0.1], [0.95, 0.05]], [0, 0])
        rel = reliability_data(p, BinningSpec("equal_width", 15), hist_bins=10)
        assert rel.bins.num_bins == 15
        assert rel.bins.counts.sum() == 2
        assert rel.bins.counts[13] == 1 and rel.bins.counts[14] == 1
        assert (rel.bins.counts == 0).sum() == 13

    def test_calibrated_generator_bins_close(self):
        p = gen_calibrated(GeneratorSpec(params=(0.5, 1.0), k=2, seed=7), 100_000)
        rel = reliability_data(p, BinningSpec("equal_mass", 15), hist_bins=20)
        gaps = np.abs(rel.bins.mean_accuracy - rel.bins.mean_confidence)
        assert gaps.max() < 0.02
        assert rel.bins.counts.sum() == 100_000
