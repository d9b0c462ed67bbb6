from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import smoothed_p_star
from stochseize.errors import InsufficientDataError
from stochseize.evaluation import Backend, EvalConfig, WindowedDataset, evaluate_combo
from stochseize.features import FeatureKind
from stochseize.prob_model import (BinEdges, LikelihoodTable, LutQuantization, fit_bins, fit_table, lookup_p_star,
                                   quantize_lut)
from stochseize.signal_io import State


def test_uniform_equal_frequency():
    x = np.random.default_rng(0).uniform(size=4000)
    bins = fit_bins(x, target_bins=40, min_count=20)
    counts = bins.counts(x)
    assert bins.n_bins == 40
    assert counts.min() >= 99 and counts.max() <= 101


def test_identical_values_single_bin():
    bins = fit_bins(np.full(100, 3.0), 40, 5)
    assert bins.n_bins == 1


def test_insufficient_training_data():
    with pytest.raises(InsufficientDataError, match="insufficient training data"):
        fit_bins(np.arange(9.0), 40, 5)
    with pytest.raises(InsufficientDataError):
        fit_bins([], 40, 5)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(10, 400), st.integers(1, 30), st.integers(2, 60))
def test_bimodal_every_bin_populated(seed, n, min_count, target):
    rng = np.random.default_rng(seed)
    x = np.concatenate([rng.normal(-5, 1, n), rng.normal(5, 0.1, n // 3 + 1)])
    x = np.round(x, 1)  # ties exercise the merge path
    if x.size < 2 * min_count:
        return
    bins = fit_bins(x, target, min_count)
    counts = bins.counts(x)
    assert counts.sum() == x.size
    assert bins.n_bins <= target
    assert bins.n_bins == 1 or counts.min() >= min_count


def test_edges_must_increase():
    with pytest.raises(ValueError):
        BinEdges([1.0, 1.0])


def test_fit_table_hand_example():
    # 2 bins; ictal: 10 in bin 0; interictal: 10 in bin 1
    bins = BinEdges([0.5])
    values = [0.0] * 10 + [1.0] * 10
    states = [State.ICTAL] * 10 + [State.INTERICTAL] * 10
    t = fit_table(values, states, bins, smoothing=1.0)
    expected = smoothed_p_star([10, 0], [0, 10], 1)
    assert expected[0] == Fraction(11, 12)
    np.testing.assert_allclose(t.p_star, [float(v) for v in expected], rtol=1e-15)
    np.testing.assert_allclose(t.p_given_ictal, [11 / 12, 1 / 12])


def test_fit_table_bool_states_and_counts():
    bins = BinEdges([0.0, 1.0])
    t = fit_table([-1, 0.5, 2, 2, -3], np.array([True, False, True, False, False]), bins)
    assert t.count_ictal.tolist() == [1, 0, 1]
    assert t.count_interictal.tolist() == [1, 1, 1]
    assert t.n_train == 5


def test_identical_distributions_give_half():
    rng = np.random.default_rng(1)
    x = rng.normal(size=200)
    values = np.concatenate([x, x])
    states = [True] * 200 + [False] * 200
    t = fit_table(values, np.array(states), fit_bins(values, 20, 5))
    np.testing.assert_allclose(t.p_star, 0.5, atol=1e-9)


def test_ratio_two_gives_two_thirds():
    pn = np.array([0.1, 0.2, 0.2])
    pi = 2 * pn
    t = LikelihoodTable(BinEdges([0.0, 1.0]), np.zeros(3), np.zeros(3), pi, pn)
    np.testing.assert_allclose(t.p_star, 2 / 3, rtol=1e-15)


def test_single_class_rejected():
    with pytest.raises(InsufficientDataError, match="both states required"):
        fit_table([1.0, 2.0], [State.ICTAL, State.ICTAL], BinEdges([1.5]))


def test_smoothing_must_be_positive():
    with pytest.raises(ValueError):
        fit_table([1.0, 2.0], [True, False], BinEdges([1.5]), smoothing=0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(20, 300))
def test_table_invariants_and_label_swap(seed, n):
    rng = np.random.default_rng(seed)
    values = rng.normal(size=n)
    ictal = rng.random(n) < 0.4
    ictal[0], ictal[1] = True, False
    bins = fit_bins(values, 10, 2)
    t = fit_table(values, ictal, bins)
    swapped = fit_table(values, ~ictal, bins)
    assert np.all((t.p_star > 0) & (t.p_star < 1))
    assert t.p_given_ictal.sum() == pytest.approx(1) and t.p_given_interictal.sum() == pytest.approx(1)
    np.testing.assert_allclose(swapped.p_star, 1 - t.p_star, atol=1e-12)
    exact = smoothed_p_star(t.count_ictal.tolist(), t.count_interictal.tolist(), 1)
    np.testing.assert_allclose(t.p_star, [float(v) for v in exact], rtol=1e-12)


def make_table():
    pi = np.array([0.1, 0.2, 0.3, 0.4])
    pn = np.array([0.4, 0.3, 0.2, 0.1])
    return LikelihoodTable(BinEdges([0.0, 1.0, 2.0]), np.array([1, 2, 3, 4]), np.array([4, 3, 2, 1]), pi, pn)


def test_lookup_rules():
    t = make_table()
    ps = t.p_star
    assert lookup_p_star(t, -100.0) == ps[0]
    assert lookup_p_star(t, 0.0) == ps[0]  # on an edge -> left bin
    assert lookup_p_star(t, 1.0) == ps[1]
    assert lookup_p_star(t, 1.5) == ps[2]
    assert lookup_p_star(t, 1e9) == ps[3]
    np.testing.assert_array_equal(lookup_p_star(t, np.array([-1.0, 0.5, 2.5])), ps[[0, 1, 3]])
    assert isinstance(lookup_p_star(t, 0.3), float)


def test_lookup_is_total_and_piecewise_constant():
    t = make_table()
    xs = np.linspace(-5, 5, 1001)
    ps = lookup_p_star(t, xs)
    assert np.all(np.isfinite(ps))
    assert np.count_nonzero(np.diff(ps)) == t.n_bins - 1


def test_quantize_identity():
    t = make_table()
    q = quantize_lut(t, LutQuantization(4))
    np.testing.assert_array_equal(q.p_star, t.p_star)
    np.testing.assert_array_equal(q.bins.edges, t.bins.edges)


def test_quantize_to_one_level():
    t = make_table()
    q = quantize_lut(t, LutQuantization(1))
    assert q.n_bins == 1
    pooled = t.p_given_ictal.sum() / (t.p_given_ictal.sum() + t.p_given_interictal.sum())
    assert q.p_star[0] == pytest.approx(pooled)
    assert q.count_ictal.tolist() == [10]


def test_quantize_merges_closest_neighbours():
    pi = np.array([0.25, 0.25, 0.25, 0.25])
    pn = np.array([0.5, 0.24, 0.25, 0.01])  # bins 1 and 2 have near-equal P*
    t = LikelihoodTable(BinEdges([0.0, 1.0, 2.0]), np.zeros(4), np.zeros(4), pi, pn)
    q = quantize_lut(t, LutQuantization(3))
    assert q.bins.edges.tolist() == [0.0, 2.0]
    assert q.p_given_ictal.sum() == pytest.approx(1) and q.p_given_interictal.sum() == pytest.approx(1)


def test_quantize_errors():
    with pytest.raises(ValueError):
        quantize_lut(make_table(), LutQuantization(5))
    with pytest.raises(ValueError):
        LutQuantization(0)


def test_json_roundtrip(tmp_path):
    t = make_table()
    back = LikelihoodTable.load(t.save(tmp_path / "t.json"))
    np.testing.assert_array_equal(back.p_star, t.p_star)
    np.testing.assert_array_equal(back.bins.edges, t.bins.edges)
    np.testing.assert_array_equal(back.count_ictal, t.count_ictal)
    d = t.to_dict()
    del d["p_given"]
    np.testing.assert_allclose(LikelihoodTable.from_dict(d).p_star,
                               [float(v) for v in smoothed_p_star([1, 2, 3, 4], [4, 3, 2, 1])])


def test_lut_40_to_8_costs_little_j(planted_rec, planted_plan):
    combo = [(FeatureKind.ENERGY_MEAN, 0)]
    full = evaluate_combo(WindowedDataset(planted_rec, EvalConfig()), combo, planted_plan, Backend.EXACT)
    small = evaluate_combo(WindowedDataset(planted_rec, EvalConfig(lut_levels=8)), combo, planted_plan, Backend.EXACT)
    assert full.j_statistic - small.j_statistic <= 0.05
