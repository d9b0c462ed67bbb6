import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochseize.bayes import Evidence, Prior, classify, expit, logit, posterior, posterior_batch
from stochseize.signal_io import State

prob = st.floats(0.001, 0.999)


def exact_posterior(prior, ps):
    # direct product form in rational arithmetic
    a = Fraction(prior)
    b = 1 - Fraction(prior)
    for p in ps:
        a *= Fraction(p)
        b *= 1 - Fraction(p)
    return float(a / (a + b))


def test_uninformative_evidence():
    assert posterior(Prior(0.5), [Evidence(0.5)] * 4) == 0.5


@pytest.mark.parametrize("p", [0.01, 0.3, 0.7, 0.999])
def test_single_evidence_passes_through(p):
    assert posterior(Prior(0.5), [Evidence(p)]) == pytest.approx(p, abs=1e-12)


def test_worked_example():
    value = posterior(Prior(0.3), [Evidence(0.8), Evidence(0.7)])
    assert abs(value - 0.168 / 0.210) <= 1e-12
    assert abs(value - 0.8) <= 1e-12


def test_no_evidence_returns_prior():
    assert posterior(0.2) == pytest.approx(0.2, abs=1e-15)


def test_classify_rules():
    assert classify(0.51, 0.5) is State.ICTAL
    assert classify(0.5, 0.5) is State.INTERICTAL
    assert classify(0.2, 0.5) is State.INTERICTAL


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5])
def test_probabilities_validated(bad):
    with pytest.raises(ValueError):
        Evidence(bad)
    with pytest.raises(ValueError):
        Prior(bad)
    with pytest.raises(ValueError):
        posterior(0.5, [bad])


def test_many_evidences_do_not_underflow():
    # a direct product of 2000 factors of ~0.1 underflows to 0/0
    ps = [0.9, 0.1] * 1000 + [0.8]
    assert posterior(0.5, ps) == pytest.approx(0.8, abs=1e-9)
    assert posterior(0.5, [0.01] * 2000) < 1e-300 or posterior(0.5, [0.01] * 2000) == 0.0


def test_logit_expit_inverse():
    for p in (1e-9, 0.25, 0.5, 0.75, 1 - 1e-9):
        assert expit(logit(p)) == pytest.approx(p, rel=1e-9)
    assert expit(-800) == 0.0 and expit(800) == 1.0


@settings(max_examples=200, deadline=None)
@given(prob, st.lists(prob, min_size=0, max_size=6))
def test_matches_rational_product_form(prior, ps):
    assert posterior(prior, ps) == pytest.approx(exact_posterior(prior, ps), abs=1e-12)


def test_batch_matches_scalar():
    rng = np.random.default_rng(0)
    ps = rng.uniform(0.05, 0.95, (50, 3))
    expected = [posterior(0.4, row) for row in ps]
    np.testing.assert_allclose(posterior_batch(0.4, ps), expected, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(prob, st.lists(prob, min_size=1, max_size=5), st.integers(0, 4), st.floats(1e-3, 0.2))
def test_monotone_in_each_evidence(prior, ps, idx, bump):
    i = idx % len(ps)
    raised = list(ps)
    raised[i] = min(ps[i] + bump, 0.9999)
    if raised[i] <= ps[i]:
        return
    base = posterior(prior, ps)
    if 1e-12 < base < 1 - 1e-12:  # strictly increasing while not saturated in double precision
        assert posterior(prior, raised) > base


@settings(max_examples=200, deadline=None)
@given(prob, st.lists(prob, min_size=1, max_size=6), st.randoms(use_true_random=False))
def test_permutation_invariance(prior, ps, rnd):
    shuffled = list(ps)
    rnd.shuffle(shuffled)
    assert posterior(prior, shuffled) == pytest.approx(posterior(prior, ps), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(prob, st.lists(prob, max_size=6))
def test_complement_symmetry(prior, ps):
    assert posterior(1 - prior, [1 - p for p in ps]) == pytest.approx(1 - posterior(prior, ps), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 0.99), st.lists(st.floats(0.01, 0.99), max_size=4), st.lists(st.floats(0.01, 0.99), max_size=4))
def test_log_odds_additivity(prior, a, b):
    staged = posterior(posterior(prior, a), b)
    assert staged == pytest.approx(posterior(prior, a + b), abs=1e-12)
    assert math.isclose(logit(posterior(prior, a + b)), logit(prior) + sum(map(logit, a + b)), abs_tol=1e-9)
