import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from daychain.chains import ActivityChain, ActivityRecord, EmptyChainError, discretize
from daychain.metrics import (
    LN2,
    NotNormalizedError,
    SupportMismatchError,
    dtw_distance,
    js_divergence,
    ks_statistic,
    objective_quality,
    pairwise_dtw,
    spatial_density,
    total_quality,
)
from oracles import dtw_oracle, js_oracle, ks_oracle

CATS = ["dining", "shopping", "tourism", "residence", "employment", "travel", "life services", "sports & leisure"]


# -- Jensen-Shannon ----------------------------------------------------------


def test_js_identical_zero():
    assert js_divergence([0.25, 0.25, 0.5], [0.25, 0.25, 0.5]) == 0.0


def test_js_disjoint_is_ln2():
    assert js_divergence([1.0, 0.0], [0.0, 1.0]) == pytest.approx(LN2, abs=1e-12)


def test_js_known_value():
    assert js_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(0.2158, abs=1e-3)


def test_js_errors():
    with pytest.raises(SupportMismatchError):
        js_divergence([1.0], [0.5, 0.5])
    with pytest.raises(NotNormalizedError):
        js_divergence([0.7, 0.7], [0.5, 0.5])


@st.composite
def distributions(draw, n=5):
    raw = draw(st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n).filter(lambda xs: sum(xs) > 1e-6))
    total = sum(raw)
    return [x / total for x in raw]


@given(distributions(), distributions())
@settings(max_examples=100, deadline=None)
def test_js_symmetric_bounded(p, q):
    a = js_divergence(p, q)
    b = js_divergence(q, p)
    assert a == pytest.approx(b, abs=1e-12)
    assert -1e-12 <= a <= LN2 + 1e-9


def test_js_matches_direct_sum_oracle():
    rng = random.Random(1)
    for _ in range(100):
        n = rng.randrange(2, 9)
        p = [rng.random() for _ in range(n)]
        q = [rng.random() for _ in range(n)]
        if rng.random() < 0.3:
            p[rng.randrange(n)] = 0.0
        sp, sq = sum(p), sum(q)
        p = [x / sp for x in p]
        q = [x / sq for x in q]
        assert js_divergence(p, q) == pytest.approx(js_oracle(p, q), abs=1e-9)


# -- Kolmogorov-Smirnov -------------------------------------------------------


def test_ks_identical_zero():
    assert ks_statistic([1, 2, 3], [1, 2, 3]) == 0.0


def test_ks_disjoint_one():
    assert ks_statistic([1, 2, 3], [10, 11]) == 1.0


def test_ks_known_third():
    assert ks_statistic([1, 2, 3], [2, 3, 4]) == pytest.approx(1 / 3)


def test_ks_empty_rejected():
    with pytest.raises(ValueError):
        ks_statistic([], [1])


@given(
    st.lists(st.integers(-50, 50), min_size=1, max_size=20),
    st.lists(st.integers(-50, 50), min_size=1, max_size=20),
)
@settings(max_examples=100, deadline=None)
def test_ks_monotone_transform_invariant(xs, ys):
    base = ks_statistic(xs, ys)
    fx = [math.exp(0.1 * v) + 3 * v for v in xs]  # strictly increasing map
    fy = [math.exp(0.1 * v) + 3 * v for v in ys]
    assert ks_statistic(fx, fy) == pytest.approx(base, abs=1e-12)


def test_ks_matches_counting_oracle():
    rng = random.Random(2)
    for _ in range(100):
        xs = [rng.uniform(0, 10) for _ in range(rng.randrange(1, 15))]
        ys = [rng.uniform(0, 10) for _ in range(rng.randrange(1, 15))]
        assert ks_statistic(xs, ys) == pytest.approx(ks_oracle(xs, ys), abs=1e-12)


# -- objective / total quality -------------------------------------------------


def test_objective_quality_endpoints():
    assert objective_quality(0.0, 0.0, scaled=False) == 1.0
    assert objective_quality(0.0, 0.0) == 10.0
    assert objective_quality(LN2, 1.0) == pytest.approx(0.0, abs=1e-9)


def test_objective_quality_known_value():
    assert objective_quality(0.2158, 1 / 3, scaled=False) == pytest.approx(0.6776, abs=2e-4)


def test_objective_quality_range_errors():
    with pytest.raises(ValueError):
        objective_quality(1.0, 0.0)
    with pytest.raises(ValueError):
        objective_quality(0.0, 1.5)


def test_total_quality_table_rows():
    assert total_quality(7.45, 8.70, 0.5) == pytest.approx(8.07, abs=0.01)
    assert total_quality(7.61, 9.10, 0.5) == pytest.approx(8.36, abs=0.01)


def test_total_quality_alpha_one_passthrough():
    assert total_quality(6.5, 9.9, alpha=1.0) == 6.5


def test_total_quality_range_errors():
    with pytest.raises(ValueError):
        total_quality(11.0, 5.0)
    with pytest.raises(ValueError):
        total_quality(5.0, 5.0, alpha=2.0)


# -- DTW -----------------------------------------------------------------------


def test_dtw_identical_zero():
    assert dtw_distance("ABCA", "ABCA") == 0.0


def test_dtw_warping_absorbs_repeats():
    # Full 3x3 table by hand: warping aligns A~AA and BB~B at zero cost.
    assert dtw_distance("AAB", "ABB") == 0.0


def test_dtw_empty_rejected():
    with pytest.raises(ValueError):
        dtw_distance("", "A")


@given(
    st.lists(st.sampled_from("ABCD"), min_size=1, max_size=12),
    st.lists(st.sampled_from("ABCD"), min_size=1, max_size=12),
)
@settings(max_examples=150, deadline=None)
def test_dtw_symmetric_and_bounded(a, b):
    d1 = dtw_distance(a, b)
    assert d1 == dtw_distance(b, a)
    assert 0 <= d1 <= max(len(a), len(b))


def test_dtw_matches_recursion_oracle():
    rng = random.Random(3)
    for _ in range(100):
        a = [rng.choice(CATS) for _ in range(rng.randrange(1, 11))]
        b = [rng.choice(CATS) for _ in range(rng.randrange(1, 11))]
        assert dtw_distance(a, b) == dtw_oracle(a, b)


def test_dtw_equals_hamming_when_no_warping_helps():
    # constant tails force positionwise comparison
    a = ["A", "A", "A", "A"]
    b = ["A", "B", "A", "A"]
    assert dtw_distance(a, b) == 1.0


def test_dtw_custom_cost_table():
    cost = lambda x, y: 0.0 if x == y else (0.5 if {x, y} == {"A", "B"} else 1.0)
    assert dtw_distance("A", "B", cost=cost) == 0.5


def test_pairwise_dtw_properties():
    rng = random.Random(4)
    seqs = [[rng.choice(CATS) for _ in range(8)] for _ in range(5)]
    d = pairwise_dtw(seqs)
    assert np.allclose(d, d.T)
    assert np.allclose(np.diag(d), 0.0)
    for i in range(5):
        for j in range(5):
            assert d[i, j] == dtw_distance(seqs[i], seqs[j])


def test_pairwise_identical_sequences_zero_matrix():
    seqs = [["A", "B"]] * 4
    assert np.count_nonzero(pairwise_dtw(seqs)) == 0


def test_pairwise_needs_two():
    with pytest.raises(ValueError):
        pairwise_dtw([["A"]])


# -- discretize ------------------------------------------------------------------


def chain_with(records):
    return ActivityChain("p", "d", (0.0, 0.0), records=records)


def test_discretize_all_day_home():
    chain = chain_with([ActivityRecord("residence", 0, 1440, 0.0, 0.0)])
    labels = discretize(chain)
    assert len(labels) == 96
    assert set(labels) == {"residence"}


def test_discretize_majority_in_slot():
    # slot 0 is [0, 15): 12 covered minutes beat the 3 uncovered ones
    chain = chain_with(
        [
            ActivityRecord("dining", 0, 12, 0.0, 0.0),
            ActivityRecord("residence", 15, 1440, 0.0, 0.0),
        ]
    )
    labels = discretize(chain)
    assert labels[0] == "dining"
    assert labels[1] == "residence"


def test_discretize_hand_labeled_three_activity_chain():
    chain = chain_with(
        [
            ActivityRecord("residence", 0, 480, 0.0, 0.0),  # slots 0..31
            ActivityRecord("travel", 480, 510, 0.0, 0.0),  # slots 32..33
            ActivityRecord("employment", 510, 1020, 0.0, 0.0),  # 34..67
            ActivityRecord("residence", 1020, 1440, 0.0, 0.0),  # 68..95
        ]
    )
    labels = discretize(chain)
    expected = ["residence"] * 32 + ["travel"] * 2 + ["employment"] * 34 + ["residence"] * 28
    assert labels == expected


def test_discretize_gap_inherits_previous_label():
    chain = chain_with(
        [
            ActivityRecord("residence", 0, 300, 0.0, 0.0),
            ActivityRecord("dining", 600, 700, 0.0, 0.0),
        ]
    )
    labels = discretize(chain)
    assert labels[25] == "residence"  # minute 375-390 gap carries residence
    assert labels[41] == "dining"


def test_discretize_empty_chain():
    with pytest.raises(EmptyChainError):
        discretize(chain_with([]))


# -- KDE --------------------------------------------------------------------------


def test_spatial_density_masses_to_one():
    rng = random.Random(6)
    pts = [(rng.uniform(0, 0.01), rng.uniform(0, 0.01)) for _ in range(40)]
    grid = spatial_density(pts, (0, 0, 0.01, 0.01), grid=50)
    assert grid.shape == (50, 50)
    assert grid.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(grid >= 0)


def test_spatial_density_weighted_shift():
    pts = [(0.002, 0.002), (0.008, 0.008)]
    left = spatial_density(pts, (0, 0, 0.01, 0.01), grid=40, weights=[10.0, 0.1])
    right = spatial_density(pts, (0, 0, 0.01, 0.01), grid=40, weights=[0.1, 10.0])
    # mass concentrates near the heavier point
    assert left[:20, :20].sum() > right[:20, :20].sum()


def test_spatial_density_identical_inputs_identical_grids():
    pts = [(0.001, 0.004), (0.006, 0.002), (0.003, 0.009)]
    a = spatial_density(pts, (0, 0, 0.01, 0.01), grid=30)
    b = spatial_density(pts, (0, 0, 0.01, 0.01), grid=30)
    assert np.array_equal(a, b)
    assert js_divergence(a.ravel(), b.ravel()) == 0.0
