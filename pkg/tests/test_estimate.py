import bisect
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invmeas import catalog
from invmeas.estimate import (CONSISTENT, DISTINCT, DegenerateDenominator, MeasureProfile,
                              OccupationHistogram, compare_profiles, measure_profile, merge_all,
                              occupation, ratio_estimate, uniqueness_test)
from invmeas.homeo import Affine
from invmeas.system import TrajectoryOverflow, TrajectorySpec

from conftest import make_system

UNIFORM = catalog.build("uniform-bernoulli").system
SRW = catalog.build("srw-lazy").system


def bin_tau(a, b, max_lag=20):
    """Integrated autocorrelation time of 1[a,b)(X) for the chain x -> x/2 + B.

    X_j = X_0 / 2^j + m / 2^(j-1) with m uniform on 0..2^j - 1, and X_0 is
    uniform on [0, 2], so each lag covariance is a finite sum of interval
    overlaps. Lags beyond 20 contribute below 1e-6.
    """
    p = (b - a) / 2
    tau = 1.0
    for j in range(1, max_lag + 1):
        c = np.arange(2**j) / 2 ** (j - 1)
        lo = np.maximum(a, 2**j * (a - c))
        hi = np.minimum(b, 2**j * (b - c))
        joint = np.clip(hi - lo, 0, None).sum() / 2 / 2**j
        tau += 2 * (joint - p * p) / (p * (1 - p))
    return tau


# -- occupation --------------------------------------------------------------

def test_identity_system_all_mass_in_one_bin():
    s = make_system((Affine(1.0, 0.0), 1.0))
    # bins are half-open, so 0.5 belongs to [0.5, 1)
    h = occupation(s, TrajectorySpec(0.5, 1000, 0), (0.0, 1.0), 2)
    assert h.counts.tolist() == [0, h.total_steps]
    h = occupation(s, TrajectorySpec(0.25, 1000, 0), (0.0, 1.0), 2)
    assert h.counts.tolist() == [h.total_steps, 0]
    assert h.below == h.above == 0


def test_uniform_histogram_within_three_sigma():
    n = 10**6
    h = occupation(UNIFORM, TrajectorySpec(0.0, n, 0), (0.0, 2.0), 20)
    m = h.total_steps
    assert h.below == h.above == 0
    for k, c in enumerate(h.counts):
        sigma = math.sqrt(m * 0.05 * 0.95 * bin_tau(k / 10, (k + 1) / 10))
        assert abs(c - m / 20) <= 3 * sigma, (k, c)


def test_autocorrelation_oracle_half_support():
    # X_n lies in [0, 1) iff the latest coin is 0, so this indicator is i.i.d.
    assert bin_tau(0.0, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_cantor_middle_third_empty():
    s = catalog.build("cantor").system
    h = occupation(s, TrajectorySpec(0.5, 10**6, 0), (0.0, 1.0), 9, burn_in=100)
    middle = h.counts[3:6].sum()
    assert middle <= 1e-3 * h.total_steps
    assert h.below == h.above == 0


def test_deterministic_orbit_matches_enumeration():
    g = Affine(0.5, 1.0)
    s = make_system((g, 1.0))
    n, bins, window = 200, 16, (0.0, 2.0)
    h = occupation(s, TrajectorySpec(-3.0, n, 0), window, bins, burn_in=0)
    edges = [window[0] + k * (window[1] - window[0]) / bins for k in range(bins + 1)]
    expected = [0] * bins
    below = above = 0
    x = -3.0
    for _ in range(n):
        x = g.apply(x)
        if x < window[0]:
            below += 1
        elif x >= window[1]:
            above += 1
        else:
            expected[bisect.bisect_right(edges, x) - 1] += 1
    assert h.counts.tolist() == expected
    assert (h.below, h.above, h.total_steps) == (below, above, n)


def test_burn_in_bounds():
    with pytest.raises(ValueError):
        occupation(UNIFORM, TrajectorySpec(0.0, 10, 0), (0.0, 2.0), 4, burn_in=10)
    with pytest.raises(ValueError):
        occupation(UNIFORM, TrajectorySpec(0.0, 10, 0), (0.0, 2.0), 4, burn_in=-1)


def test_burn_in_drops_initial_states():
    s = make_system((Affine(1.0, 1.0), 1.0))
    h = occupation(s, TrajectorySpec(0.0, 10, 0), (0.0, 100.0), 100, burn_in=3)
    # states X_4 .. X_10 are retained
    assert h.total_steps == 7
    assert h.counts[4:11].tolist() == [1] * 7


def test_overflow_carries_partial_histogram():
    s = make_system((Affine(1e100, 0.0), 1.0))
    with pytest.raises(TrajectoryOverflow) as info:
        occupation(s, TrajectorySpec(1.0, 10, 0), (0.0, 1.0), 2, burn_in=0)
    part = info.value.partial
    assert part.total_steps == 3 and part.conserved()


def test_histogram_validation():
    with pytest.raises(ValueError):
        OccupationHistogram((1.0, 0.0), 4)
    with pytest.raises(ValueError):
        OccupationHistogram((0.0, 1.0), 0)
    with pytest.raises(ValueError):
        OccupationHistogram((0.0, 1.0), 2).merge(OccupationHistogram((0.0, 1.0), 3))


finite = st.floats(-1e6, 1e6)


@given(st.lists(finite, max_size=300), st.floats(-10, 0), st.floats(0.1, 10),
       st.integers(1, 40))
def test_conservation(xs, lo, width, bins):
    h = OccupationHistogram((lo, lo + width), bins)
    h.add_states(np.array(xs, dtype=float))
    assert h.conserved() and h.total_steps == len(xs)
    assert np.all(h.counts >= 0)


@given(st.lists(st.lists(finite, max_size=50), min_size=1, max_size=6), st.randoms())
def test_merge_order_irrelevant(chunks, rnd):
    def hist(xs):
        h = OccupationHistogram((-100.0, 100.0), 13)
        h.add_states(np.array(xs, dtype=float))
        return h

    hs = [hist(c) for c in chunks]
    ref = merge_all(hs)
    order = list(range(len(hs)))
    rnd.shuffle(order)
    shuffled = merge_all([hs[i] for i in order])
    assert shuffled.counts.tolist() == ref.counts.tolist()
    assert (shuffled.below, shuffled.above, shuffled.total_steps) == \
        (ref.below, ref.above, ref.total_steps)
    # tree-shaped reduction
    tree = hs
    while len(tree) > 1:
        tree = [tree[i] + tree[i + 1] if i + 1 < len(tree) else tree[i]
                for i in range(0, len(tree), 2)]
    assert tree[0].counts.tolist() == ref.counts.tolist() and tree[0].conserved()


# -- ratios ------------------------------------------------------------------

def test_ratio_uniform_half():
    r = ratio_estimate(UNIFORM, TrajectorySpec(0.0, 10**6, 0), (0.0, 1.0), (0.0, 2.0))
    assert abs(r.value - 0.5) <= 0.01
    assert r.value == r.numerator_mass / r.denominator_mass
    assert r.n == 10**6 - 10**4
    assert 0 < r.batch_dispersion < 0.05


def test_ratio_same_sets_is_one():
    r = ratio_estimate(SRW, TrajectorySpec(0.0, 10**5, 3), (-5.0, 5.0), (-5.0, 5.0))
    assert r.value == 1.0


def test_ratio_degenerate_denominator():
    with pytest.raises(DegenerateDenominator):
        ratio_estimate(UNIFORM, TrajectorySpec(0.0, 1000, 0), (5.0, 6.0), (5.0, 7.0))


def test_ratio_choquet_deny():
    s = catalog.build("choquet-deny").system
    r = ratio_estimate(s, TrajectorySpec(0.0, 10**7, 1), (0.0, 0.5), (0.0, 1.0))
    assert 0.45 <= r.value <= 0.55


@settings(max_examples=50)
@given(st.floats(-1.0, 3.0), st.floats(0.01, 2.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0),
       st.integers(0, 1000))
def test_ratio_bounded_when_nested(lo, width, f0, f1, seed):
    a, b = sorted((f0, f1))
    b = max(b, a + 1e-3)
    phi = (lo + a * width, lo + min(b, 1.0) * width)
    if not phi[0] < phi[1]:
        return
    try:
        r = ratio_estimate(UNIFORM, TrajectorySpec(1.0, 2000, seed), phi, (lo, lo + width))
    except DegenerateDenominator:
        return
    assert 0.0 <= r.value <= 1.0


# -- profiles ----------------------------------------------------------------

def lattice_bins(profile):
    edges = profile.histogram.edges
    has_int = [math.floor(edges[k + 1] - 1e-12) >= edges[k] for k in range(len(edges) - 1)]
    return np.array(has_int)


def test_srw_profile_is_a_comb():
    p = measure_profile(SRW, 0.0, (-3.0, 3.0), 12, (0.0, 0.5), 10**6, 0)
    ints = lattice_bins(p)
    # null recurrence makes site ratios converge slowly; the comb itself is exact
    assert np.all(p.ratios[~ints] == 0.0)
    assert np.all((p.ratios[ints] > 1 / 3) & (p.ratios[ints] < 3))
    assert p.value_at(0.1) == 1.0


def test_srw_profile_from_half_is_complementary():
    p = measure_profile(SRW, 0.5, (-3.0, 3.0), 12, (0.5, 1.0), 10**6, 0)
    ints = lattice_bins(p)
    assert np.all(p.ratios[ints] == 0.0)
    assert np.all((p.ratios[~ints] > 1 / 3) & (p.ratios[~ints] < 3))


def test_uniform_profiles_agree_across_starts():
    ps = [measure_profile(UNIFORM, x, (0.0, 2.0), 20, (0.0, 1.0), 10**6, 0, stream_index=i)
          for i, x in enumerate([0.0, 0.7, 1.9])]
    scale = np.mean(ps[0].ratios)
    for a, b in itertools.combinations(ps, 2):
        assert np.max(np.abs(a.ratios - b.ratios)) <= 0.03 * scale


def test_profile_reference_checks():
    with pytest.raises(ValueError):
        measure_profile(UNIFORM, 0.0, (0.0, 2.0), 20, (1.0, 3.0), 100, 0)
    with pytest.raises(DegenerateDenominator):
        measure_profile(SRW, 0.5, (-3.0, 3.0), 12, (0.0, 0.5), 1000, 0)


@given(st.lists(st.integers(0, 10**6), min_size=1, max_size=20), st.integers(1, 10**6),
       st.integers(1, 1000))
def test_profile_scale_invariance(counts, ref, c):
    n = len(counts)

    def profile(k):
        h = OccupationHistogram((0.0, float(n)), n, np.array(counts) * k)
        return MeasureProfile(h, (0.0, 1.0), ref * k, 0.0, 0)

    assert np.array_equal(profile(1).ratios, profile(c).ratios)


# -- uniqueness --------------------------------------------------------------

def _uniq(name, **override):
    e = catalog.build(name)
    cfg = dict(e.checks["uniqueness"])
    cfg.update(override)
    return uniqueness_test(e.system, cfg["starts"], cfg["window"], cfg["bins"], cfg["steps"],
                           cfg["trials"], seed=0)


def test_uniqueness_uniform_consistent():
    r = _uniq("uniform-bernoulli")
    assert r.verdict == CONSISTENT
    assert r.evidence["compared_profiles"] == 4


def test_uniqueness_srw_distinct():
    r = _uniq("srw-lazy")
    assert r.verdict == DISTINCT
    assert sorted(r.evidence["separating"]["starts"]) == [0.0, 0.5]


def test_uniqueness_fixed_points_distinct():
    r = _uniq("fixed-points")
    assert r.verdict == DISTINCT
    sep = r.evidence["separating"]
    assert sep["distance"] == pytest.approx(1.0, abs=0.01)


def test_fixed_points_mass_piles_at_one():
    s = catalog.build("fixed-points").system
    h = occupation(s, TrajectorySpec(0.5, 10**5, 0), (0.9, 1.0 + 1e-9), 1)
    assert h.counts[0] > 0.99 * h.total_steps


def test_uniqueness_argument_checks():
    with pytest.raises(ValueError):
        uniqueness_test(UNIFORM, [0.0], (0.0, 2.0), 10, 100, 1, 0)
    with pytest.raises(ValueError):
        uniqueness_test(UNIFORM, [0.0, 1.0], (0.0, 2.0), 10, 100, 1, 0, tol=1.5)


def test_uniqueness_records_failing_start():
    s = make_system((Affine(1e100, 0.0), 1.0))
    r = uniqueness_test(s, [0.0, 1.0], (-1.0, 1.0), 4, 100, 1, 0)
    runs = r.evidence["runs"]
    assert runs[0]["error"] is None and runs[1]["error"] is not None
    assert r.evidence["compared_profiles"] == 1


def test_uniqueness_independent_of_threads():
    e = catalog.build("uniform-bernoulli")
    args = (e.system, [0.0, 1.0, 5.0], (0.0, 2.0), 20, 10**5, 2, 7)
    a = uniqueness_test(*args, threads=1)
    b = uniqueness_test(*args, threads=8)
    assert a.to_dict() == b.to_dict()


def test_compare_profiles_noise_floor():
    a = OccupationHistogram((0.0, 1.0), 2, [10, 0])
    b = OccupationHistogram((0.0, 1.0), 2, [0, 10])
    assert compare_profiles([a, b], 0.05).verdict == "inconclusive"
    assert compare_profiles([a, b], 0.05, noise_floor=5).verdict == DISTINCT
