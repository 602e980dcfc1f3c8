import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from invmeas import catalog
from invmeas.conditions import (GeometricProbes, LinearBound, NoLinearBound, Verdict,
                                check_contraction, check_interval_conditions,
                                check_recurrence_criterion, check_recurrence_empirical,
                                check_unbounded, comparison_processes, estimate_linear_bound,
                                word_homeo)
from invmeas.homeo import (Affine, Conjugated, Cubic, HomeoRangeError, IntegerSkew, Moebius,
                           OddPower, PiecewiseLinear, PowerInterval, Word, image_interval)
from invmeas.system import RandomSystem, TrajectorySpec, run_trajectory

from conftest import diffeos, homeos, line_leaf, make_system, piecewise, pos, shift

SRW = make_system((Affine(1.0, -1.0), 1 / 3), (Affine(1.0, 0.0), 1 / 3), (Affine(1.0, 1.0), 1 / 3))
FIXED = make_system((OddPower(1 / 3), 0.5), (OddPower(1 / 5), 0.5))


# -- linear bounds -----------------------------------------------------------

def test_affine_bound_example():
    assert estimate_linear_bound(Affine(3.0, -2.0)) == LinearBound(3.0, 3.0, 2.0, True)


def test_conjugated_moebius_bound_is_closed_form():
    lb = estimate_linear_bound(Conjugated(Moebius(2.0)))
    assert (lb.a_plus, lb.a_minus, lb.exact) == (0.5, 2.0, True)


@pytest.mark.parametrize("p", [3.0, 5.0, 1 / 3])
def test_odd_power_has_no_linear_bound(p):
    with pytest.raises(NoLinearBound):
        estimate_linear_bound(OddPower(p))
    with pytest.raises(NoLinearBound):
        estimate_linear_bound(OddPower(p), mode="numeric")


def test_probes_must_reach_1e9():
    with pytest.raises(ValueError):
        estimate_linear_bound(Affine(2.0, 0.0), GeometricProbes(1.0, 2.0, 20), mode="numeric")


def test_unknown_mode():
    with pytest.raises(ValueError):
        estimate_linear_bound(Affine(2.0, 0.0), mode="fancy")


def test_word_bound_composes():
    g = Word((Affine(2.0, 1.0), Affine(0.5, -3.0)))
    lb = estimate_linear_bound(g)
    assert (lb.a_plus, lb.a_minus, lb.exact) == (1.0, 1.0, True)
    assert lb.b == 2.0 * 3.0 + 1.0


sample_xs = np.concatenate([np.linspace(-1e6, 1e6, 1000), [0.0, 1e-9, -1e-9]])


@given(homeos)
def test_linear_bound_holds_on_samples(g):
    try:
        lb = estimate_linear_bound(g)
    except NoLinearBound:
        assume(False)
    # exact bounds hold for the real map; 1e-15 covers rounding in its evaluation
    slack = 1e-15 if lb.exact else 1e-9
    for x in sample_xs:
        try:
            assert lb.holds_at(g, float(x), slack), (g, x, lb)
        except HomeoRangeError:
            pass


closed_form_leaves = st.one_of(
    st.builds(Affine, pos, shift),
    piecewise(),
    st.builds(IntegerSkew, diffeos, st.integers(-3, 3)),
    st.builds(Conjugated, diffeos),
    st.just(OddPower(1.0)),
)


@given(closed_form_leaves)
def test_numeric_mode_agrees_with_closed_form(g):
    exact = estimate_linear_bound(g)
    num = estimate_linear_bound(g, mode="numeric")
    assert num.a_plus == pytest.approx(exact.a_plus, rel=0.01)
    assert num.a_minus == pytest.approx(exact.a_minus, rel=0.01)
    # numeric B is a max over probes, so it cannot exceed a valid closed-form B by more
    # than the rounding of g(x) - a x at the outermost probe
    far = GeometricProbes().points()[-1]
    floor = 4 * float(np.spacing(max(abs(g.apply(far)), abs(g.apply(-far)))))
    assert num.b <= exact.b * 1.01 + floor


@pytest.mark.parametrize("c", [2.0, 0.5, 3.0])
def test_moebius_numeric_probe_within_one_percent(c):
    g = Conjugated(Moebius(c))
    exact = estimate_linear_bound(g)
    num = estimate_linear_bound(g, mode="numeric")
    assert abs(num.a_plus - 1 / c) <= 0.01 / c
    assert abs(num.a_minus - c) <= 0.01 * c
    assert num.b == pytest.approx(exact.b, rel=0.01)


# -- comparison processes ----------------------------------------------------

affine_or_conj = st.one_of(st.builds(Affine, st.floats(0.25, 4.0), shift),
                           st.builds(Conjugated, diffeos))


@settings(max_examples=40)
@given(st.lists(affine_or_conj, min_size=1, max_size=3, unique=True),
       st.floats(-50.0, 50.0), st.integers(0, 2**32))
def test_comparison_sandwich(maps, x0, seed):
    w = [1.0 / len(maps)] * len(maps)
    w[-1] = 1.0 - math.fsum(w[:-1])
    s = RandomSystem(tuple(maps), tuple(w))
    try:
        X, lower, upper = comparison_processes(s, TrajectorySpec(x0, 2000, seed))
    except Exception as exc:  # expanding systems may overflow the comparison recursions
        assume(not isinstance(exc, (OverflowError, ArithmeticError)))
        raise
    ok = np.isfinite(upper) & np.isfinite(lower)
    assert np.all(lower[ok] <= X[ok]) and np.all(X[ok] <= upper[ok])


def test_comparison_processes_share_draws():
    s = catalog.build("uniform-bernoulli").system
    X, lower, upper = comparison_processes(s, TrajectorySpec(0.0, 100, 3))
    # both maps have A = 1/2 and B = 0 or 1, so the comparison processes stay in [-2, 2]
    assert len(X) == 101 and lower[0] == 0.0 and upper[0] == 0.0
    assert np.all(lower <= X) and np.all(X <= upper)
    assert np.all(np.abs(lower) <= 2.0 + 1e-12) and np.all(upper <= 2.0 + 1e-12)


# -- (U) ---------------------------------------------------------------------

def test_unbounded_srw_proved():
    assert check_unbounded(SRW).verdict is Verdict.PROVED


def test_unbounded_fixed_points_fails_at_zero():
    rep = check_unbounded(FIXED)
    assert rep.verdict is Verdict.EVIDENCE_AGAINST
    assert rep.witness["x"] == 0.0


def test_unbounded_one_sided_action():
    rep = check_unbounded(make_system((Affine(1.0, 1.0), 1.0)), -10.0, 10.0, 21)
    assert rep.verdict is Verdict.EVIDENCE_AGAINST
    assert rep.witness["grid_failures"] == 21
    assert all(f["up"] and not f["down"] for f in rep.witness["failing_points"])


def test_unbounded_grid_only_for_unanalyzable_maps():
    s = make_system((IntegerSkew(Moebius(2.0), 1), 0.5), (IntegerSkew(Moebius(2.0), -1), 0.5))
    rep = check_unbounded(s)
    assert rep.verdict is Verdict.EVIDENCE_FOR
    assert rep.witness["analytic"] is False


def test_unbounded_requires_two_grid_points():
    with pytest.raises(ValueError):
        check_unbounded(SRW, grid_points=1)


def _push(system, x, direction, bound=1e6, budget=2 * 10**6):
    """Greedy iteration: repeatedly follow the map moving x furthest in ``direction``."""
    steps = 0
    while direction * x <= bound:
        g = max(system.maps, key=lambda m: direction * m.apply(x))
        assert direction * (g.apply(x) - x) > 0, (x, g)
        states = []
        n = 1 << min(12, steps.bit_length())
        run_trajectory(make_system((g, 1.0)), TrajectorySpec(x, n, 0), states.append)
        assert np.all(direction * np.diff(states) > 0)
        x = states[-1]
        steps += n
        assert steps <= budget
    return steps


@pytest.mark.parametrize("name", ["srw-lazy", "biased-lattice", "choquet-deny",
                                  "interval-moebius", "interval-cubic"])
def test_proved_unbounded_orbits_escape(name):
    s = catalog.build(name).system
    assert check_unbounded(s).verdict is Verdict.PROVED
    for x in np.linspace(-100.0, 100.0, 5):
        _push(s, float(x), +1)
        _push(s, float(x), -1)


# -- (C) ---------------------------------------------------------------------

def test_contraction_fixed_points_word():
    rep = check_contraction(FIXED, (-2.0, 2.0), (-8.0, 8.0), max_word_len=5)
    assert rep.verdict is Verdict.PROVED
    assert 1 <= len(rep.witness["word_indices"]) <= 5
    w = word_homeo(FIXED, rep.witness["word_indices"])
    lo, hi = image_interval(w, -8.0, 8.0)
    assert -2.0 <= lo and hi <= 2.0


def test_contraction_cube_root_power_reaches_target():
    # the cube root alone needs three applications: 8^(1/27) < 2 <= 8^(1/9)
    h = make_system((OddPower(1 / 3), 1.0))
    rep = check_contraction(h, (-1.1, 1.1), (-8.0, 8.0), max_word_len=5)
    assert rep.verdict is Verdict.PROVED
    assert rep.witness["word_indices"] == [0, 0, 0]


def test_contraction_fast_path_affine():
    s = make_system((Affine(0.5, 1.0), 0.5), (Affine(2.0, 0.0), 0.5))
    rep = check_contraction(s, (-1.0, 1.0), (-10.0, 10.0))
    assert rep.verdict is Verdict.PROVED
    assert rep.witness["beta"] == 2.0
    assert rep.witness["target"] == [-4.0, 4.0]
    n = rep.witness["n"]
    lo, hi = image_interval(Word((Affine(0.5, 1.0),) * n), -10.0, 10.0)
    assert -4.0 <= lo and hi <= 4.0


def test_contraction_srw_inconclusive():
    rep = check_contraction(SRW, (-1.0, 1.0), (-2.0, 2.0), max_word_len=8)
    assert rep.verdict is Verdict.INCONCLUSIVE


def test_contraction_node_budget():
    s = make_system((Affine(1.0, 1.0), 0.5), (Affine(1.0, -0.5), 0.5))
    rep = check_contraction(s, (-1.0, 1.0), (-2.0, 2.0), max_word_len=30, node_budget=50)
    assert rep.verdict is Verdict.INCONCLUSIVE
    assert rep.witness["reason"] == "node budget exhausted"


def test_contraction_argument_checks():
    with pytest.raises(ValueError):
        check_contraction(SRW, (-1.0, 1.0), (2.0, -2.0))
    with pytest.raises(ValueError):
        check_contraction(SRW, (-1.0, 1.0), (-2.0, 2.0), max_word_len=0)


contracting_leaf = st.one_of(st.builds(Affine, st.floats(0.25, 2.0), st.floats(-2.0, 2.0)),
                             st.sampled_from([OddPower(1 / 3), OddPower(1 / 5), OddPower(3.0)]),
                             st.builds(Conjugated, diffeos))


@settings(max_examples=100)
@given(st.lists(contracting_leaf, min_size=1, max_size=3, unique=True),
       st.floats(0.5, 20.0), st.floats(0.1, 5.0), st.booleans())
def test_proved_contraction_is_sound(maps, k, t, fast):
    w = [1.0 / len(maps)] * len(maps)
    w[-1] = 1.0 - math.fsum(w[:-1])
    s = RandomSystem(tuple(maps), tuple(w))
    rep = check_contraction(s, (-t, t), (-k, k), max_word_len=4, node_budget=2000,
                            fast_path=fast)
    if rep.verdict is Verdict.PROVED:
        target = rep.witness["target"]
        lo, hi = image_interval(word_homeo(s, rep.witness["word_indices"]), -k, k)
        assert target[0] <= lo and hi <= target[1]
        if not rep.witness["fast_path"]:
            assert target == [-t, t]


# -- (R) empirical -----------------------------------------------------------

def test_recurrence_affine_contracting():
    s = catalog.build("uniform-bernoulli").system
    rep = check_recurrence_empirical(s, (-1.0, 3.0), [0.0, 10.0], 10_000, 2, 1)
    assert rep.verdict is Verdict.EVIDENCE_FOR


def test_recurrence_drifting_escapes():
    rep = check_recurrence_empirical(make_system((Affine(1.0, 1.0), 1.0)), (0.0, 1.0),
                                     [0.0], 1000, 1, 1)
    assert rep.verdict is Verdict.EVIDENCE_AGAINST
    assert rep.witness["runs"][0]["last_visit"] == 1


def test_recurrence_srw():
    rep = check_recurrence_empirical(SRW, (-2.0, 2.0), [0.0], 10**6, 16, 5)
    assert rep.verdict is Verdict.EVIDENCE_FOR


def test_recurrence_overflow_is_evidence_against():
    s = make_system((Affine(1e200, 1.0), 1.0))
    rep = check_recurrence_empirical(s, (0.0, 1.0), [1.0], 100, 1, 0)
    assert rep.verdict is Verdict.EVIDENCE_AGAINST
    assert rep.witness["reason"] == "trajectory overflow"


def test_recurrence_never_proves():
    for s, iv in ((SRW, (-2.0, 2.0)), (FIXED, (0.5, 1.5)),
                  (catalog.build("cantor").system, (0.0, 1.0))):
        rep = check_recurrence_empirical(s, iv, [0.0, 1.0], 1000, 2, 0)
        assert rep.verdict is not Verdict.PROVED


def test_recurrence_argument_checks():
    with pytest.raises(ValueError):
        check_recurrence_empirical(SRW, (-1.0, 1.0), [0.0], 5, 1, 0)
    with pytest.raises(ValueError):
        check_recurrence_empirical(SRW, (-1.0, 1.0), [0.0], 100, 0, 0)


# -- (R) criterion -----------------------------------------------------------

def test_criterion_balanced_case_b():
    s = make_system((Affine(0.5, 1.0), 0.5), (Affine(2.0, 0.0), 0.5))
    rep = check_recurrence_criterion(s)
    assert rep.verdict is Verdict.PROVED
    assert rep.witness["case"] == "b"
    assert abs(rep.witness["mean_log_a_plus"]) <= 1e-12


def test_criterion_contracting_case_a():
    rep = check_recurrence_criterion(make_system((Affine(0.5, 1.0), 1.0)))
    assert rep.verdict is Verdict.PROVED
    assert rep.witness["case"] == "a"
    assert rep.witness["mean_log_a_plus"] == pytest.approx(math.log(0.5), rel=1e-15)


def test_criterion_expanding_inconclusive():
    s = make_system((Affine(2.0, 0.0), 0.9), (Affine(0.5, 0.0), 0.1))
    rep = check_recurrence_criterion(s)
    assert rep.verdict is Verdict.INCONCLUSIVE
    assert rep.witness["mean_log_a_plus"] > 0


def test_criterion_reports_maps_without_bound():
    rep = check_recurrence_criterion(FIXED)
    assert rep.verdict is Verdict.INCONCLUSIVE
    assert len(rep.witness["maps_without_linear_bound"]) == 2


def test_criterion_conjugated_moebius():
    s = catalog.build("interval-moebius").system
    rep = check_recurrence_criterion(s)
    assert rep.verdict is Verdict.PROVED
    assert "c" in rep.witness["cases"] or "b" in rep.witness["cases"]


# -- interval systems --------------------------------------------------------

def test_interval_moebius_and_inverse():
    h = Moebius(2.0)
    reps = {r.condition: r for r in check_interval_conditions([(h, 0.5), (h.inverse(), 0.5)])}
    assert reps["R_prime"].verdict is Verdict.PROVED
    assert reps["R_prime"].witness["mean_log_d0"] == 0.0
    assert reps["C_prime"].verdict is Verdict.EVIDENCE_AGAINST
    assert reps["U_prime"].verdict is Verdict.PROVED


def test_interval_all_contracting_at_zero():
    reps = {r.condition: r for r in check_interval_conditions(
        [(Moebius(2.0), 0.5), (PowerInterval(2.0), 0.5)])}
    assert reps["C_prime"].verdict is Verdict.EVIDENCE_AGAINST


def test_interval_identity_fails_unbounded():
    reps = {r.condition: r for r in check_interval_conditions([(Moebius(1.0), 1.0)])}
    assert reps["U_prime"].verdict is Verdict.EVIDENCE_AGAINST
    assert reps["U_prime"].witness["grid_failures"] == 4096


def test_interval_cubic_expands_both_ends():
    reps = {r.condition: r for r in check_interval_conditions(
        catalog.build("interval-cubic").interval_system)}
    assert all(r.verdict is Verdict.PROVED for r in reps.values())
    assert reps["C_prime"].witness["d0"] == 2.0 and reps["C_prime"].witness["d1"] == 2.0


def test_interval_weights_checked():
    with pytest.raises(ValueError):
        check_interval_conditions([(Moebius(2.0), 0.5)])


@given(st.lists(diffeos, min_size=1, max_size=4))
def test_interval_analytic_and_grid_agree(hs):
    w = [1.0 / len(hs)] * len(hs)
    w[-1] = 1.0 - math.fsum(w[:-1])
    u_rep = check_interval_conditions(list(zip(hs, w)), grid_points=256)[2]
    if u_rep.verdict is Verdict.PROVED:
        assert u_rep.witness["grid_failures"] == 0


# -- reports -----------------------------------------------------------------

def test_report_serialization():
    d = check_unbounded(FIXED).to_dict()
    assert d["verdict"] == "evidence_against" and d["condition"] == "U"
    assert d["witness"]["x"] == 0.0
