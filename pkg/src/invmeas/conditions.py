"""Checkers for recurrence, contraction and unbounded action.

Verdicts come from a fixed taxonomy. ``proved`` is only returned when an
exact decision procedure ran: analytic displacement signs, an
exact-image word search, or closed-form moment criteria. Simulation only
ever yields ``evidence_for`` or ``evidence_against``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .homeo import (Affine, Conjugated, Cubic, Homeo, HomeoRangeError, IntegerSkew,
                    IntervalDiffeo, Moebius, OddPower, PiecewiseLinear, PowerInterval,
                    Word, image_interval)
from .system import (RandomSystem, TrajectoryOverflow, TrajectorySpec, drawn_indices,
                     run_trajectory)

ZERO_TOL = 1e-12
DEFAULT_MAX_WORD_LEN = 12
DEFAULT_NODE_BUDGET = 10**6
DEFAULT_GRID = (-100.0, 100.0, 4096)
GROWTH_THRESHOLD = 1.25


class Verdict(str, Enum):
    PROVED = "proved"
    EVIDENCE_FOR = "evidence_for"
    EVIDENCE_AGAINST = "evidence_against"
    INCONCLUSIVE = "inconclusive"


@dataclass
class ConditionReport:
    condition: str
    verdict: Verdict
    witness: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["verdict"] = self.verdict.value
        return d


# -- linear bounds -----------------------------------------------------------

class NoLinearBound(ValueError):
    """The map has no bound of the form -A x^- - B <= g(x) <= A x^+ + B."""


@dataclass(frozen=True)
class LinearBound:
    a_plus: float
    a_minus: float
    b: float
    exact: bool

    def holds_at(self, g: Homeo, x: float, rel_slack: float = 0.0) -> bool:
        y = g.apply(x)
        slack = rel_slack * max(1.0, abs(y))
        upper = self.a_plus * max(x, 0.0) + self.b
        lower = -self.a_minus * max(-x, 0.0) - self.b
        return lower - slack <= y <= upper + slack


@dataclass(frozen=True)
class GeometricProbes:
    """Probe points +-start * ratio**k for k < count, plus 0."""

    start: float = 1.0
    ratio: float = 2.0
    count: int = 37

    def points(self) -> np.ndarray:
        xs = self.start * self.ratio ** np.arange(self.count)
        if xs[-1] < 1e9:
            raise ValueError("probe sequence must reach at least 1e9 in magnitude")
        return xs


def _residual_b(g: Homeo, a_plus: float, a_minus: float, xs: np.ndarray) -> float:
    b = 0.0
    for x in np.concatenate([[0.0], xs, -xs]):
        y = g.apply(float(x))
        b = max(b, y - a_plus * max(x, 0.0), -a_minus * max(-x, 0.0) - y)
    return float(b)


def _numeric_bound(g: Homeo, probes: GeometricProbes) -> LinearBound:
    xs = probes.points()
    cut = len(xs) * 2 // 3
    slopes = []
    for sign in (1.0, -1.0):
        y = np.array([g.apply(sign * x) for x in xs])
        q = y / (sign * xs)
        tail = q[cut:]
        if q[-1] > 2.0 * q[len(q) // 2] and np.all(np.diff(tail) > 0):
            raise NoLinearBound(f"{g!r}: superlinear growth (g(x)/x reaches {q[-1]:.3g})")
        # offset fitted on a prefix of the probes vs on all of them
        b_head = np.max(np.abs(y[:cut] - q[cut - 1] * sign * xs[:cut]))
        b_all = np.max(np.abs(y - q[-1] * sign * xs))
        if b_all > 4.0 * max(b_head, 1.0):
            raise NoLinearBound(f"{g!r}: offset g(x) - A x grows without bound")
        slopes.append(float(q[-1]))
    a_plus, a_minus = slopes
    return LinearBound(a_plus, a_minus, _residual_b(g, a_plus, a_minus, xs), False)


def _pl_bound(g: PiecewiseLinear) -> LinearBound:
    a_plus, a_minus = g.right_slope, g.left_slope
    # residuals are piecewise linear with kinks at breakpoints and 0, constant in the tails
    b = 0.0
    for x in [0.0] + [p[0] for p in g.breakpoints]:
        y = g.apply(x)
        b = max(b, y - a_plus * max(x, 0.0), -a_minus * max(-x, 0.0) - y)
    return LinearBound(a_plus, a_minus, b, True)


def _conjugated_bound(g: Conjugated, probes: GeometricProbes) -> LinearBound:
    h = g.inner
    d0, d1 = h.derivative_at_0, h.derivative_at_1
    if not (0.0 < d0 < math.inf and 0.0 < d1 < math.inf):
        raise NoLinearBound(f"{g!r}: inner map has h'(0)={d0}, h'(1)={d1}")
    a_plus, a_minus = 1.0 / d1, 1.0 / d0
    if isinstance(h, Moebius):
        # in t = u/(1-u) coordinates x = t - 1/t and h_r(x) = t/c - c/t
        return LinearBound(a_plus, a_minus, abs(h.c - 1.0 / h.c), True)
    # slopes are closed form, the offset is fitted on a dense grid in u
    u = np.concatenate([np.geomspace(1e-11, 0.5, 2000), 1.0 - np.geomspace(1e-11, 0.5, 2000)])
    xs = np.array([(ui - (1 - ui)) / (ui * (1 - ui)) for ui in u])
    b = _residual_b(g, a_plus, a_minus, np.abs(xs))
    return LinearBound(a_plus, a_minus, b * (1 + 1e-9), False)


def _compose(outer: LinearBound, inner: LinearBound) -> LinearBound:
    b = max(outer.a_plus * inner.b, outer.a_minus * inner.b) + outer.b
    return LinearBound(outer.a_plus * inner.a_plus, outer.a_minus * inner.a_minus, b,
                       outer.exact and inner.exact)


def estimate_linear_bound(g: Homeo, probes: GeometricProbes | None = None,
                          mode: str = "auto") -> LinearBound:
    """Constants A+, A-, B with -A- x^- - B <= g(x) <= A+ x^+ + B.

    ``mode="auto"`` uses the closed form of the family where one exists and
    falls back to probing; ``mode="numeric"`` always probes, estimating A+-
    as the largest g(x)/x over the tail of the probe sequence and B as the
    largest residual over all probes.
    """
    probes = probes or GeometricProbes()
    if mode == "numeric":
        return _numeric_bound(g, probes)
    if mode != "auto":
        raise ValueError(f"unknown mode {mode!r}")
    if isinstance(g, Affine):
        return LinearBound(g.a, g.a, abs(g.b), True)
    if isinstance(g, OddPower):
        if g.p == 1.0:
            return LinearBound(1.0, 1.0, 0.0, True)
        kind = "superlinear" if g.p > 1 else "sublinear with unbounded offset"
        raise NoLinearBound(f"{g!r}: {kind}")
    if isinstance(g, PiecewiseLinear):
        return _pl_bound(g)
    if isinstance(g, IntegerSkew):
        return LinearBound(1.0, 1.0, abs(g.shift) + 1.0, True)
    if isinstance(g, Conjugated):
        return _conjugated_bound(g, probes)
    if isinstance(g, Word):
        bound = estimate_linear_bound(g.factors[-1], probes)
        for f in reversed(g.factors[:-1]):
            bound = _compose(estimate_linear_bound(f, probes), bound)
        return bound
    return _numeric_bound(g, probes)


def _up(y: float) -> float:
    return float(np.nextafter(np.nextafter(y, math.inf), math.inf))


def comparison_processes(system: RandomSystem, spec: TrajectorySpec):
    """Trajectory X and the affine comparison processes driven by the same draws.

    Y+_k = A+(g_k) Y+_{k-1} + B(g_k) from Y+_0 = x^+, and likewise Y- from
    x^-, so that -Y-_k <= X_k <= Y+_k. The Y recursions are rounded
    outward by two ulps per step so the floating values bound the exact
    ones. Returns three arrays of length steps + 1: (X, -Y-, Y+).
    """
    bounds = [estimate_linear_bound(g) for g in system.maps]
    xs = []
    run_trajectory(system, spec, lambda x: xs.append(x))
    X = np.array(xs)
    idx = drawn_indices(system, spec)
    ap = [b.a_plus for b in bounds]
    am = [b.a_minus for b in bounds]
    bb = [b.b for b in bounds]
    yp = np.empty(spec.steps + 1)
    ym = np.empty(spec.steps + 1)
    yp[0] = max(X[0], 0.0)
    ym[0] = max(-X[0], 0.0)
    with np.errstate(over="ignore"):
        # an infinite comparison value is still a valid (vacuous) bound
        for k, j in enumerate(idx, start=1):
            yp[k] = _up(ap[j] * yp[k - 1] + bb[j])
            ym[k] = _up(am[j] * ym[k - 1] + bb[j])
    return X, -ym, yp


# -- (U): unbounded action ---------------------------------------------------

def _kinks(g: Homeo) -> list[float] | None:
    """Points where the sign of g(x) - x can change, or None if not analyzable."""
    if isinstance(g, Affine):
        return [] if g.a == 1.0 else [g.b / (1.0 - g.a)]
    if isinstance(g, OddPower):
        return [] if g.p == 1.0 else [-1.0, 0.0, 1.0]
    if isinstance(g, PiecewiseLinear):
        pts = [p[0] for p in g.breakpoints]
        xs, ys = pts, [p[1] for p in g.breakpoints]
        roots = []
        for i in range(len(xs) - 1):
            d0, d1 = ys[i] - xs[i], ys[i + 1] - xs[i + 1]
            if d0 * d1 < 0:
                roots.append(xs[i] + d0 / (d0 - d1) * (xs[i + 1] - xs[i]))
        for x0, y0, s in ((xs[0], ys[0], g.left_slope), (xs[-1], ys[-1], g.right_slope)):
            if s != 1.0:
                r = x0 + (x0 - y0) / (s - 1.0)
                if (r < xs[0]) if x0 == xs[0] else (r > xs[-1]):
                    roots.append(r)
        return pts + roots
    if isinstance(g, Conjugated):
        # r is increasing, so g(x) - x has the sign of h(u) - u with u = r^-1(x)
        h = g.inner
        if isinstance(h, Moebius) and h.c != 1.0:
            return []
        if isinstance(h, Cubic) and h.k != 0.0:
            return [0.0]
    return None


def _displacement_sign(g: Homeo, x: float, roots: set) -> int:
    if x in roots:
        return 0
    d = g.apply(x) - x
    return (d > 0) - (d < 0)


def _analytic_cover(maps: Sequence[Homeo], lo=-math.inf, hi=math.inf):
    """Exact (U) test on the elementary pieces cut out by all kink points.

    Returns ``(covered, failing_points)``; each failing point has no map
    moving it down or none moving it up.
    """
    kinks = {}
    for idx, g in enumerate(maps):
        for k in _kinks(g):
            if lo < k < hi:
                kinks.setdefault(k, set()).add(idx)
    cuts = sorted(kinks)
    pieces = []  # (representative point, set of maps for which it is a root)
    bounds = [lo] + cuts + [hi]
    for a, b in zip(bounds, bounds[1:]):
        if math.isinf(a) and math.isinf(b):
            rep = 0.0
        elif math.isinf(a):
            rep = b - 1.0 - abs(b)
        elif math.isinf(b):
            rep = a + 1.0 + abs(a)
        else:
            rep = 0.5 * (a + b)
        pieces.append((rep, set()))
    for c in cuts:
        pieces.append((c, kinks[c]))
    failing = []
    for rep, root_of in pieces:
        signs = [_displacement_sign(g, rep, {rep} if i in root_of else set())
                 for i, g in enumerate(maps)]
        if not (1 in signs and -1 in signs):
            failing.append({"x": rep, "up": 1 in signs, "down": -1 in signs})
    failing.sort(key=lambda f: abs(f["x"]))
    return not failing, failing


def _grid_scan(maps, xs):
    failing = []
    for x in xs:
        ys = [g.apply(float(x)) for g in maps]
        up = any(y > x for y in ys)
        down = any(y < x for y in ys)
        if not (up and down):
            failing.append({"x": float(x), "up": up, "down": down})
    failing.sort(key=lambda f: abs(f["x"]))
    return failing


def check_unbounded(system: RandomSystem, grid_lo: float = DEFAULT_GRID[0],
                    grid_hi: float = DEFAULT_GRID[1],
                    grid_points: int = DEFAULT_GRID[2]) -> ConditionReport:
    """(U): every x has some map moving it up and some map moving it down."""
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    params = {"grid_lo": grid_lo, "grid_hi": grid_hi, "grid_points": grid_points}
    grid_fail = _grid_scan(system.maps, np.linspace(grid_lo, grid_hi, grid_points))
    witness = {"grid_failures": len(grid_fail)}
    analyzable = [g for g in system.maps if _kinks(g) is not None]
    if analyzable:
        covered, failing = _analytic_cover(analyzable)
        if covered:
            witness["analytic"] = "maps with closed-form displacement cover all of R"
            return ConditionReport("U", Verdict.PROVED, witness, params)
        if len(analyzable) == len(system.maps):
            witness.update(x=failing[0]["x"], failing_points=failing[:8], analytic=True)
            return ConditionReport("U", Verdict.EVIDENCE_AGAINST, witness, params)
    if grid_fail:
        witness.update(x=grid_fail[0]["x"], failing_points=grid_fail[:8], analytic=False)
        return ConditionReport("U", Verdict.EVIDENCE_AGAINST, witness, params)
    witness["analytic"] = False
    return ConditionReport("U", Verdict.EVIDENCE_FOR, witness, params)


# -- (C): contraction --------------------------------------------------------

def _inside(iv, target) -> bool:
    return target[0] <= iv[0] and iv[1] <= target[1]


def _fast_path(system: RandomSystem, compactK):
    m = max(abs(compactK[0]), abs(compactK[1]))
    for idx, g in enumerate(system.maps):
        try:
            lb = estimate_linear_bound(g)
        except NoLinearBound:
            continue
        A = max(lb.a_plus, lb.a_minus)
        if not (lb.a_plus < 1 and lb.a_minus < 1) or lb.b <= 0:
            continue
        beta = lb.b / (1.0 - A)
        target = (-2.0 * beta, 2.0 * beta)
        # |g^n(x)| <= A^n |x| + beta, so A^n m <= beta suffices
        n = 1 if m <= beta else max(1, math.ceil(math.log(beta / m) / math.log(A)))
        for n_try in range(n, n + 64):
            word = Word((g,) * n_try)
            try:
                img = image_interval(word, *compactK)
            except HomeoRangeError:
                continue
            if _inside(img, target):
                return {"word_indices": [idx] * n_try, "n": n_try, "beta": beta,
                        "target": list(target), "image": list(img), "map_index": idx,
                        "A": A, "B": lb.b, "word": word.to_config(), "fast_path": True}
    return None


def check_contraction(system: RandomSystem, target, compactK,
                      max_word_len: int = DEFAULT_MAX_WORD_LEN,
                      node_budget: int = DEFAULT_NODE_BUDGET,
                      fast_path: bool = True) -> ConditionReport:
    """(C) for one pair (K, target): find a word w with w(K) inside target.

    When some map has A+ and A- below 1, the target is replaced by
    I = [-2 beta, 2 beta] with beta = B / (1 - max A), and the witness is a
    power of that map. Otherwise words are searched breadth-first by length,
    lexicographically within a length, with exact interval images.
    Words whose image of K was already reached are pruned. Because images
    depend only on the image interval, this keeps the first witness.
    """
    target = (float(target[0]), float(target[1]))
    compactK = (float(compactK[0]), float(compactK[1]))
    if compactK[0] > compactK[1]:
        raise ValueError("compactK must be nonempty")
    if max_word_len < 1:
        raise ValueError("max_word_len must be >= 1")
    params = {"target": list(target), "compactK": list(compactK),
              "max_word_len": max_word_len, "node_budget": node_budget}
    if fast_path:
        fp = _fast_path(system, compactK)
        if fp is not None:
            return ConditionReport("C", Verdict.PROVED, fp, params)

    seen = {compactK}
    frontier = deque([((), compactK)])
    nodes = 0
    for length in range(1, max_word_len + 1):
        nxt = deque()
        for word, img in frontier:
            for idx, g in enumerate(system.maps):
                nodes += 1
                if nodes > node_budget:
                    return ConditionReport("C", Verdict.INCONCLUSIVE,
                                           {"reason": "node budget exhausted", "length": length,
                                            "nodes": nodes}, params)
                try:
                    new = image_interval(g, *img)
                except HomeoRangeError:
                    continue
                w = word + (idx,)
                if _inside(new, target):
                    homeo = Word(tuple(system.maps[i] for i in reversed(w)))
                    return ConditionReport("C", Verdict.PROVED, {
                        "word_indices": list(w), "length": len(w), "image": list(new),
                        "target": list(target), "word": homeo.to_config(),
                        "fast_path": False}, params)
                if new not in seen:
                    seen.add(new)
                    nxt.append((w, new))
        frontier = nxt
        if not frontier:
            break
    return ConditionReport("C", Verdict.INCONCLUSIVE,
                           {"reason": "no contracting word found", "nodes": nodes}, params)


def word_homeo(system: RandomSystem, word_indices: Sequence[int]) -> Word:
    """The composition applying ``word_indices`` left to right."""
    return Word(tuple(system.maps[i] for i in reversed(word_indices)))


# -- (R): recurrence ---------------------------------------------------------

@dataclass
class _VisitStats:
    lo: float
    hi: float
    steps: int
    visits: int = 0
    early_visits: int = 0
    last_visit: int = -1
    max_gap: int = 0

    def visit_block(self, states, first):
        idx = np.flatnonzero((states >= self.lo) & (states <= self.hi))
        if not idx.size:
            return
        k = idx + first
        self.visits += int(k.size)
        self.early_visits += int((k <= self.steps // 4).sum())
        prev = np.concatenate([[self.last_visit], k[:-1]]) if self.last_visit >= 0 else k[:-1]
        gaps = k[1:] - k[:-1] if self.last_visit < 0 else k - prev
        if gaps.size:
            self.max_gap = max(self.max_gap, int(gaps.max()))
        self.last_visit = int(k[-1])


def check_recurrence_empirical(system: RandomSystem, candidate_I, starts: Sequence[float],
                               steps: int, trials: int, seed: int) -> ConditionReport:
    """Simulation evidence for (R) on the closed interval ``candidate_I``.

    ``evidence_for`` needs one of two signals. Either every run revisits I in
    its final 10% of steps (positive recurrence), or the pooled visit count
    keeps growing: total visits / visits in the first quarter >= 1.25. A
    null recurrent walk on the line gives about 2 and a transient one about
    1; pooling many trials tames the spread of the null recurrent ratio.
    ``evidence_against`` means some run left I for good in the final 50% and
    the pooled count does not grow. Never returns ``proved``.
    """
    if trials < 1 or steps < 10:
        raise ValueError("need trials >= 1 and steps >= 10")
    lo, hi = float(candidate_I[0]), float(candidate_I[1])
    params = {"candidate_I": [lo, hi], "starts": list(starts), "steps": steps,
              "trials": trials, "seed": seed}
    runs = []
    for i, x0 in enumerate(starts):
        for t in range(trials):
            stats = _VisitStats(lo, hi, steps)
            spec = TrajectorySpec(x0, steps, seed, i * trials + t)
            try:
                run_trajectory(system, spec, stats)
            except TrajectoryOverflow as exc:
                return ConditionReport("R", Verdict.EVIDENCE_AGAINST, {
                    "reason": "trajectory overflow", "start": x0, "trial": t,
                    "step": exc.step, "state": exc.state}, params)
            runs.append({"start": x0, "trial": t, "visits": stats.visits,
                         "last_visit": stats.last_visit, "max_gap": stats.max_gap,
                         "early_visits": stats.early_visits})
    late = all(r["last_visit"] >= steps - steps // 10 for r in runs)
    abandoned = [r for r in runs if r["last_visit"] < steps // 2]
    early = sum(r["early_visits"] for r in runs)
    total = sum(r["visits"] for r in runs)
    growth = total / early if early else (math.inf if total else 0.0)
    witness = {"runs": runs, "visit_growth": growth, "abandoned": len(abandoned)}
    if late:
        witness["signal"] = "every run revisits I in its final 10%"
        return ConditionReport("R", Verdict.EVIDENCE_FOR, witness, params)
    if growth >= GROWTH_THRESHOLD:
        witness["signal"] = "pooled visit count keeps growing"
        return ConditionReport("R", Verdict.EVIDENCE_FOR, witness, params)
    if abandoned:
        witness["signal"] = "run left I and never returned in the final 50%"
        return ConditionReport("R", Verdict.EVIDENCE_AGAINST, witness, params)
    return ConditionReport("R", Verdict.INCONCLUSIVE, witness, params)


def _mean_log(weights, values) -> float:
    return math.fsum(w * math.log(v) for w, v in zip(weights, values))


def check_recurrence_criterion(system: RandomSystem) -> ConditionReport:
    """Moment criteria for (R) for systems where every map has a linear bound.

    (a) E log A+- < 0; (b) finite support and E log A+- <= 0; (c) A+ = A-
    for every map with E log A = 0. A side whose slopes are all exactly 1
    makes the comparison recursion a walk with nonnegative steps, which never
    recurs, so (b) and (c) are not applied to such a degenerate side.
    """
    bounds, missing = [], []
    for g in system.maps:
        try:
            bounds.append(estimate_linear_bound(g))
        except NoLinearBound as exc:
            missing.append({"map": g.to_config(), "reason": str(exc)})
    if missing:
        return ConditionReport("R", Verdict.INCONCLUSIVE,
                               {"maps_without_linear_bound": missing})
    w = system.weights
    m_plus = _mean_log(w, [b.a_plus for b in bounds])
    m_minus = _mean_log(w, [b.a_minus for b in bounds])
    m_b = math.fsum(wi * max(0.0, math.log(b.b)) if b.b > 0 else 0.0
                    for wi, b in zip(w, bounds))
    degenerate = (all(b.a_plus == 1.0 for b in bounds) or
                  all(b.a_minus == 1.0 for b in bounds))
    cases = []
    if m_plus < -ZERO_TOL and m_minus < -ZERO_TOL:
        cases.append("a")
    if not degenerate:
        if m_plus <= ZERO_TOL and m_minus <= ZERO_TOL:
            cases.append("b")
        if all(b.a_plus == b.a_minus for b in bounds) and abs(m_plus) <= ZERO_TOL:
            cases.append("c")
    witness = {"mean_log_a_plus": m_plus, "mean_log_a_minus": m_minus,
               "mean_log_plus_b": m_b, "cases": cases, "degenerate_unit_slopes": degenerate,
               "bounds": [asdict(b) for b in bounds]}
    if cases:
        witness["case"] = cases[0]
        return ConditionReport("R", Verdict.PROVED, witness)
    return ConditionReport("R", Verdict.INCONCLUSIVE, witness)


# -- interval systems --------------------------------------------------------

def _interval_displacement(h: IntervalDiffeo, u: float) -> int:
    """Exact sign of h(u) - u on (0, 1)."""
    if isinstance(h, Moebius):
        s = (h.c < 1.0) - (h.c > 1.0)
    elif isinstance(h, PowerInterval):
        s = (h.p < 1.0) - (h.p > 1.0)
    elif isinstance(h, Cubic):
        s = (h.k > 0) - (h.k < 0)
        if h.inverse_branch:
            s = -s
        if u == 0.5:
            return 0
        if u > 0.5:
            s = -s
    else:
        d = h(u) - u
        return (d > 0) - (d < 0)
    return s


def check_interval_conditions(system_on_01: Sequence[tuple[IntervalDiffeo, float]],
                              grid_points: int = 4096) -> list[ConditionReport]:
    """(R'), (C') and (U') for a finitely supported system of interval maps."""
    maps = [h for h, _ in system_on_01]
    weights = [float(w) for _, w in system_on_01]
    if abs(math.fsum(weights) - 1.0) > 1e-12:
        raise ValueError("weights must sum to 1")
    d0 = [h.derivative_at_0 for h in maps]
    d1 = [h.derivative_at_1 for h in maps]
    reports = []

    finite = all(0.0 < d < math.inf for d in d0 + d1)
    if finite:
        s0, s1 = _mean_log(weights, d0), _mean_log(weights, d1)
        ok = s0 >= -ZERO_TOL and s1 >= -ZERO_TOL
        reports.append(ConditionReport("R_prime", Verdict.PROVED if ok else Verdict.EVIDENCE_AGAINST,
                                       {"mean_log_d0": s0, "mean_log_d1": s1}))
    else:
        reports.append(ConditionReport("R_prime", Verdict.INCONCLUSIVE,
                                       {"reason": "endpoint derivative is 0 or infinite",
                                        "d0": d0, "d1": d1}))

    hits = [i for i, (a, b) in enumerate(zip(d0, d1)) if a > 1.0 and b > 1.0]
    if hits:
        reports.append(ConditionReport("C_prime", Verdict.PROVED,
                                       {"map_index": hits[0], "d0": d0[hits[0]], "d1": d1[hits[0]]}))
    else:
        reports.append(ConditionReport("C_prime", Verdict.EVIDENCE_AGAINST,
                                       {"reason": "no map has h'(0) > 1 and h'(1) > 1",
                                        "d0": d0, "d1": d1}))

    grid = np.linspace(0.0, 1.0, grid_points + 2)[1:-1]
    grid_fail = []
    for u in grid:
        ys = [h(float(u)) for h in maps]
        if not (any(y > u for y in ys) and any(y < u for y in ys)):
            grid_fail.append(float(u))
    analytic_fail = []
    for u in (0.25, 0.5, 0.75):
        signs = [_interval_displacement(h, u) for h in maps]
        if not (1 in signs and -1 in signs):
            analytic_fail.append(u)
    params = {"grid_points": grid_points}
    wit = {"grid_failures": len(grid_fail)}
    if analytic_fail:
        wit["x"] = analytic_fail[0]
        reports.append(ConditionReport("U_prime", Verdict.EVIDENCE_AGAINST, wit, params))
    elif grid_fail:
        wit["x"] = grid_fail[0]
        reports.append(ConditionReport("U_prime", Verdict.EVIDENCE_AGAINST, wit, params))
    else:
        wit["analytic"] = "displacement signs are constant on (0,1/2), {1/2}, (1/2,1)"
        reports.append(ConditionReport("U_prime", Verdict.PROVED, wit, params))
    return reports
