"""Occupation statistics and ratio estimators for invariant Radon measures.

Invariant measures are only defined up to a positive constant, so every
quantity reported here is a ratio: bin counts against a reference cell, or
visits to one set against visits to another.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .system import (RandomSystem, TrajectoryOverflow, TrajectorySpec, map_streams,
                     run_trajectory)

log = logging.getLogger(__name__)

N_BATCHES = 16
NOISE_FLOOR = 100
DEFAULT_TOL = 0.05


class DegenerateDenominator(ZeroDivisionError):
    """The normalizing set was never visited."""


def default_burn_in(steps: int) -> int:
    return steps // 100


def _interval(iv) -> tuple[float, float]:
    lo, hi = float(iv[0]), float(iv[1])
    if not lo < hi:
        raise ValueError(f"interval must satisfy lo < hi, got [{lo}, {hi})")
    return lo, hi


@dataclass
class OccupationHistogram:
    """Visit counts of a trajectory on a uniform grid over ``[lo, hi)``.

    Mass outside the window goes to ``below`` / ``above``, so
    ``counts.sum() + below + above == total_steps`` always holds.
    """

    window: tuple[float, float]
    bins: int
    counts: np.ndarray = None
    below: int = 0
    above: int = 0
    total_steps: int = 0

    def __post_init__(self):
        self.window = _interval(self.window)
        if self.bins < 1:
            raise ValueError(f"bins must be >= 1, got {self.bins}")
        if self.counts is None:
            self.counts = np.zeros(self.bins, dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)
            if self.counts.shape != (self.bins,):
                raise ValueError("counts must have one entry per bin")

    @property
    def width(self) -> float:
        return (self.window[1] - self.window[0]) / self.bins

    @property
    def edges(self) -> np.ndarray:
        lo, _ = self.window
        return lo + self.width * np.arange(self.bins + 1)

    @property
    def in_window(self) -> int:
        return int(self.counts.sum())

    def add_states(self, states: np.ndarray) -> None:
        lo, hi = self.window
        below = states < lo
        above = states >= hi
        inside = states[~(below | above)]
        idx = ((inside - lo) * (self.bins / (hi - lo))).astype(np.int64)
        np.minimum(idx, self.bins - 1, out=idx)
        self.counts += np.bincount(idx, minlength=self.bins)
        self.below += int(below.sum())
        self.above += int(above.sum())
        self.total_steps += len(states)

    def merge(self, other: OccupationHistogram) -> OccupationHistogram:
        if self.window != other.window or self.bins != other.bins:
            raise ValueError("can only merge histograms over the same window and bins")
        return OccupationHistogram(self.window, self.bins, self.counts + other.counts,
                                   self.below + other.below, self.above + other.above,
                                   self.total_steps + other.total_steps)

    __add__ = merge

    def conserved(self) -> bool:
        return self.in_window + self.below + self.above == self.total_steps


class _Retained:
    """Mixin for visitors that ignore states with index <= burn_in."""

    burn_in: int

    def _slice(self, states, first):
        skip = self.burn_in + 1 - first
        if skip <= 0:
            return states, first
        return states[skip:], first + skip


@dataclass
class HistogramVisitor(_Retained):
    hist: OccupationHistogram
    burn_in: int = 0

    def visit_block(self, states, first):
        states, _ = self._slice(states, first)
        if len(states):
            self.hist.add_states(states)


def occupation(system: RandomSystem, spec: TrajectorySpec, window, bins: int,
               burn_in: int | None = None) -> OccupationHistogram:
    """Histogram of X_k for burn_in < k <= steps."""
    burn_in = default_burn_in(spec.steps) if burn_in is None else int(burn_in)
    if not 0 <= burn_in < spec.steps:
        raise ValueError(f"burn_in must lie in [0, steps), got {burn_in}")
    visitor = HistogramVisitor(OccupationHistogram(window, bins), burn_in)
    try:
        run_trajectory(system, spec, visitor)
    except TrajectoryOverflow as exc:
        exc.partial = visitor.hist
        raise
    return visitor.hist


def merge_all(hists: Sequence[OccupationHistogram]) -> OccupationHistogram:
    """Fieldwise sum in the given (stream-index) order."""
    out = hists[0]
    for h in hists[1:]:
        out = out.merge(h)
    return out


@dataclass(frozen=True)
class RatioEstimate:
    value: float
    numerator_mass: int
    denominator_mass: int
    n: int
    batch_dispersion: float


@dataclass
class RatioVisitor(_Retained):
    phi: tuple[float, float]
    Phi: tuple[float, float]
    burn_in: int
    steps: int
    num: np.ndarray = field(default_factory=lambda: np.zeros(N_BATCHES, dtype=np.int64))
    den: np.ndarray = field(default_factory=lambda: np.zeros(N_BATCHES, dtype=np.int64))

    def visit_block(self, states, first):
        states, first = self._slice(states, first)
        if not len(states):
            return
        retained = self.steps - self.burn_in
        k = np.arange(first, first + len(states), dtype=np.int64)
        batch = ((k - self.burn_in - 1) * N_BATCHES) // retained
        in_phi = (states >= self.phi[0]) & (states < self.phi[1])
        in_Phi = (states >= self.Phi[0]) & (states < self.Phi[1])
        self.num += np.bincount(batch[in_phi], minlength=N_BATCHES)
        self.den += np.bincount(batch[in_Phi], minlength=N_BATCHES)


def ratio_estimate(system: RandomSystem, spec: TrajectorySpec, phi_set, Phi_set,
                   burn_in: int | None = None) -> RatioEstimate:
    """S_n 1_phi / S_n 1_Phi along one trajectory, over half-open sets [a, b).

    ``Phi_set`` should contain a recurrent interval of the chain; that is the
    caller's responsibility. Dispersion is the standard deviation of the
    ratio over 16 equal batches and is advisory only.
    """
    burn_in = default_burn_in(spec.steps) if burn_in is None else int(burn_in)
    if not 0 <= burn_in < spec.steps:
        raise ValueError(f"burn_in must lie in [0, steps), got {burn_in}")
    v = RatioVisitor(_interval(phi_set), _interval(Phi_set), burn_in, spec.steps)
    run_trajectory(system, spec, v)
    num, den = int(v.num.sum()), int(v.den.sum())
    if den == 0:
        raise DegenerateDenominator(f"no visits to {Phi_set} in {spec.steps} steps")
    ok = v.den > 0
    per_batch = v.num[ok] / v.den[ok]
    disp = float(np.std(per_batch, ddof=1)) if per_batch.size >= 2 else math.nan
    return RatioEstimate(num / den, num, den, spec.steps - burn_in, disp)


@dataclass(frozen=True)
class MeasureProfile:
    """Per-bin visit counts divided by the visit count of ``reference_cell``."""

    histogram: OccupationHistogram
    reference_cell: tuple[float, float]
    reference_mass: int
    start: float
    seed: int

    @property
    def ratios(self) -> np.ndarray:
        return self.histogram.counts / self.reference_mass

    def value_at(self, x: float) -> float:
        h = self.histogram
        i = int((x - h.window[0]) // h.width)
        return float(self.ratios[i])


@dataclass
class _ProfileVisitor(_Retained):
    hist: OccupationHistogram
    ref: tuple[float, float]
    burn_in: int
    ref_mass: int = 0

    def visit_block(self, states, first):
        states, _ = self._slice(states, first)
        if len(states):
            self.hist.add_states(states)
            self.ref_mass += int(((states >= self.ref[0]) & (states < self.ref[1])).sum())


def measure_profile(system: RandomSystem, start: float, window, bins: int, reference_cell,
                    steps: int, seed: int, burn_in: int | None = None,
                    stream_index: int = 0) -> MeasureProfile:
    """Estimate nu_start on ``window``, normalized so the reference cell has mass 1."""
    window = _interval(window)
    ref = _interval(reference_cell)
    if not (window[0] <= ref[0] and ref[1] <= window[1]):
        raise ValueError(f"reference cell {ref} must lie inside window {window}")
    spec = TrajectorySpec(start, steps, seed, stream_index)
    burn_in = default_burn_in(steps) if burn_in is None else int(burn_in)
    v = _ProfileVisitor(OccupationHistogram(window, bins), ref, burn_in)
    run_trajectory(system, spec, v)
    if v.ref_mass == 0:
        raise DegenerateDenominator(f"reference cell {ref} never visited from start {start}")
    return MeasureProfile(v.hist, ref, v.ref_mass, float(start), seed)


@dataclass
class UniquenessResult:
    verdict: str
    evidence: dict

    def to_dict(self):
        return {"verdict": self.verdict, "evidence": self.evidence}


CONSISTENT = "consistent_with_unique"
DISTINCT = "distinct_measures_detected"
INCONCLUSIVE = "inconclusive"


def _normalized(counts: np.ndarray) -> np.ndarray:
    return counts / counts.max()


def compare_profiles(hists: Sequence[OccupationHistogram | None], tol: float,
                     noise_floor: int = NOISE_FLOOR) -> UniquenessResult:
    """Pairwise L-infinity comparison of max-normalized histograms."""
    valid = [(i, h) for i, h in enumerate(hists) if h is not None and h.in_window > 0]
    worst = {"distance": 0.0}
    distinct = None
    pairs = list(itertools.combinations(valid, 2))
    compared = 0
    for (i, a), (j, b) in pairs:
        mask = (a.counts + b.counts) >= noise_floor
        if not mask.any():
            continue
        compared += 1
        diff = np.abs(_normalized(a.counts) - _normalized(b.counts))
        diff[~mask] = 0.0
        k = int(np.argmax(diff))
        d = float(diff[k])
        if d > worst["distance"]:
            worst = {"distance": d, "pair": [i, j], "bin": k,
                     "bin_lo": float(a.edges[k]), "bin_hi": float(a.edges[k + 1])}
        if d > 3 * tol and distinct is None:
            distinct = {"distance": d, "pair": [i, j], "bin": k,
                        "bin_lo": float(a.edges[k]), "bin_hi": float(a.edges[k + 1])}
    evidence = {"worst": worst, "compared_profiles": len(valid), "compared_pairs": compared,
                "tol": tol, "noise_floor": noise_floor}
    if distinct is not None:
        evidence["separating"] = distinct
        return UniquenessResult(DISTINCT, evidence)
    # agreement needs every pair to have been compared on some bin above the floor
    if pairs and compared == len(pairs) and worst["distance"] <= tol:
        return UniquenessResult(CONSISTENT, evidence)
    return UniquenessResult(INCONCLUSIVE, evidence)


def uniqueness_test(system: RandomSystem, starts: Sequence[float], window, bins: int,
                    steps: int, trials: int, seed: int, tol: float = DEFAULT_TOL,
                    burn_in: int | None = None, threads: int | None = None) -> UniquenessResult:
    """Compare occupation profiles from several starts.

    Run ``(start_i, trial_t)`` uses stream ``i * trials + t``. The trials of
    one start are merged in stream order into a single profile, and the
    starts are compared pairwise on max-normalized profiles. Bins with fewer
    than 100 combined visits are ignored. A failing run is recorded in the
    evidence and does not stop the others.
    """
    if len(starts) < 2:
        raise ValueError("uniqueness_test needs at least two starts")
    if not 0 < tol < 1:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    jobs = [(i, t, float(x)) for i, x in enumerate(starts) for t in range(trials)]

    def one(job):
        i, t, x = job
        try:
            return occupation(system, TrajectorySpec(x, steps, seed, i * trials + t),
                              window, bins, burn_in), None
        except (TrajectoryOverflow, ValueError) as exc:
            return None, f"start {x} trial {t}: {exc}"

    results = map_streams(one, jobs, threads)
    pooled = []
    for i in range(len(starts)):
        mine = [h for h, _ in results[i * trials:(i + 1) * trials] if h is not None]
        pooled.append(merge_all(mine) if mine else None)
    result = compare_profiles(pooled, tol)
    result.evidence["runs"] = [
        {"start": x, "trial": t, "stream": i * trials + t,
         "in_window": (h.in_window if h is not None else None), "error": err}
        for (i, t, x), (h, err) in zip(jobs, results)]
    for key in ("worst", "separating"):
        if key in result.evidence and "pair" in result.evidence[key]:
            a, b = result.evidence[key]["pair"]
            result.evidence[key]["starts"] = [float(starts[a]), float(starts[b])]
    return result
