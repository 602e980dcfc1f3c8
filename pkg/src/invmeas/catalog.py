"""Named example systems with their expected verdicts.

Each entry carries the parameters its checks are run with, so the
regression suite and the CLI draw on one table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .homeo import Affine, Conjugated, Cubic, IntegerSkew, Moebius, OddPower, diffeo_to_config
from .system import RandomSystem

SQRT2 = math.sqrt(2.0)
BIASED_P = 2.0 / 3.0
BIASED_ALPHA = math.log(2.0)

# base interval systems on [0, 1], as (map, weight) pairs
INTERVAL_MOEBIUS = ((Moebius(2.0), 0.5), (Moebius(0.5), 0.5))
INTERVAL_CUBIC = ((Moebius(2.0), 1 / 3), (Moebius(0.5), 1 / 3), (Cubic(1.0), 1 / 3))


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    system: RandomSystem
    expected: dict
    provenance: str
    checks: dict = field(default_factory=dict)
    interval_system: tuple | None = None


def _system(pairs, label):
    return RandomSystem(tuple(g for g, _ in pairs), tuple(w for _, w in pairs), label)


def _conjugated(base, label):
    return _system([(Conjugated(h), w) for h, w in base], label)


def _integer_skew(base, label):
    return _system([(IntegerSkew(h, s), w / 3) for h, w in base for s in (0, 1, -1)], label)


def _fixed_points():
    return CatalogEntry(
        "fixed-points",
        _system([(OddPower(1 / 3), 0.5), (OddPower(1 / 5), 0.5)], "fixed-points"),
        {"C": "proved", "U": "evidence_against", "uniqueness": "distinct_measures_detected"},
        "odd roots x^(1/3), x^(1/5): contraction holds, unbounded action fails at 0",
        {"contraction": {"compactK": [-8.0, 8.0], "target": [-2.0, 2.0], "max_word_len": 5},
         "uniqueness": {"starts": [0.5, -0.5], "window": [-1.5, 1.5], "bins": 30,
                        "steps": 100_000, "trials": 1}})


def _srw_lazy():
    return CatalogEntry(
        "srw-lazy",
        _system([(Affine(1.0, -1.0), 1 / 3), (Affine(1.0, 0.0), 1 / 3), (Affine(1.0, 1.0), 1 / 3)],
                "srw-lazy"),
        {"U": "proved", "C": "inconclusive", "R_empirical": "evidence_for",
         "uniqueness": "distinct_measures_detected", "orbit": "closed"},
        "lazy simple random walk on Z: unbounded action without contraction; "
        "counting measures on Z + k are all invariant",
        {"contraction": {"compactK": [-2.0, 2.0], "target": [-1.0, 1.0], "max_word_len": 8},
         "recurrence": {"candidate_I": [-2.0, 2.0], "starts": [0.0], "steps": 1_000_000,
                        "trials": 16},
         "uniqueness": {"starts": [0.0, 0.5], "window": [-3.0, 3.0], "bins": 12,
                        "steps": 1_000_000, "trials": 4},
         "orbit": {"x0": 0.0, "windowK": [-2.0, 2.0], "points": [-2.0, -1.0, 0.0, 1.0, 2.0]}})


def _integer_skew_entry():
    return CatalogEntry(
        "integer-skew",
        _integer_skew(INTERVAL_CUBIC, "integer-skew"),
        {"U": "evidence_for", "C": "inconclusive", "uniqueness": "distinct_measures_detected"},
        "integer skew product over the interval-cubic system: Z is a closed invariant "
        "set next to an ergodic measure of full support",
        {"contraction": {"compactK": [-2.0, 2.0], "target": [-1.0, 1.0], "max_word_len": 4},
         "uniqueness": {"starts": [0.0, 0.5], "window": [-3.0, 3.0], "bins": 12,
                        "steps": 1_000_000, "trials": 4}},
        INTERVAL_CUBIC)


def _biased_lattice():
    return CatalogEntry(
        "biased-lattice",
        _system([(Affine(1.0, 1.0), BIASED_P), (Affine(1.0, -1.0), 1.0 - BIASED_P)],
                "biased-lattice"),
        {"U": "proved", "C": "inconclusive", "R_empirical": "evidence_against",
         "R_criterion": "inconclusive"},
        "non-centred walk on Z: counting measure and e^(alpha x) with alpha = log 2 "
        "are both invariant",
        {"contraction": {"compactK": [-2.0, 2.0], "target": [-1.0, 1.0], "max_word_len": 8},
         "recurrence": {"candidate_I": [-2.0, 2.0], "starts": [0.0], "steps": 100_000,
                        "trials": 4},
         "orbit": {"x0": 0.0, "windowK": [-2.0, 2.0]},
         "alpha": BIASED_ALPHA})


def _uniform_bernoulli():
    return CatalogEntry(
        "uniform-bernoulli",
        _system([(Affine(0.5, 0.0), 0.5), (Affine(0.5, 1.0), 0.5)], "uniform-bernoulli"),
        {"C": "proved", "R_criterion": "proved", "R_empirical": "evidence_for",
         "U": "evidence_against", "uniqueness": "consistent_with_unique"},
        "affine system x/2, x/2 + 1: unique invariant law, uniform on [0, 2]; "
        "unbounded action fails at the fixed point 0",
        {"contraction": {"compactK": [-8.0, 8.0], "target": [-4.0, 4.0], "max_word_len": 12},
         "recurrence": {"candidate_I": [-1.0, 3.0], "starts": [0.0, 5.0], "steps": 100_000,
                        "trials": 2},
         "uniqueness": {"starts": [0.0, 1.0, 5.0, -3.0], "window": [0.0, 2.0], "bins": 20,
                        "steps": 1_000_000, "trials": 1}})


def _cantor():
    return CatalogEntry(
        "cantor",
        _system([(Affine(1 / 3, 0.0), 0.5), (Affine(1 / 3, 2 / 3), 0.5)], "cantor"),
        {"C": "proved", "R_criterion": "proved", "U": "evidence_against",
         "uniqueness": "consistent_with_unique"},
        "middle-thirds IFS: unique invariant law supported on the Cantor set",
        {"contraction": {"compactK": [-8.0, 8.0], "target": [-1.0, 2.0], "max_word_len": 12},
         "uniqueness": {"starts": [0.0, 0.5, 1.0], "window": [0.0, 1.0], "bins": 9,
                        "steps": 1_000_000, "trials": 1}})


def _choquet_deny():
    steps = [(Affine(1.0, b), 0.25) for b in (1.0, -1.0, SQRT2, -SQRT2)]
    return CatalogEntry(
        "choquet-deny",
        _system(steps, "choquet-deny"),
        {"U": "proved", "C": "inconclusive", "R_empirical": "evidence_for"},
        "centred translations by +-1 and +-sqrt 2: Lebesgue measure is the unique "
        "invariant Radon measure",
        {"contraction": {"compactK": [-2.0, 2.0], "target": [-1.0, 1.0], "max_word_len": 6},
         "recurrence": {"candidate_I": [-2.0, 2.0], "starts": [0.0], "steps": 1_000_000,
                        "trials": 16},
         "ratio": {"phi": [0.0, 0.5], "Phi": [0.0, 1.0], "steps": 10_000_000}})


def _interval_moebius():
    return CatalogEntry(
        "interval-moebius",
        _conjugated(INTERVAL_MOEBIUS, "interval-moebius"),
        {"R_prime": "proved", "C_prime": "evidence_against", "U_prime": "proved",
         "R_criterion": "proved", "U": "proved", "C": "inconclusive",
         "orbit": "closed"},
        "Moebius maps with c = 2 and c = 1/2 conjugated to the line. Both fix only 0 and 1, "
        "so no map expands both ends; the log-odds walk has lattice orbits, each carrying "
        "its own invariant counting measure",
        {"contraction": {"compactK": [-2.0, 2.0], "target": [-1.0, 1.0], "max_word_len": 8},
         "orbit": {"x0": 0.0, "windowK": [-2.0, 2.0], "points": [-1.5, 0.0, 1.5]}},
        INTERVAL_MOEBIUS)


def _interval_cubic():
    return CatalogEntry(
        "interval-cubic",
        _conjugated(INTERVAL_CUBIC, "interval-cubic"),
        {"R_prime": "proved", "C_prime": "proved", "U_prime": "proved",
         "R_criterion": "proved", "U": "proved", "uniqueness": "consistent_with_unique"},
        "Moebius maps c = 2, 1/2 plus the cubic u + u(1-u)(1-2u), which expands both "
        "ends; unique invariant measure on (0, 1) carried to the line",
        {"uniqueness": {"starts": [0.0, SQRT2 - 1.0 / SQRT2, 5.0], "window": [-4.0, 4.0],
                        "bins": 16, "steps": 1_000_000, "trials": 1}},
        INTERVAL_CUBIC)


_BUILDERS = {
    "fixed-points": _fixed_points,
    "srw-lazy": _srw_lazy,
    "integer-skew": _integer_skew_entry,
    "biased-lattice": _biased_lattice,
    "uniform-bernoulli": _uniform_bernoulli,
    "cantor": _cantor,
    "choquet-deny": _choquet_deny,
    "interval-moebius": _interval_moebius,
    "interval-cubic": _interval_cubic,
}


def names() -> list[str]:
    return list(_BUILDERS)


def build(name: str) -> CatalogEntry:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown catalog entry {name!r}; available: {', '.join(_BUILDERS)}") from None


def entry_config(entry: CatalogEntry) -> dict:
    """Config-format dump of an entry: the system plus its metadata."""
    d = {"name": entry.name, "system": entry.system.to_config(), "expected": entry.expected,
         "provenance": entry.provenance, "checks": entry.checks}
    if entry.interval_system is not None:
        d["interval_system"] = [{"map": diffeo_to_config(h), "weight": w}
                                for h, w in entry.interval_system]
    return d


def evaluate(entry: CatalogEntry, seed: int = 0, threads: int | None = None) -> dict:
    """Run every check named in ``entry.expected`` with the entry's own parameters.

    Returns the observed verdicts keyed like ``expected``, plus the full
    reports under ``"reports"``.
    """
    from .conditions import (check_contraction, check_interval_conditions,
                             check_recurrence_criterion, check_recurrence_empirical,
                             check_unbounded)
    from .estimate import uniqueness_test
    from .orbit import enumerate_orbit

    s, checks = entry.system, entry.checks
    observed, reports = {}, {}
    for key in entry.expected:
        if key == "U":
            rep = check_unbounded(s)
        elif key == "C":
            c = checks["contraction"]
            rep = check_contraction(s, c["target"], c["compactK"], c["max_word_len"])
        elif key == "R_criterion":
            rep = check_recurrence_criterion(s)
        elif key == "R_empirical":
            r = checks["recurrence"]
            rep = check_recurrence_empirical(s, r["candidate_I"], r["starts"], r["steps"],
                                             r["trials"], seed)
        elif key == "uniqueness":
            u = checks["uniqueness"]
            rep = uniqueness_test(s, u["starts"], u["window"], u["bins"], u["steps"],
                                  u["trials"], seed, threads=threads)
        elif key == "orbit":
            o = checks["orbit"]
            sl = enumerate_orbit(s, o["x0"], o["windowK"])
            observed[key] = "closed" if sl.closed else "open"
            reports[key] = {"points": list(sl.points), "closed": sl.closed}
            continue
        elif key in ("R_prime", "C_prime", "U_prime"):
            if "interval" not in reports:
                reports["interval"] = {r.condition: r for r in
                                       check_interval_conditions(entry.interval_system)}
            rep = reports["interval"][key]
        else:
            raise KeyError(f"{entry.name}: no check for expected key {key!r}")
        reports[key] = rep
        observed[key] = getattr(rep.verdict, "value", rep.verdict)
    observed["reports"] = reports
    return observed
