"""Finite-support random systems and trajectory simulation.

A :class:`RandomSystem` is the pair (maps, weights). Trajectories are driven
by counter-based Philox streams: stream ``i`` of master seed ``s`` is keyed by
``SeedSequence(s, spawn_key=(i,))``, so any stream can be regenerated on its
own and parallel batches do not depend on scheduling.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import _kernels as K
from .homeo import Homeo, from_config

log = logging.getLogger(__name__)

BLOCK = 1 << 16
WEIGHT_TOL = 1e-12


class TrajectoryOverflow(ArithmeticError):
    """A state left the representable range; carries the step and last finite state."""

    def __init__(self, step, state, label=""):
        self.step = step
        self.state = state
        self.label = label
        super().__init__(f"trajectory of {label or 'system'} overflows at step {step} "
                         f"(last finite state {state!r})")


def alias_table(weights: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Vose alias table for the given probabilities."""
    n = len(weights)
    scaled = [w * n for w in weights]
    prob = np.zeros(n)
    alias = np.arange(n, dtype=np.int64)
    small = [i for i, s in enumerate(scaled) if s < 1.0]
    large = [i for i, s in enumerate(scaled) if s >= 1.0]
    while small and large:
        s, l = small.pop(), large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] = scaled[l] + scaled[s] - 1.0
        (small if scaled[l] < 1.0 else large).append(l)
    for i in large + small:
        prob[i] = 1.0
    return prob, alias


@dataclass(frozen=True)
class CompiledSystem:
    prob: np.ndarray
    alias: np.ndarray
    map_start: np.ndarray
    op_code: np.ndarray
    op_par: np.ndarray
    bx: np.ndarray
    by: np.ndarray

    def kernel_args(self):
        return (self.prob, self.alias, self.map_start, self.op_code, self.op_par,
                self.bx, self.by)


@dataclass(frozen=True)
class RandomSystem:
    maps: tuple
    weights: tuple
    label: str = ""

    def __post_init__(self):
        maps = tuple(self.maps)
        weights = tuple(float(w) for w in self.weights)
        if not maps:
            raise ValueError("a random system needs at least one map")
        if len(maps) != len(weights):
            raise ValueError(f"{len(maps)} maps but {len(weights)} weights")
        for w in weights:
            if not (0.0 < w <= 1.0):
                raise ValueError(f"weights must lie in (0, 1], got {w!r}")
        total = math.fsum(weights)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1 (within {WEIGHT_TOL}), got {total!r}")
        merged: dict[Homeo, float] = {}
        for g, w in zip(maps, weights):
            if not isinstance(g, Homeo):
                raise TypeError(f"not a Homeo: {g!r}")
            merged[g] = merged.get(g, 0.0) + w
        object.__setattr__(self, "maps", tuple(merged))
        object.__setattr__(self, "weights", tuple(merged.values()))

    def __len__(self):
        return len(self.maps)

    def items(self):
        return zip(self.maps, self.weights)

    @cached_property
    def compiled(self) -> CompiledSystem:
        prob, alias = alias_table(self.weights)
        starts, codes, pars, bx, by = [0], [], [], [], []
        for g in self.maps:
            for code, par, table in g.ops():
                par = list(par)
                if table is not None:
                    par[0], par[1] = float(len(bx)), float(len(table[0]))
                    bx.extend(table[0])
                    by.extend(table[1])
                codes.append(code)
                pars.append(par)
            starts.append(len(codes))
        return CompiledSystem(prob, alias, np.array(starts, dtype=np.int64),
                              np.array(codes, dtype=np.int64),
                              np.array(pars, dtype=np.float64).reshape(-1, 4),
                              np.array(bx, dtype=np.float64), np.array(by, dtype=np.float64))

    def to_config(self) -> dict:
        return {"label": self.label,
                "maps": [{"map": g.to_config(), "weight": w} for g, w in self.items()]}

    @classmethod
    def from_config(cls, d: dict[str, Any]) -> RandomSystem:
        entries = d.get("maps")
        if not entries:
            raise ValueError("system config needs a nonempty 'maps' list")
        maps = [from_config(e["map"]) for e in entries]
        weights = [float(e["weight"]) for e in entries]
        return cls(tuple(maps), tuple(weights), d.get("label", ""))


@dataclass(frozen=True)
class TrajectorySpec:
    start: float
    steps: int
    seed: int
    stream_index: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")


def reversed_system(system: RandomSystem) -> RandomSystem:
    """The system driven by the inverse maps with unchanged weights."""
    label = system.label[:-9] if system.label.endswith(" reversed") else system.label + " reversed"
    return RandomSystem(tuple(g.inverse() for g in system.maps), system.weights, label)


def stream_rng(seed: int, stream_index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_index),))
    return np.random.Generator(np.random.Philox(ss))


def sample_step(system: RandomSystem, rng: np.random.Generator) -> Homeo:
    """Draw one map with probability equal to its weight; consumes one uniform."""
    c = system.compiled
    return system.maps[K.alias_pick.py_func(rng.random(), c.prob, c.alias)]


def _dispatch(visitor, states, first):
    if visitor is None:
        return
    block = getattr(visitor, "visit_block", None)
    if block is not None:
        block(states, first)
    else:
        for x in states:
            visitor(float(x))


def run_trajectory(system: RandomSystem, spec: TrajectorySpec, visitor=None,
                   rng: np.random.Generator | None = None) -> float:
    """Iterate X_k = g_k(X_{k-1}) for ``spec.steps`` steps and return X_n.

    ``visitor`` sees X_0, ..., X_n in order. Objects with a
    ``visit_block(states, first_index)`` method receive numpy chunks; any
    other callable is called once per state.
    """
    if rng is None:
        rng = stream_rng(spec.seed, spec.stream_index)
    args = system.compiled.kernel_args()
    x = float(spec.start)
    if not math.isfinite(x):
        raise ValueError(f"start must be finite, got {x!r}")
    _dispatch(visitor, np.array([x]), 0)
    out = np.empty(min(BLOCK, spec.steps))
    done = 0
    while done < spec.steps:
        m = min(BLOCK, spec.steps - done)
        u = rng.random(m)
        fail, x = K.advance(x, u, *args, out[:m])
        if fail >= 0:
            _dispatch(visitor, out[:fail], done + 1)
            raise TrajectoryOverflow(done + fail + 1, float(x), system.label)
        _dispatch(visitor, out[:m], done + 1)
        done += m
    return float(x)


def drawn_indices(system: RandomSystem, spec: TrajectorySpec) -> np.ndarray:
    """Indices of the maps applied by :func:`run_trajectory` for ``spec``, in order."""
    c = system.compiled
    rng = stream_rng(spec.seed, spec.stream_index)
    n = len(c.prob)
    out = []
    done = 0
    while done < spec.steps:
        m = min(BLOCK, spec.steps - done)
        t = rng.random(m) * n
        j = np.minimum(t.astype(np.int64), n - 1)
        out.append(np.where(t - j < c.prob[j], j, c.alias[j]))
        done += m
    return np.concatenate(out)


def default_threads() -> int:
    return os.cpu_count() or 1


def map_streams(func: Callable, items: Iterable, threads: int | None = None) -> list:
    """Apply ``func`` to each item, possibly in threads, returning results in item order."""
    items = list(items)
    threads = threads or default_threads()
    if threads <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
