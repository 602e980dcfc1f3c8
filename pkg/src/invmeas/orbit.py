"""Discrete orbits, induced first-return kernels and the reversal identity.

For a point x0 and a window K, the orbit slice is the part of the orbit of
x0 under the group generated by the maps that lies in K. The induced kernel
p_K(x, y) is the law of the first return to the slice. For the reversed
system it satisfies p^_K(x, y) = p_K(y, x) whenever counting measure on the
orbit is invariant. Both facts are checked here numerically.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import _kernels as K
from .homeo import Affine, HomeoRangeError
from .system import RandomSystem, map_streams, reversed_system, stream_rng

MERGE_TOL = 1e-12
EQUAL_ATOMS_TOL = 1e-9
DEFAULT_MAX_DEPTH = 256
DEFAULT_MAX_POINTS = 10_000
DEFAULT_MAX_EXCURSION = 3
WEIGHT_DENOMINATOR = 10**12


class KernelCapabilityError(ValueError):
    """The exact induced kernel is not available for this system."""


@dataclass(frozen=True)
class OrbitSlice:
    base_point: float
    windowK: tuple[float, float]
    points: tuple[float, ...]
    generation_depth: int
    closed: bool

    def index(self, x: float) -> int:
        """Index of the slice point within the merge tolerance of x, or -1."""
        i = int(np.searchsorted(self.points, x))
        for j in (i - 1, i):
            if 0 <= j < len(self.points) and abs(self.points[j] - x) <= MERGE_TOL * max(1.0, abs(x)):
                return j
        return -1


@dataclass
class InducedKernel:
    states: tuple[float, ...]
    matrix: np.ndarray
    method: str
    escape_mass: np.ndarray
    exact_matrix: list | None = None
    unmatched_mass: np.ndarray | None = None
    parameters: dict = field(default_factory=dict)


def lattice_jumps(system: RandomSystem) -> list[tuple[int, Fraction]] | None:
    """Integer translation amounts with exact weights, or None if not a lattice system.

    Weights are snapped to the nearest fraction with denominator at most
    1e12 and renormalized, so 1/3 given as a float becomes exactly 1/3.
    """
    out = []
    for g, w in system.items():
        if not (isinstance(g, Affine) and g.a == 1.0 and float(g.b).is_integer()):
            return None
        out.append((int(g.b), Fraction(w).limit_denominator(WEIGHT_DENOMINATOR)))
    total = sum(w for _, w in out)
    return [(j, w / total) for j, w in out]


def _window(windowK) -> tuple[float, float]:
    lo, hi = float(windowK[0]), float(windowK[1])
    if not lo <= hi:
        raise ValueError(f"window must satisfy lo <= hi, got [{lo}, {hi}]")
    return lo, hi


def _bfs(start, inside, step_all, max_depth, max_points, max_excursion):
    """Breadth-first closure of ``start`` under ``step_all``.

    Nodes are (point, steps spent outside the window). A path may leave the
    window for up to ``max_excursion`` consecutive steps, so points reached
    only through short excursions are found. Returns (points in window,
    depth, closed).
    """
    seen = {(start, 0)}
    found = {start}
    frontier = [(start, 0)]
    depth = 0
    while frontier:
        if depth >= max_depth:
            return found, depth, False
        depth += 1
        nxt = []
        for p, out in frontier:
            for y in step_all(p):
                node = (y, 0) if inside(y) else (y, out + 1)
                if node[1] > max_excursion or node in seen:
                    continue
                seen.add(node)
                nxt.append(node)
                if node[1] == 0 and y not in found:
                    found.add(y)
                    if len(found) > max_points:
                        return found, depth, False
        frontier = nxt
    return found, depth - 1 if depth else 0, True


def enumerate_orbit(system: RandomSystem, x0: float, windowK, max_depth: int = DEFAULT_MAX_DEPTH,
                    max_points: int = DEFAULT_MAX_POINTS,
                    max_excursion: int = DEFAULT_MAX_EXCURSION) -> OrbitSlice:
    """Points of the group orbit of x0 inside K, by breadth-first search.

    Search paths may spend up to ``max_excursion`` consecutive steps
    outside K. The slice is ``closed`` when a further generation adds no
    point; hitting ``max_depth`` or ``max_points`` first returns the partial
    slice with ``closed=False``. Lattice systems run on exact integer offsets.
    """
    lo, hi = _window(windowK)
    x0 = float(x0)
    if not lo <= x0 <= hi:
        raise ValueError(f"x0={x0} must lie in the window [{lo}, {hi}]")
    jumps = lattice_jumps(system)
    if jumps is not None:
        gens = sorted({j for j, _ in jumps} | {-j for j, _ in jumps})

        def inside(k):
            return lo <= x0 + k <= hi

        seen, depth, closed = _bfs(0, inside, lambda k: [k + j for j in gens], max_depth, max_points,
                                    max_excursion)
        pts = sorted(x0 + k for k in seen)
    else:
        gens = list(system.maps) + [g.inverse() for g in system.maps]
        values = {}

        def key(x):
            return round(x / MERGE_TOL)

        def step_all(k):
            x = values[k]
            out = []
            for g in gens:
                try:
                    y = g.apply(x)
                except HomeoRangeError:
                    continue
                ky = key(y)
                values.setdefault(ky, y)
                out.append(ky)
            return out

        k0 = key(x0)
        values[k0] = x0
        seen, depth, closed = _bfs(k0, lambda k: lo <= values[k] <= hi, step_all,
                                   max_depth, max_points, max_excursion)
        pts = sorted(values[k] for k in seen)
    return OrbitSlice(x0, (lo, hi), tuple(pts), depth, closed)


# -- induced kernels ---------------------------------------------------------

def _exact_matrix(system: RandomSystem, states: Sequence[float]) -> list[list[Fraction]]:
    jumps = lattice_jumps(system)
    if jumps is None:
        raise KernelCapabilityError("exact kernels need an integer translation system")
    n = len(states)
    nonzero = {abs(j) for j, _ in jumps if j}
    if not nonzero:
        return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    if len(nonzero) > 1:
        raise KernelCapabilityError(f"exact kernels need a skip-free walk, jumps are {sorted(nonzero)}")
    d = nonzero.pop()
    for a, b in zip(states, states[1:]):
        if b - a != d:
            raise KernelCapabilityError("slice is not a contiguous run of the lattice")
    up = sum((w for j, w in jumps if j > 0), Fraction(0))
    down = sum((w for j, w in jumps if j < 0), Fraction(0))
    stay = sum((w for j, w in jumps if j == 0), Fraction(0))
    # minimal solutions of the gambler's-ruin recursion: P(ever return across the edge)
    back_from_above = min(Fraction(1), down / up) if up else Fraction(1)
    back_from_below = min(Fraction(1), up / down) if down else Fraction(1)
    P = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        P[i][i] += stay
        if i + 1 < n:
            P[i][i + 1] += up
        else:
            P[i][i] += up * back_from_above
        if i > 0:
            P[i][i - 1] += down
        else:
            P[i][i] += down * back_from_below
    return P


def _simulated_row(system, states, lo, hi, x0, n_exc, horizon, seed, stream):
    args = system.compiled.kernel_args()
    rng = stream_rng(seed, stream)
    landed = np.empty(n_exc)
    x, t, done = float(x0), 0, 0
    while done < n_exc:
        u = rng.random(1 << 16)
        x, t, done = K.excursions(float(x0), lo, hi, horizon, x, t, u, *args, landed, done)
    row = np.zeros(len(states))
    escaped = np.isnan(landed)
    unmatched = 0
    sl = np.asarray(states)
    for y in landed[~escaped]:
        i = int(np.argmin(np.abs(sl - y)))
        if abs(sl[i] - y) <= 1e-9 * max(1.0, abs(y)):
            row[i] += 1
        else:
            unmatched += 1
    return row / n_exc, escaped.sum() / n_exc, unmatched / n_exc


def induced_kernel(system: RandomSystem, slice: OrbitSlice, method: str = "exact",
                   horizon: int = 10**6, seed: int = 0, excursions: int = 10**5,
                   threads: int | None = None) -> InducedKernel:
    """First-return kernel p_K on the slice points.

    ``exact`` is offered for skip-free integer translation walks: leaving
    the slice across an edge, the walk comes back to the same edge point
    with probability min(1, q/p) (q the step probability back toward the
    slice, p the one away from it). Rows may sum to less than 1 for
    transient walks; the missing mass is ``escape_mass``.
    ``simulated`` runs ``excursions`` first returns per state, truncated at
    ``horizon`` steps; row i uses stream i of ``seed``.
    """
    states = slice.points
    n = len(states)
    if method == "exact":
        if not slice.closed:
            raise KernelCapabilityError("exact kernels need a closed orbit slice")
        P = _exact_matrix(system, states)
        esc = [1 - sum(row) for row in P]
        return InducedKernel(states, np.array([[float(v) for v in row] for row in P]).reshape(n, n),
                             "exact", np.array([float(e) for e in esc]), exact_matrix=P,
                             unmatched_mass=np.zeros(n))
    if method != "simulated":
        raise ValueError(f"unknown method {method!r}")
    lo, hi = slice.windowK
    rows = map_streams(lambda i: _simulated_row(system, states, lo, hi, states[i], excursions,
                                                horizon, seed, i), range(n), threads)
    return InducedKernel(states, np.array([r for r, _, _ in rows]).reshape(n, n), "simulated",
                         np.array([e for _, e, _ in rows]), None,
                         np.array([m for _, _, m in rows]),
                         {"horizon": horizon, "excursions": excursions, "seed": seed})


def reversal_check(system: RandomSystem, slice: OrbitSlice, method: str = "exact",
                   **kw) -> dict:
    """Compare the reversed system's induced kernel with the transpose of p_K."""
    fwd = induced_kernel(system, slice, method, **kw)
    rev = induced_kernel(reversed_system(system), slice, method, **kw)
    if fwd.exact_matrix is not None and rev.exact_matrix is not None:
        n = len(slice.points)
        dev = max((abs(rev.exact_matrix[i][j] - fwd.exact_matrix[j][i])
                   for i in range(n) for j in range(n)), default=Fraction(0))
        deviation = float(dev)
    else:
        deviation = float(np.max(np.abs(rev.matrix - fwd.matrix.T), initial=0.0))
    return {"method": method, "max_deviation": deviation, "states": list(slice.points),
            "forward": fwd.matrix.tolist(), "reversed": rev.matrix.tolist()}


def gth_stationary(P: np.ndarray) -> np.ndarray:
    """Stationary law of an irreducible stochastic matrix by GTH elimination."""
    A = np.array(P, dtype=float)
    n = A.shape[0]
    for k in range(n - 1, 0, -1):
        s = A[k, :k].sum()
        A[:k, k] /= s
        A[:k, :k] += np.outer(A[:k, k], A[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ A[:k, k]
    return pi / pi.sum()


def communicating_classes(P: np.ndarray) -> list[list[int]]:
    n, labels = connected_components(np.asarray(P) > 0, directed=True, connection="strong")
    return [np.flatnonzero(labels == c).tolist() for c in range(n)]


def atom_equality_check(kernel: InducedKernel, tol: float = EQUAL_ATOMS_TOL) -> dict:
    """Solve pi P = pi and test whether all atoms carry equal weight."""
    P = kernel.matrix
    classes = communicating_classes(P)
    report = {"states": list(kernel.states), "classes": classes, "irreducible": len(classes) == 1}
    if len(classes) != 1:
        report.update(equal=None, reason="kernel is reducible")
        return report
    if float(np.max(kernel.escape_mass, initial=0.0)) > 1e-14:
        report.update(equal=None, reason="kernel is sub-stochastic; the walk is transient")
        return report
    pi = gth_stationary(P)
    spread = float((pi.max() - pi.min()) / pi.max())
    report.update(stationary=pi.tolist(), residual=float(np.max(np.abs(pi @ P - pi))),
                  relative_spread=spread, equal=spread <= tol, tol=tol)
    return report


def kernel_to_csv(kernel: InducedKernel, path) -> None:
    """Rows ``state_from,state_to,probability`` with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["state_from", "state_to", "probability"])
        for i, a in enumerate(kernel.states):
            for j, b in enumerate(kernel.states):
                w.writerow(["%.17g" % a, "%.17g" % b, "%.17g" % kernel.matrix[i, j]])
