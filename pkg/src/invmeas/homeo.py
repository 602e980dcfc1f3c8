"""Orientation-preserving homeomorphisms of the line, in closed parametric form.

Every map is an immutable value. Inversion stays inside the family, and
composition is expressed by :class:`Word`, whose factors are written in
composition order: ``Word((f, g))`` is ``f o g``, so ``g`` acts first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import _kernels as K

_odd_power = K.odd_power.py_func
_piecewise = K.piecewise.py_func
_diffeo_pair = K.diffeo_pair.py_func
_conjugated = K.conjugated.py_func
_integer_skew = K.integer_skew.py_func


class HomeoRangeError(ArithmeticError):
    """Evaluation left the representable range (overflow to +-inf)."""

    def __init__(self, variant, x):
        self.variant = variant
        self.x = x
        super().__init__(f"{variant!r} overflows at x={x!r}")


def _check_positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a finite positive real, got {value!r}")


# -- interval diffeomorphisms ------------------------------------------------

class IntervalDiffeo:
    """Increasing diffeomorphism of [0, 1] fixing both endpoints."""

    code: int

    @property
    def param(self) -> float:
        raise NotImplementedError

    def pair(self, u: float, w: float | None = None) -> tuple[float, float]:
        """Return ``(h(u), 1 - h(u))``; pass ``w = 1 - u`` when known exactly."""
        if w is None:
            w = 1.0 - u
        h, hw = _diffeo_pair(self.code, self.param, float(u), float(w))
        return float(h), float(hw)

    def __call__(self, u: float) -> float:
        return self.pair(u)[0]

    def inverse(self) -> IntervalDiffeo:
        raise NotImplementedError

    def derivative(self, u: float) -> float:
        raise NotImplementedError

    @property
    def derivative_at_0(self) -> float:
        return self.derivative(0.0)

    @property
    def derivative_at_1(self) -> float:
        return self.derivative(1.0)


@dataclass(frozen=True)
class Moebius(IntervalDiffeo):
    """u -> u / (c - (c - 1) u); h'(0) = 1/c and h'(1) = c."""

    c: float
    code = K.D_MOEBIUS

    def __post_init__(self):
        _check_positive("Moebius.c", self.c)

    @property
    def param(self):
        return self.c

    def inverse(self):
        return Moebius(1.0 / self.c)

    def derivative(self, u):
        return self.c / (self.c - (self.c - 1.0) * u) ** 2


@dataclass(frozen=True)
class PowerInterval(IntervalDiffeo):
    """u -> u**p on [0, 1]. Only p = 1 is differentiable with positive slope at 0."""

    p: float
    code = K.D_POWER

    def __post_init__(self):
        _check_positive("PowerInterval.p", self.p)

    @property
    def param(self):
        return self.p

    def inverse(self):
        return PowerInterval(1.0 / self.p)

    def derivative(self, u):
        if u == 0.0 and self.p != 1.0:
            return 0.0 if self.p > 1.0 else math.inf
        return self.p * u ** (self.p - 1.0)


@dataclass(frozen=True)
class Cubic(IntervalDiffeo):
    """u -> u + k u (1-u) (1-2u), or its inverse when ``inverse`` is set.

    Fixes 0, 1/2 and 1; for 0 < k < 2 both endpoints are repelling with
    h'(0) = h'(1) = 1 + k.
    """

    k: float
    inverse_branch: bool = False

    def __post_init__(self):
        if not (-1.0 < self.k < 2.0):
            raise ValueError(f"Cubic.k must lie in (-1, 2), got {self.k!r}")

    @property
    def code(self):
        return K.D_CUBIC_INV if self.inverse_branch else K.D_CUBIC

    @property
    def param(self):
        return self.k

    def inverse(self):
        return Cubic(self.k, not self.inverse_branch)

    def _forward_derivative(self, u):
        return 1.0 + self.k * (1.0 - 6.0 * u + 6.0 * u * u)

    def derivative(self, u):
        if not self.inverse_branch:
            return self._forward_derivative(u)
        return 1.0 / self._forward_derivative(self(u))


# -- homeomorphisms of the line ----------------------------------------------

class Homeo:
    """Base class; subclasses are frozen dataclasses."""

    def _eval(self, x: float) -> float:
        raise NotImplementedError

    def _make_inverse(self) -> Homeo:
        raise NotImplementedError

    def ops(self) -> list[tuple]:
        """Primitive program in application order: ``(code, params, table)``."""
        raise NotImplementedError

    def apply(self, x: float) -> float:
        try:
            y = float(self._eval(float(x)))
        except OverflowError:
            raise HomeoRangeError(self, x) from None
        if not math.isfinite(y) and math.isfinite(x):
            raise HomeoRangeError(self, x)
        return y

    __call__ = apply

    def inverse(self) -> Homeo:
        inv = self.__dict__.get("_inv")
        if inv is None:
            inv = self._make_inverse()
            # double inversion returns the original object, bit for bit
            object.__setattr__(inv, "_inv", self)
            object.__setattr__(self, "_inv", inv)
        return inv

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Affine(Homeo):
    a: float
    b: float

    def __post_init__(self):
        _check_positive("Affine.a", self.a)
        if not math.isfinite(self.b):
            raise ValueError(f"Affine.b must be finite, got {self.b!r}")

    def _eval(self, x):
        return self.a * x + self.b

    def _make_inverse(self):
        return Affine(1.0 / self.a, -self.b / self.a)

    def ops(self):
        return [(K.OP_AFFINE, (self.a, self.b, 0.0, 0.0), None)]

    def to_config(self):
        return {"type": "affine", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class OddPower(Homeo):
    """x -> sign(x) |x|**p."""

    p: float

    def __post_init__(self):
        _check_positive("OddPower.p", self.p)

    def _eval(self, x):
        return _odd_power(self.p, x)

    def _make_inverse(self):
        return OddPower(1.0 / self.p)

    def ops(self):
        return [(K.OP_ODD_POWER, (self.p, 0.0, 0.0, 0.0), None)]

    def to_config(self):
        return {"type": "odd_power", "p": self.p}


@dataclass(frozen=True)
class PiecewiseLinear(Homeo):
    """Linear interpolation through ``breakpoints``, extended by the end slopes."""

    breakpoints: tuple
    left_slope: float
    right_slope: float

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.breakpoints)
        if not pts:
            raise ValueError("PiecewiseLinear needs at least one breakpoint")
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if not (x1 > x0 and y1 > y0):
                raise ValueError("breakpoints must be strictly increasing in both coordinates")
        _check_positive("PiecewiseLinear.left_slope", self.left_slope)
        _check_positive("PiecewiseLinear.right_slope", self.right_slope)
        object.__setattr__(self, "breakpoints", pts)
        object.__setattr__(self, "_xs", np.array([p[0] for p in pts]))
        object.__setattr__(self, "_ys", np.array([p[1] for p in pts]))

    def _eval(self, x):
        return _piecewise(self._xs, self._ys, self.left_slope, self.right_slope, x)

    def _make_inverse(self):
        return PiecewiseLinear(tuple((y, x) for x, y in self.breakpoints),
                               1.0 / self.left_slope, 1.0 / self.right_slope)

    def ops(self):
        return [(K.OP_PIECEWISE, (0.0, 0.0, self.left_slope, self.right_slope),
                 (self._xs, self._ys))]

    def to_config(self):
        return {"type": "piecewise_linear",
                "breakpoints": [list(p) for p in self.breakpoints],
                "left_slope": self.left_slope, "right_slope": self.right_slope}


@dataclass(frozen=True)
class IntegerSkew(Homeo):
    """x -> inner(frac(x)) + floor(x) + shift."""

    inner: IntervalDiffeo
    shift: int

    def __post_init__(self):
        if int(self.shift) != self.shift:
            raise ValueError(f"IntegerSkew.shift must be an integer, got {self.shift!r}")
        object.__setattr__(self, "shift", int(self.shift))

    def _eval(self, x):
        return _integer_skew(self.inner.code, self.inner.param, float(self.shift), x)

    def _make_inverse(self):
        return IntegerSkew(self.inner.inverse(), -self.shift)

    def ops(self):
        return [(K.OP_SKEW, (float(self.inner.code), self.inner.param, float(self.shift), 0.0), None)]

    def to_config(self):
        return {"type": "integer_skew", "inner": diffeo_to_config(self.inner), "shift": self.shift}


@dataclass(frozen=True)
class Conjugated(Homeo):
    """r o inner o r^{-1} with r(u) = -1/u + 1/(1-u).

    r^{-1}(x) is clamped into [1e-12, 1 - 1e-12], so the map is only faithful
    for |x| below roughly 1e12.
    """

    inner: IntervalDiffeo

    def _eval(self, x):
        return _conjugated(self.inner.code, self.inner.param, x)

    def _make_inverse(self):
        return Conjugated(self.inner.inverse())

    def ops(self):
        return [(K.OP_CONJ, (float(self.inner.code), self.inner.param, 0.0, 0.0), None)]

    def to_config(self):
        return {"type": "conjugated", "inner": diffeo_to_config(self.inner)}


@dataclass(frozen=True)
class Word(Homeo):
    """Composition of ``factors``; the last factor acts first."""

    factors: tuple

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors:
            raise ValueError("Word needs at least one factor")
        object.__setattr__(self, "factors", factors)

    def _eval(self, x):
        for f in reversed(self.factors):
            x = f.apply(x)
        return x

    def apply(self, x):
        return float(self._eval(float(x)))

    def _make_inverse(self):
        return Word(tuple(f.inverse() for f in reversed(self.factors)))

    def ops(self):
        out = []
        for f in reversed(self.factors):
            out.extend(f.ops())
        return out

    def to_config(self):
        return {"type": "word", "factors": [f.to_config() for f in self.factors]}


# -- module-level operations -------------------------------------------------

def apply(g: Homeo, x: float) -> float:
    return g.apply(x)


def invert(g: Homeo) -> Homeo:
    return g.inverse()


def image_interval(g: Homeo, lo: float, hi: float) -> tuple[float, float]:
    """Exact image of [lo, hi]; monotonicity makes it the endpoint images."""
    if lo > hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    return g.apply(lo), g.apply(hi)


def conjugate_to_line(h: IntervalDiffeo) -> Conjugated:
    return Conjugated(h)


def r(u: float) -> float:
    """The conjugation (0, 1) -> R, u -> -1/u + 1/(1-u)."""
    return float(K.r_forward.py_func(u, 1.0 - u))


def r_inverse(x: float) -> float:
    return float(K.r_inverse.py_func(x)[0])


# -- config form -------------------------------------------------------------

def diffeo_to_config(h: IntervalDiffeo) -> dict:
    if isinstance(h, Moebius):
        return {"type": "moebius", "c": h.c}
    if isinstance(h, PowerInterval):
        return {"type": "power", "p": h.p}
    if isinstance(h, Cubic):
        return {"type": "cubic", "k": h.k, "inverse": h.inverse_branch}
    raise TypeError(f"not an interval diffeomorphism: {h!r}")


def diffeo_from_config(d: dict[str, Any]) -> IntervalDiffeo:
    kind = d.get("type")
    if kind == "moebius":
        return Moebius(float(d["c"]))
    if kind == "power":
        return PowerInterval(float(d["p"]))
    if kind == "cubic":
        return Cubic(float(d["k"]), bool(d.get("inverse", False)))
    raise ValueError(f"unknown interval diffeomorphism type {kind!r}")


def to_config(g: Homeo) -> dict:
    return g.to_config()


def from_config(d: dict[str, Any]) -> Homeo:
    """Build a map from its config form, e.g. ``{"type": "affine", "a": 0.5, "b": 1.0}``."""
    if not isinstance(d, dict):
        raise ValueError(f"map config must be an object, got {type(d).__name__}")
    kind = d.get("type")
    try:
        if kind == "affine":
            return Affine(float(d["a"]), float(d["b"]))
        if kind == "odd_power":
            return OddPower(float(d["p"]))
        if kind == "piecewise_linear":
            return PiecewiseLinear(tuple(tuple(p) for p in d["breakpoints"]),
                                   float(d["left_slope"]), float(d["right_slope"]))
        if kind == "integer_skew":
            return IntegerSkew(diffeo_from_config(d["inner"]), int(d["shift"]))
        if kind == "conjugated":
            return Conjugated(diffeo_from_config(d["inner"]))
        if kind == "word":
            return Word(tuple(from_config(f) for f in d["factors"]))
    except KeyError as exc:
        raise ValueError(f"map of type {kind!r} is missing field {exc.args[0]!r}") from None
    raise ValueError(f"unknown map type {kind!r}")
