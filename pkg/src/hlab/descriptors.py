"""Closed-form function families that can be sampled on a grid or evaluated
exactly at arbitrary points.

A :class:`Descriptor` couples a vectorized evaluator with the metadata the
quadrature kernels need: a bounding box of the support and, in one
dimension, the coordinates where the function stops being smooth.

Points are passed as arrays of shape ``(...,)`` when ``n == 1`` and
``(..., n)`` otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Descriptor",
    "smooth_transition",
    "bump",
    "gaussian",
    "indicator",
    "piecewise_polynomial",
    "zero",
    "from_callable",
    "parse_descriptor",
    "FAMILIES",
]

# e^{-pi x^2 / w^2} < e^{-40} outside this many widths
_GAUSSIAN_CUTOFF = float(np.sqrt(40.0 / np.pi))


@dataclass(frozen=True, eq=False)
class Descriptor:
    """A named, vectorized function on R^n with support metadata."""

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    n: int = 1
    support: tuple = ((-np.inf, np.inf),)
    breakpoints: tuple = ()
    params: dict = field(default_factory=dict)
    nonzero: Optional[Callable[[np.ndarray], np.ndarray]] = None
    plateau: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.n > 1 and x.shape[-1] != self.n:
            raise ValueError(f"{self.name}: expected points with trailing axis {self.n}, got {x.shape}")
        return self.func(x)

    def __repr__(self) -> str:
        args = ",".join(f"{k}={v}" for k, v in self.params.items())
        return f"Descriptor({self.name}{':' + args if args else ''}, n={self.n})"


def _norm(x: np.ndarray, n: int) -> np.ndarray:
    if n == 1:
        return np.abs(x)
    return np.sqrt(np.sum(x * x, axis=-1))


def smooth_transition(t) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, built from e^{-1/t}."""
    t = np.asarray(t, dtype=float)
    out = np.array(t >= 1.0, dtype=float)
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    # s(t) / (s(t) + s(1 - t)) with s(t) = e^{-1/t}, using a single exponential
    with np.errstate(over="ignore"):
        out[mid] = 1.0 / (1.0 + np.exp(1.0 / tm - 1.0 / (1.0 - tm)))
    return out


def bump(center: float = 0.0, n: int = 1) -> Descriptor:
    """Radial bump ``g(x - c)``: equal to 1 on ``B(c, 1)``, supported in ``B(c, 2)``."""
    c = float(center)
    shift = np.zeros(n)
    shift[0] = c

    def _radius(x):
        return _norm(x - (c if n == 1 else shift), n)

    def _g(x):
        return smooth_transition(2.0 - _radius(x))

    support = ((c - 2.0, c + 2.0),) + ((-2.0, 2.0),) * (n - 1)
    breaks = (c - 2.0, c - 1.0, c + 1.0, c + 2.0) if n == 1 else ()
    return Descriptor(
        name="bump",
        func=_g,
        n=n,
        support=support,
        breakpoints=breaks,
        params={"center": c},
        nonzero=lambda x: _radius(np.asarray(x, dtype=float)) < 2.0,
        plateau=lambda x: _radius(np.asarray(x, dtype=float)) <= 1.0,
    )


def gaussian(center: float = 0.0, width: float = 1.0, n: int = 1) -> Descriptor:
    """``exp(-pi |x - c|^2 / w^2)``; support truncated where the value is below e^{-40}."""
    c, w = float(center), float(width)
    if w <= 0:
        raise ValueError("gaussian width must be positive")
    shift = np.zeros(n)
    shift[0] = c
    reach = w * _GAUSSIAN_CUTOFF

    def _f(x):
        d = _norm(x - (c if n == 1 else shift), n)
        return np.exp(-np.pi * (d / w) ** 2)

    support = ((c - reach, c + reach),) + ((-reach, reach),) * (n - 1)
    return Descriptor("gaussian", _f, n, support, (), {"center": c, "width": w})


def indicator(*bounds: float) -> Descriptor:
    """Indicator of the half-open box ``[a1, b1) x [a2, b2) x ...``."""
    if len(bounds) == 0 or len(bounds) % 2:
        raise ValueError("indicator needs pairs of bounds a1,b1[,a2,b2...]")
    pairs = tuple((float(bounds[i]), float(bounds[i + 1])) for i in range(0, len(bounds), 2))
    for a, b in pairs:
        if not a < b:
            raise ValueError(f"indicator bounds must satisfy a < b, got [{a}, {b})")
    n = len(pairs)

    def _f(x):
        if n == 1:
            a, b = pairs[0]
            return ((x >= a) & (x < b)).astype(float)
        inside = np.ones(x.shape[:-1], dtype=bool)
        for i, (a, b) in enumerate(pairs):
            inside &= (x[..., i] >= a) & (x[..., i] < b)
        return inside.astype(float)

    breaks = pairs[0] if n == 1 else ()
    return Descriptor("indicator", _f, n, pairs, breaks, {"bounds": list(bounds)})


def piecewise_polynomial(breaks, coeffs) -> Descriptor:
    """Polynomial pieces on ``[breaks[i], breaks[i+1])``, zero elsewhere (n = 1).

    ``coeffs[i]`` lists ascending-power coefficients in the global variable x.
    """
    breaks = tuple(float(b) for b in breaks)
    coeffs = [tuple(float(c) for c in cs) for cs in coeffs]
    if len(breaks) < 2 or len(coeffs) != len(breaks) - 1:
        raise ValueError("piecewise_polynomial needs k+1 breaks and k coefficient lists")
    if any(b1 >= b2 for b1, b2 in zip(breaks, breaks[1:])):
        raise ValueError("breaks must be strictly increasing")

    def _f(x):
        out = np.zeros_like(x, dtype=float)
        for (lo, hi), cs in zip(zip(breaks, breaks[1:]), coeffs):
            mask = (x >= lo) & (x < hi)
            out = np.where(mask, np.polynomial.polynomial.polyval(x, cs), out)
        return out

    return Descriptor(
        "piecewise-polynomial", _f, 1, ((breaks[0], breaks[-1]),), breaks,
        {"breaks": list(breaks), "coeffs": [list(c) for c in coeffs]},
    )


def zero(n: int = 1) -> Descriptor:
    def _f(x):
        return np.zeros(x.shape if n == 1 else x.shape[:-1])

    return Descriptor("zero", _f, n, ((0.0, 0.0),) * n, (), {})


def from_callable(func: Callable, n: int = 1, support=None, breakpoints=(), name: str = "callable") -> Descriptor:
    """Wrap an arbitrary vectorized callable."""
    support = tuple(support) if support is not None else ((-np.inf, np.inf),) * n
    if n == 1 and len(support) == 2 and np.isscalar(support[0]):
        support = (tuple(support),)
    return Descriptor(name, lambda x: np.asarray(func(x), dtype=float), n, support, tuple(breakpoints))


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _parse_bump(args):
    vals = _floats(args)
    return bump(center=vals[0] if vals else 0.0)


def _parse_gaussian(args):
    vals = _floats(args)
    if len(vals) > 2:
        raise ValueError("gaussian takes at most center,width")
    return gaussian(*vals)


def _parse_piecewise(args):
    parts = args.split(";")
    if len(parts) < 2:
        raise ValueError("piecewise-polynomial syntax: b0,b1,...;c0,c1;c0,c1...")
    return piecewise_polynomial(_floats(parts[0]), [_floats(p) for p in parts[1:]])


FAMILIES = {
    "bump": _parse_bump,
    "gaussian": _parse_gaussian,
    "indicator": lambda args: indicator(*_floats(args)),
    "piecewise-polynomial": _parse_piecewise,
    "zero": lambda args: zero(),
}


def parse_descriptor(text: str) -> Descriptor:
    """Parse ``name[:args]``, e.g. ``indicator:0,1`` or ``gaussian:3,1.5``.

    Tabulated functions are read from CSV by :func:`hlab.grid.read_csv`.
    """
    name, _, args = text.strip().partition(":")
    name = name.strip().lower()
    if name not in FAMILIES:
        raise ValueError(f"unknown function descriptor {name!r}; known: {', '.join(sorted(FAMILIES))}")
    try:
        return FAMILIES[name](args)
    except (ValueError, IndexError) as exc:
        raise ValueError(f"bad arguments for {name!r}: {exc}") from exc
