"""Uniform-grid sampled functions: sampling, L^p quasi-norms, convolution and
the Fourier transform with the 2*pi in the exponent.

Grids are node-inclusive: ``BoxGrid.from_range(a, b, h)`` has nodes
``a, a + h, ..., b``. Integrals use the rule ``h^n * sum(values)`` over nodes.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import signal

from .descriptors import Descriptor, from_callable, parse_descriptor

__all__ = [
    "DEFAULT_BUDGET",
    "GridBudgetError",
    "DecayWarning",
    "BoxGrid",
    "SampledFunction",
    "Region",
    "sample",
    "lp_integral",
    "lp_quasi_norm",
    "convolve",
    "fourier_transform",
    "delta",
    "write_csv",
    "read_csv",
]

DEFAULT_BUDGET = 2**26


class GridBudgetError(ValueError):
    """Raised when a grid would exceed its point budget."""


class DecayWarning(UserWarning):
    """A function handed to the Fourier transform does not decay at the grid boundary."""


def _parse_number(text: str) -> float:
    text = text.strip()
    if "/" in text:
        return float(Fraction(text))
    return float(text)


@dataclass(frozen=True)
class BoxGrid:
    origin: tuple
    spacing: tuple
    count: tuple
    budget: int = field(default=DEFAULT_BUDGET, compare=False, repr=False)

    def __post_init__(self):
        origin = tuple(float(o) for o in np.atleast_1d(self.origin))
        spacing = tuple(float(h) for h in np.atleast_1d(self.spacing))
        count = tuple(int(c) for c in np.atleast_1d(self.count))
        if not (len(origin) == len(spacing) == len(count)):
            raise ValueError("origin, spacing and count must have the same length")
        if any(not (h > 0 and math.isfinite(h)) for h in spacing):
            raise ValueError(f"grid spacing must be positive, got {spacing}")
        if any(c < 2 for c in count):
            raise ValueError(f"every axis needs at least 2 points, got {count}")
        total = math.prod(count)
        if total > self.budget:
            raise GridBudgetError(f"grid with {total} points exceeds budget {self.budget}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "count", count)

    @classmethod
    def from_range(cls, lo, hi, h, budget: int = DEFAULT_BUDGET) -> "BoxGrid":
        """Node-inclusive grid over ``[lo, hi]`` per axis; ``hi - lo`` must be a multiple of ``h``."""
        lo, hi, h = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (lo, hi, h))
        lo, hi, h = np.broadcast_arrays(lo, hi, h)
        counts = []
        for a, b, s in zip(lo, hi, h):
            if not b > a:
                raise ValueError(f"empty range [{a}, {b}]")
            if not (s > 0 and math.isfinite(s)):
                raise ValueError(f"spacing must be positive and finite, got {s}")
            steps = (b - a) / s
            if abs(steps - round(steps)) > 1e-6 * max(1.0, steps):
                raise ValueError(f"range [{a}, {b}] is not a multiple of spacing {s}")
            counts.append(int(round(steps)) + 1)
        return cls(tuple(lo), tuple(h), tuple(counts), budget)

    @classmethod
    def parse(cls, text: str, budget: int = DEFAULT_BUDGET) -> "BoxGrid":
        """Parse ``lo:hi:h`` per axis, axes separated by ``;`` (fractions allowed)."""
        try:
            axes = [tuple(_parse_number(v) for v in part.split(":")) for part in text.split(";")]
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"bad grid spec {text!r}: {exc}") from exc
        if any(len(a) != 3 for a in axes):
            raise ValueError(f"bad grid spec {text!r}; expected lo:hi:h")
        lo, hi, h = zip(*axes)
        return cls.from_range(lo, hi, h, budget)

    @property
    def n(self) -> int:
        return len(self.count)

    @property
    def shape(self) -> tuple:
        return self.count

    @property
    def size(self) -> int:
        return math.prod(self.count)

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def upper(self) -> tuple:
        return tuple(o + (c - 1) * h for o, h, c in zip(self.origin, self.spacing, self.count))

    @property
    def nyquist(self) -> float:
        """Smallest per-axis Nyquist frequency ``1 / (2h)``."""
        return min(1.0 / (2.0 * h) for h in self.spacing)

    def axes(self) -> list:
        return [o + h * np.arange(c) for o, h, c in zip(self.origin, self.spacing, self.count)]

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(N,)`` for n == 1 and ``(N, n)`` otherwise (row-major)."""
        axes = self.axes()
        if self.n == 1:
            return axes[0]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def mesh(self) -> np.ndarray:
        """Node coordinates shaped like the grid: ``shape`` or ``shape + (n,)``."""
        if self.n == 1:
            return self.axes()[0]
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def frequencies(self) -> list:
        """Per-axis DFT frequencies in numpy's ``fftfreq`` order."""
        return [np.fft.fftfreq(c, d=h) for h, c in zip(self.spacing, self.count)]

    def index_of(self, x) -> tuple:
        """Index of the node nearest to point ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = tuple(int(round((xi - o) / h)) for xi, o, h in zip(x, self.origin, self.spacing))
        if any(i < 0 or i >= c for i, c in zip(idx, self.count)):
            raise IndexError(f"point {x} lies outside the grid")
        return idx

    def header(self) -> str:
        def _join(vals):
            return ",".join(repr(float(v)) if not isinstance(v, int) else str(v) for v in vals)

        return f"# n={self.n} h={_join(self.spacing)} origin={_join(self.origin)} N={_join(self.count)}"


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Values of a function on every node of a :class:`BoxGrid`.

    ``source`` keeps the closed form when the samples came from one, so
    operators can evaluate off-grid exactly instead of interpolating.
    """

    grid: BoxGrid
    values: np.ndarray
    source: Optional[Descriptor] = None
    dual_origin: Optional[tuple] = None

    def __post_init__(self):
        vals = np.asarray(self.values)
        if not np.iscomplexobj(vals):
            vals = vals.astype(float, copy=False)
        if vals.size != self.grid.size:
            raise ValueError(f"{vals.size} values for a grid of {self.grid.size} points")
        vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("sampled values must be finite")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def at(self, x) -> complex:
        """Value at the node nearest to ``x``."""
        return self.values[self.grid.index_of(x)]

    def with_values(self, values) -> "SampledFunction":
        return SampledFunction(self.grid, values)

    def _check(self, other):
        if isinstance(other, SampledFunction):
            if other.grid != self.grid:
                raise ValueError("sampled functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return SampledFunction(self.grid, self.values + self._check(other))

    __radd__ = __add__

    def __sub__(self, other):
        return SampledFunction(self.grid, self.values - self._check(other))

    def __mul__(self, other):
        return SampledFunction(self.grid, self.values * self._check(other))

    __rmul__ = __mul__

    def __neg__(self):
        return SampledFunction(self.grid, -self.values)

    def real(self) -> "SampledFunction":
        return SampledFunction(self.grid, self.values.real)


@dataclass(frozen=True, eq=False)
class Region:
    """Indicator of a set of grid nodes."""

    grid: BoxGrid
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask)
        if mask.dtype != bool:
            if not np.all((mask == 0) | (mask == 1)):
                raise ValueError("region indicator values must be 0 or 1")
            mask = mask.astype(bool)
        mask = mask.reshape(self.grid.shape).copy()
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_boxes(cls, grid: BoxGrid, boxes: Sequence) -> "Region":
        """Union of closed boxes; in 1-D a box is ``(lo, hi)``, else a sequence of per-axis pairs."""
        pts = grid.mesh()
        mask = np.zeros(grid.shape, dtype=bool)
        for box in boxes:
            if grid.n == 1:
                lo, hi = box
                mask |= (pts >= lo) & (pts <= hi)
            else:
                inside = np.ones(grid.shape, dtype=bool)
                for i, (lo, hi) in enumerate(box):
                    inside &= (pts[..., i] >= lo) & (pts[..., i] <= hi)
                mask |= inside
        return cls(grid, mask)

    @classmethod
    def from_predicate(cls, grid: BoxGrid, predicate: Callable) -> "Region":
        return cls(grid, np.asarray(predicate(grid.mesh()), dtype=bool))

    @classmethod
    def full(cls, grid: BoxGrid) -> "Region":
        return cls(grid, np.ones(grid.shape, dtype=bool))

    def _other(self, other: "Region") -> np.ndarray:
        if other.grid != self.grid:
            raise ValueError("regions live on different grids")
        return other.mask

    def __or__(self, other):
        return Region(self.grid, np.maximum(self.mask, self._other(other)))

    def __and__(self, other):
        return Region(self.grid, np.minimum(self.mask, self._other(other)))

    def __sub__(self, other):
        return Region(self.grid, self.mask & ~self._other(other))

    @property
    def is_empty(self) -> bool:
        return not self.mask.any()

    @property
    def measure(self) -> float:
        return int(self.mask.sum()) * self.grid.cell_volume


def _as_descriptor(expr, n: int) -> Descriptor:
    if isinstance(expr, Descriptor):
        return expr
    if isinstance(expr, str):
        return parse_descriptor(expr)
    if callable(expr):
        return from_callable(expr, n=n)
    raise TypeError(f"cannot sample {type(expr).__name__}")


def sample(expr: Union[str, Descriptor, Callable], grid: BoxGrid) -> SampledFunction:
    """Evaluate a descriptor (or descriptor string / vectorized callable) at every grid node."""
    desc = _as_descriptor(expr, grid.n)
    if desc.n != grid.n:
        raise ValueError(f"descriptor is {desc.n}-dimensional but the grid is {grid.n}-dimensional")
    with np.errstate(all="ignore"):
        vals = np.asarray(desc(grid.mesh()))
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"{desc.name} produced non-finite values on the grid")
    return SampledFunction(grid, vals, source=desc)


def _region_values(f: SampledFunction, region: Optional[Region]) -> np.ndarray:
    if region is None:
        return f.values.ravel()
    if region.grid != f.grid:
        raise ValueError("region grid does not match the function grid")
    if region.is_empty:
        raise ValueError("empty integration region")
    return f.values[region.mask]


def lp_integral(f: SampledFunction, p: float, region: Optional[Region] = None) -> float:
    """``h^n * sum |f|^p`` over the region, i.e. the p-th power of the quasi-norm."""
    if not p > 0 or math.isinf(p):
        raise ValueError(f"lp_integral needs 0 < p < inf, got {p}")
    vals = np.abs(_region_values(f, region))
    return float(f.grid.cell_volume * np.sum(vals**p))


def lp_quasi_norm(f: SampledFunction, p: float, region: Optional[Region] = None) -> float:
    """Discrete L^p quasi-norm ``(h^n sum |f|^p)^{1/p}``; ``p = inf`` gives ``max |f|``."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    if math.isinf(p):
        vals = np.abs(_region_values(f, region))
        return float(vals.max()) if vals.size else 0.0
    return lp_integral(f, p, region) ** (1.0 / p)


def delta(grid_like: BoxGrid) -> SampledFunction:
    """Discrete delta of unit mass at the origin, on a 3-point-per-axis grid with the same spacing."""
    h = grid_like.spacing
    g = BoxGrid(tuple(-s for s in h), h, (3,) * grid_like.n)
    vals = np.zeros(g.shape)
    vals[(1,) * g.n] = 1.0 / g.cell_volume
    return SampledFunction(g, vals)


def _check_spacing(f: SampledFunction, k: SampledFunction):
    if f.grid.n != k.grid.n:
        raise ValueError("dimension mismatch in convolve")
    if not np.allclose(f.grid.spacing, k.grid.spacing, rtol=1e-12, atol=0):
        raise ValueError(f"mismatched spacings {f.grid.spacing} vs {k.grid.spacing}")


def convolve(f: SampledFunction, k: SampledFunction, mode: str = "full") -> SampledFunction:
    """Linear convolution ``h^n * sum f(y) k(x - y)`` via zero-padded FFT.

    ``mode="full"`` returns the whole support on a grid with origin
    ``f.origin + k.origin``; ``mode="same"`` restricts to ``f``'s grid, which
    needs ``k``'s origin to be a whole number of cells.
    """
    _check_spacing(f, k)
    vol = f.grid.cell_volume
    full = signal.fftconvolve(f.values, k.values, mode="full") * vol
    if not (f.is_complex or k.is_complex):
        full = full.real
    if mode == "full":
        grid = BoxGrid(
            tuple(a + b for a, b in zip(f.grid.origin, k.grid.origin)),
            f.grid.spacing,
            tuple(a + b - 1 for a, b in zip(f.grid.count, k.grid.count)),
            f.grid.budget,
        )
        return SampledFunction(grid, full)
    if mode != "same":
        raise ValueError(f"unknown convolution mode {mode!r}")
    offsets = []
    for o, h in zip(k.grid.origin, k.grid.spacing):
        steps = -o / h
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("kernel origin is not aligned with the grid for mode='same'")
        offsets.append(int(round(steps)))
    sl = tuple(slice(off, off + c) for off, c in zip(offsets, f.grid.count))
    if any(off < 0 for off in offsets):
        raise ValueError("kernel must contain the origin for mode='same'")
    return SampledFunction(f.grid, full[sl])


def _dft_axis(vals, axis, x0, h, xi0, dxi, sign):
    n = vals.shape[axis]
    m = np.arange(n)
    shape = [1] * vals.ndim
    shape[axis] = n
    pre = np.exp(sign * 2j * np.pi * m * h * xi0).reshape(shape)
    post = np.exp(sign * 2j * np.pi * x0 * (xi0 + m * dxi)).reshape(shape)
    if sign < 0:
        out = np.fft.fft(vals * pre, axis=axis)
    else:
        out = np.fft.ifft(vals * pre, axis=axis) * n
    return out * post * h


def fourier_transform(
    f: SampledFunction,
    inverse: bool = False,
    out_origin: Optional[Sequence[float]] = None,
    decay_tol: float = 1e-8,
) -> SampledFunction:
    """Approximate ``int f(x) e^{-2 pi i x.xi} dx`` (or its inverse) on the conjugate grid.

    The conjugate grid has spacing ``1 / (N h)`` per axis. Forward transforms
    are centred at zero frequency; the inverse lands on ``out_origin``, or on
    the origin the forward transform came from, or centred.
    """
    g = f.grid
    vals = np.asarray(f.values, dtype=complex)
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    if scale > 0:
        edge = max(
            float(np.max(np.abs(np.take(vals, idx, axis=ax))))
            for ax in range(g.n)
            for idx in (0, -1)
        )
        if edge > decay_tol * scale:
            warnings.warn(
                f"function has relative size {edge / scale:.2e} at the grid boundary; "
                "the transform sees a truncated function",
                DecayWarning,
                stacklevel=2,
            )
    dual = tuple(1.0 / (c * h) for c, h in zip(g.count, g.spacing))
    if out_origin is not None:
        new_origin = tuple(float(o) for o in np.atleast_1d(out_origin))
    elif inverse and f.dual_origin is not None:
        new_origin = tuple(f.dual_origin)
    else:
        new_origin = tuple(-(c // 2) * d for c, d in zip(g.count, dual))
    sign = 1.0 if inverse else -1.0
    for ax in range(g.n):
        vals = _dft_axis(vals, ax, g.origin[ax], g.spacing[ax], new_origin[ax], dual[ax], sign)
    out_grid = BoxGrid(new_origin, dual, g.count, g.budget)
    return SampledFunction(out_grid, vals, dual_origin=g.origin)


def write_csv(f: SampledFunction, dest=None, extra_header: Sequence[str] = ()) -> str:
    """Serialize as ``# n=.. h=.. origin=.. N=..`` followed by one value per line (row-major).

    Complex values are written as ``re,im`` and flagged with ``complex=1``.
    Returns the text; also writes it to ``dest`` (path or file object) when given.
    """
    buf = io.StringIO()
    for line in extra_header:
        buf.write(line.rstrip("\n") + "\n")
    head = f.grid.header()
    if f.is_complex:
        head += " complex=1"
    buf.write(head + "\n")
    flat = f.values.ravel()
    if f.is_complex:
        for v in flat:
            buf.write(f"{float(v.real)!r},{float(v.imag)!r}\n")
    else:
        for v in flat:
            buf.write(f"{float(v)!r}\n")
    text = buf.getvalue()
    if dest is not None:
        if hasattr(dest, "write"):
            dest.write(text)
        else:
            with open(dest, "w") as fh:
                fh.write(text)
    return text


def read_csv(src, budget: int = DEFAULT_BUDGET) -> SampledFunction:
    """Inverse of :func:`write_csv`; unrelated ``#`` lines are skipped."""
    if hasattr(src, "read"):
        text = src.read()
    else:
        with open(src) as fh:
            text = fh.read()
    header = None
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if " n=" in f" {line[1:].strip()}" and "origin=" in line:
                header = dict(tok.split("=", 1) for tok in line[1:].split() if "=" in tok)
            continue
        rows.append(line)
    if header is None:
        raise ValueError("missing grid header line '# n=.. h=.. origin=.. N=..'")
    h = [float(v) for v in header["h"].split(",")]
    origin = [float(v) for v in header["origin"].split(",")]
    count = [int(v) for v in header["N"].split(",")]
    grid = BoxGrid(tuple(origin), tuple(h), tuple(count), budget)
    if header.get("complex") == "1":
        parts = [r.split(",") for r in rows]
        vals = np.array([float(a) + 1j * float(b) for a, b in parts])
    else:
        vals = np.array([float(r) for r in rows])
    return SampledFunction(grid, vals)
