"""Hausdorff operators ``H f(x) = int Phi(y) f(x / |y|) dy``.

In polar coordinates the operator only sees the radial profile
``phi(r) = int_{S^{n-1}} Phi(r y') r^{n-1} dsigma(y')`` and acts as
``H f(x) = int_0^inf phi(r) f(x / r) dr``. :func:`apply` evaluates that
one-dimensional integral at every output node with composite
Gauss-Legendre quadrature restricted to the effective interval
``{r : x / r in supp f}``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import interpolate
from scipy.special import gamma

from .grid import BoxGrid, SampledFunction, fourier_transform
from .quadrature import QuadratureError, integrate_interval, integrate_segments

__all__ = [
    "InterpolationWarning",
    "RadialProfile",
    "DualProfile",
    "Symbol",
    "BUILTINS",
    "LebesguePointReport",
    "sphere_area",
    "reduce_to_profile",
    "dual_profile",
    "apply",
    "apply_dual",
    "DualityReport",
    "duality_check",
    "lebesgue_report",
    "deviation_average",
    "check_local_integrability",
    "write_profile_csv",
    "read_profile_csv",
]

R_MIN, R_MAX = 2.0**-20, 2.0**20


class InterpolationWarning(UserWarning):
    """Off-grid values of a tabulated function come from cubic interpolation."""


def sphere_area(n: int) -> float:
    """Surface measure of S^{n-1}; counting measure (2) when n == 1."""
    return 2.0 * math.pi ** (n / 2.0) / gamma(n / 2.0)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """A function on (0, inf), zero outside ``support``."""

    func: Callable[[np.ndarray], np.ndarray]
    support: tuple = (0.0, math.inf)
    breakpoints: tuple = ()
    name: str = "profile"
    n: int = 1
    zero: bool = False
    table: Optional[tuple] = field(default=None, repr=False)

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.zero:
            return np.zeros_like(r)
        lo, hi = self.support
        inside = (r > 0) & (r >= lo) & (r <= hi)
        safe = np.clip(np.where(inside, r, max(lo, R_MIN)), max(lo, 1e-300), min(hi, 1e300))
        with np.errstate(all="ignore"):
            vals = np.asarray(self.func(safe), dtype=float)
        return np.where(inside, vals, 0.0)

    def value(self, r: float) -> float:
        return float(self(np.array([r]))[0])

    @classmethod
    def constant(cls, c: float, n: int = 1) -> "RadialProfile":
        c = float(c)
        return cls(lambda r: np.full_like(r, c), name=f"const({c:g})", n=n, zero=(c == 0.0))

    @classmethod
    def zero_profile(cls, n: int = 1) -> "RadialProfile":
        return cls(lambda r: np.zeros_like(r), support=(1.0, 1.0), name="zero", n=n, zero=True)

    @classmethod
    def from_table(cls, r, values, n: int = 1, name: str = "tabulated") -> "RadialProfile":
        """Profile from samples on a log-spaced grid, linear in ``log r`` between samples."""
        r = np.asarray(r, dtype=float)
        values = np.asarray(values, dtype=float)
        if r.ndim != 1 or r.shape != values.shape or r.size < 2:
            raise ValueError("tabulated profile needs matching 1-D r and value arrays")
        if np.any(r <= 0) or np.any(np.diff(r) <= 0):
            raise ValueError("tabulated profile r must be positive and increasing")
        steps = np.diff(np.log(r))
        if np.max(np.abs(steps - steps.mean())) > 1e-6 * abs(steps.mean()):
            raise ValueError("tabulated profile must use a log-spaced r grid")
        if r[0] < R_MIN * (1 - 1e-12) or r[-1] > R_MAX * (1 + 1e-12):
            raise ValueError(f"tabulated r must lie in [2^-20, 2^20], got [{r[0]}, {r[-1]}]")
        if not np.all(np.isfinite(values)):
            raise ValueError("tabulated profile values must be finite")
        logr = np.log(r)
        # the interpolant has a kink wherever the slope changes; quadrature splits there
        slopes = np.diff(values) / np.diff(logr)
        scale = float(np.max(np.abs(slopes), initial=0.0))
        kinks = tuple(float(x) for x in r[1:-1][np.abs(np.diff(slopes)) > 1e-12 * scale])

        def _f(x):
            return np.interp(np.log(x), logr, values)

        return cls(_f, (float(r[0]), float(r[-1])), kinks, name, n, bool(np.all(values == 0)), (r, values))

    def shifted(self, c: float) -> "RadialProfile":
        """``phi(r) - c`` on all of (0, inf)."""
        c = float(c)
        if c == 0.0:
            return self
        base = self
        bps = tuple(sorted(set(self.breakpoints) | {b for b in self.support if 0 < b < math.inf}))
        return RadialProfile(lambda r: base(r) - c, (0.0, math.inf), bps, f"{self.name}-{c:g}", self.n)

    def scaled(self, c: float) -> "RadialProfile":
        c = float(c)
        base = self
        return RadialProfile(lambda r: c * base.func(r), self.support, self.breakpoints,
                             f"{c:g}*{self.name}", self.n, self.zero or c == 0.0, None)

    def tabulate(self, r_min: float = 2.0**-6, r_max: float = 2.0**6, count: int = 1201):
        r = np.geomspace(r_min, r_max, count)
        return r, self(r)


class DualProfile(RadialProfile):
    """Profile of the dual operator ``f -> int Phi(y) |y|^n f(|y| x) dy``."""


@dataclass(frozen=True, eq=False)
class Symbol:
    """The kernel Phi of a Hausdorff operator.

    Exactly one of ``func`` (general Phi(y)), ``radial`` (Phi as a function of
    |y|) or ``profile`` (phi given directly) describes it. ``breakpoints`` and
    ``support`` are in the radial variable |y|.
    """

    n: int
    func: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "custom"
    radial: Optional[Callable[[np.ndarray], np.ndarray]] = None
    breakpoints: tuple = ()
    support: tuple = (0.0, math.inf)
    zero: bool = False
    profile: Optional[RadialProfile] = None

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.zero:
            return np.zeros(y.shape if self.n == 1 else y.shape[:-1])
        if self.radial is not None:
            r = np.abs(y) if self.n == 1 else np.sqrt(np.sum(y * y, axis=-1))
            with np.errstate(all="ignore"):
                return np.where(r > 0, self.radial(np.where(r > 0, r, 1.0)), 0.0)
        if self.func is not None:
            with np.errstate(all="ignore"):
                return self.func(y)
        raise ValueError(f"symbol {self.name!r} is only known through its profile")

    @classmethod
    def builtin(cls, name: str, n: int = 1) -> "Symbol":
        key = name.strip().lower()
        if key not in BUILTINS:
            raise ValueError(f"unknown builtin symbol {name!r}; known: {', '.join(sorted(BUILTINS))}")
        return BUILTINS[key](n)

    @classmethod
    def from_profile(cls, profile: RadialProfile) -> "Symbol":
        return cls(n=profile.n, name=profile.name, breakpoints=profile.breakpoints,
                   support=profile.support, zero=profile.zero, profile=profile)


def _box(n):
    c = 1.0 / sphere_area(n)
    return Symbol(n, name="box", radial=lambda r: c * ((r >= 0.5) & (r <= 1.5)),
                  breakpoints=(0.5, 1.5), support=(0.5, 1.5))


def _one_dimensional(name, n):
    if n != 1:
        raise ValueError(f"builtin {name!r} is one-dimensional")


def _hardy(n):
    _one_dimensional("hardy", n)
    return Symbol(1, lambda y: np.where(y > 1, 1.0 / np.where(y > 1, y, 1.0) ** 2, 0.0),
                  "hardy", breakpoints=(1.0,), support=(1.0, math.inf))


def _adjoint_hardy(n):
    _one_dimensional("adjoint-hardy", n)
    return Symbol(1, lambda y: ((y > 0) & (y < 1)).astype(float), "adjoint-hardy",
                  breakpoints=(1.0,), support=(0.0, 1.0))


def _cesaro(n):
    # Cesaro mean of order 2: (2/x) int_0^x (1 - t/x) f(t) dt
    _one_dimensional("cesaro", n)

    def _f(y):
        s = np.where(y > 1, y, 2.0)
        return np.where(y > 1, 2.0 * (s - 1.0) / s**3, 0.0)

    return Symbol(1, _f, "cesaro", breakpoints=(1.0,), support=(1.0, math.inf))


def _gaussian(n):
    return Symbol(n, name="gaussian", radial=lambda r: np.exp(-np.pi * r * r))


def _zero(n):
    return Symbol(n, name="zero", zero=True, support=(1.0, 1.0))


BUILTINS = {
    "box": _box,
    "hardy": _hardy,
    "adjoint-hardy": _adjoint_hardy,
    "cesaro": _cesaro,
    "gaussian": _gaussian,
    "zero": _zero,
}


def _circle_integral(func: Callable[[np.ndarray], np.ndarray], rho: np.ndarray,
                     rtol: float = 1e-8, max_points: int = 2**16) -> np.ndarray:
    """``int_0^{2pi} func(rho * (cos t, sin t)) dt`` by refined periodic trapezoid rule."""
    rho = np.asarray(rho, dtype=float)

    def trap(m):
        t = 2.0 * np.pi * np.arange(m) / m
        ring = np.stack([np.cos(t), np.sin(t)], axis=-1)
        pts = rho[..., None, None] * ring
        return np.sum(func(pts), axis=-1) * (2.0 * np.pi / m)

    m = 32
    prev = trap(m)
    while True:
        m *= 2
        cur = trap(m)
        scale = np.max(np.abs(cur)) if cur.size else 0.0
        if np.all(np.abs(cur - prev) <= rtol * np.abs(cur) + 1e-14 * scale + 1e-300):
            return cur
        if m >= max_points:
            raise QuadratureError("circle quadrature did not converge; Phi is too singular on this annulus")
        prev = cur


def check_local_integrability(profile: RadialProfile,
                              annuli: Sequence = ((0.25, 0.5), (0.5, 1.0), (1.0, 2.0), (2.0, 4.0))) -> None:
    """Raise ``ValueError`` if ``int |phi|`` fails to converge on a test annulus."""
    if profile.zero:
        return
    lo, hi = profile.support
    for a, b in annuli:
        a, b = max(a, lo), min(b, hi)
        if b <= a:
            continue
        try:
            val = integrate_interval(lambda r: np.abs(profile(r)), a, b, profile.breakpoints, rtol=1e-6)
        except QuadratureError as exc:
            raise ValueError(f"profile {profile.name!r} is not locally integrable on [{a}, {b}]: {exc}") from exc
        if not math.isfinite(abs(val)):
            raise ValueError(f"profile {profile.name!r} has a divergent integral on [{a}, {b}]")


def reduce_to_profile(sym: Symbol) -> RadialProfile:
    """``phi(r) = int_{S^{n-1}} Phi(r y') r^{n-1} dsigma(y')``."""
    if sym.profile is not None:
        return sym.profile
    if sym.zero:
        return RadialProfile.zero_profile(sym.n)
    n = sym.n
    if n == 1:
        def _phi(r):
            return sym(r) + sym(-r)
    elif sym.radial is not None:
        area = sphere_area(n)

        def _phi(r):
            return area * r ** (n - 1) * sym.radial(r)
    elif n == 2:
        def _phi(r):
            return r * _circle_integral(sym, r)
    else:
        raise NotImplementedError("non-radial symbols are supported for n <= 2 only")
    prof = RadialProfile(_phi, tuple(sym.support), tuple(sym.breakpoints), sym.name, n)
    check_local_integrability(prof)
    return prof


def _invert_support(support):
    lo, hi = support
    return (0.0 if math.isinf(hi) else 1.0 / hi, math.inf if lo == 0 else 1.0 / lo)


def dual_profile(sym: Symbol) -> DualProfile:
    """``phi~(r) = int_{S^{n-1}} Phi(y' / r) r^{-1-2n} dsigma(y')``."""
    n = sym.n
    support = _invert_support(sym.support)
    breaks = tuple(sorted(1.0 / b for b in sym.breakpoints if b > 0))
    if sym.zero or (sym.profile is not None and sym.profile.zero):
        return DualProfile(lambda r: np.zeros_like(r), (1.0, 1.0), (), f"dual-{sym.name}", n, True)
    if sym.profile is not None:
        prof = sym.profile

        def _dual(r):
            return prof(1.0 / r) * r ** (-n - 2.0)
    elif n == 1:
        def _dual(r):
            return (sym(1.0 / r) + sym(-1.0 / r)) * r**-3.0
    elif sym.radial is not None:
        area = sphere_area(n)

        def _dual(r):
            return area * sym.radial(1.0 / r) * r ** (-1.0 - 2.0 * n)
    elif n == 2:
        def _dual(r):
            return _circle_integral(sym, 1.0 / r) * r**-5.0
    else:
        raise NotImplementedError("non-radial symbols are supported for n <= 2 only")
    prof = DualProfile(_dual, support, breaks, f"dual-{sym.name}", n)
    check_local_integrability(prof)
    return prof


def _ray_interval(x: np.ndarray, box: Sequence) -> tuple:
    """For each point x (rows), the r-interval where x / r stays inside the box."""
    m = x.shape[0]
    lo = np.zeros(m)
    hi = np.full(m, math.inf)
    empty = np.zeros(m, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for i, (a, b) in enumerate(box):
            xi = x[:, i]
            ax = np.abs(xi)
            pos, neg = xi > 0, xi < 0
            l_pos = ax / b if b > 0 else np.full(m, math.inf)
            u_pos = ax / a if a > 0 else np.full(m, math.inf)
            l_neg = ax / -a if a < 0 else np.full(m, math.inf)
            u_neg = ax / -b if b < 0 else np.full(m, math.inf)
            l = np.where(pos, l_pos, np.where(neg, l_neg, 0.0))
            u = np.where(pos, u_pos, np.where(neg, u_neg, math.inf))
            empty |= pos & (b <= 0)
            empty |= neg & (a >= 0)
            if not (a <= 0 <= b):
                empty |= xi == 0
            lo = np.maximum(lo, np.nan_to_num(l, nan=0.0))
            hi = np.minimum(hi, u)
    empty |= ~(hi > lo)
    return lo, hi, empty


def _evaluator(f: SampledFunction):
    """Return (callable on points, support box, 1-D breakpoints)."""
    g = f.grid
    if f.source is not None:
        desc = f.source
        return desc, desc.support, tuple(desc.breakpoints)
    warnings.warn("f has no closed form; evaluating off-grid by cubic interpolation",
                  InterpolationWarning, stacklevel=3)
    nz = np.argwhere(f.values != 0)
    if nz.size == 0:
        return None, None, ()
    box = []
    for ax in range(g.n):
        i0 = max(int(nz[:, ax].min()) - 1, 0)
        i1 = min(int(nz[:, ax].max()) + 1, g.count[ax] - 1)
        box.append((g.origin[ax] + i0 * g.spacing[ax], g.origin[ax] + i1 * g.spacing[ax]))
    axes = g.axes()
    if g.n == 1:
        # CubicSpline handles complex data in one pass
        spline = interpolate.CubicSpline(axes[0], f.values, extrapolate=False)
        lo, hi = axes[0][0], axes[0][-1]

        def _eval(x):
            inside = (x >= lo) & (x <= hi)
            return np.where(inside, spline(np.where(inside, x, lo)), 0.0)
    else:
        parts = [f.values.real] + ([f.values.imag] if f.is_complex else [])
        splines = [interpolate.RegularGridInterpolator(axes, v, method="cubic", bounds_error=False,
                                                       fill_value=0.0) for v in parts]

        def _eval(x):
            vals = [s(x) for s in splines]
            return vals[0] + 1j * vals[1] if len(vals) == 2 else vals[0]

    return _eval, tuple(box), ()


def apply(
    profile: RadialProfile,
    f: SampledFunction,
    out_grid: Optional[BoxGrid] = None,
    *,
    rtol: float = 1e-7,
    nodes: int = 64,
    threads: int = 1,
    chunk: int = 8192,
) -> SampledFunction:
    """Sample ``H f(x) = int_0^inf phi(r) f(x / r) dr`` on ``out_grid``.

    ``f`` is evaluated exactly through its closed form when it has one and by
    cubic interpolation otherwise. Each output node integrates over the
    effective interval ``{r in supp phi : x / r in supp f}``, split at the
    breakpoints of ``phi`` and at the images of the breakpoints of ``f``.
    """
    out_grid = out_grid or f.grid
    n = out_grid.n
    if n != f.grid.n:
        raise ValueError("output grid and f have different dimensions")
    if profile.zero:
        return SampledFunction(out_grid, np.zeros(out_grid.shape))
    evaluate, box, fbreaks = _evaluator(f)
    if evaluate is None:
        return SampledFunction(out_grid, np.zeros(out_grid.shape))
    pts = out_grid.points().reshape(out_grid.size, n)

    lo, hi, empty = _ray_interval(pts, box)
    plo, phi_ = profile.support
    lo = np.maximum(lo, plo)
    hi = np.minimum(hi, phi_)
    empty |= ~(hi > lo)
    cols = [lo, hi, np.ones_like(lo)]
    cols += [np.full_like(lo, b) for b in profile.breakpoints]
    if n == 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            for b in fbreaks:
                if b != 0:
                    rb = pts[:, 0] / b
                    cols.append(np.where(rb > 0, rb, lo))
    bounds = np.stack(cols, axis=1)
    bounds = np.clip(bounds, lo[:, None], hi[:, None])
    bounds[empty] = 1.0
    bounds.sort(axis=1)

    def run(sel):
        xs = pts[sel]

        def integrand(r, rows):
            x = xs[rows]
            if n == 1:
                u = x[:, 0, None, None] / r
            else:
                u = x[:, None, None, :] / r[..., None]
            return profile(r) * evaluate(u)

        return integrate_segments(integrand, bounds[sel], nodes=nodes, rtol=rtol)

    pieces = [np.arange(s, min(s + chunk, len(pts))) for s in range(0, len(pts), chunk)]
    if threads and threads > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, pieces))
    else:
        results = [run(p) for p in pieces]
    vals = np.concatenate(results) if results else np.zeros(0)
    vals = np.where(empty, 0.0, vals)
    return SampledFunction(out_grid, vals.reshape(out_grid.shape))


def apply_dual(sym: Symbol, f: SampledFunction, out_grid: Optional[BoxGrid] = None, **kwargs) -> SampledFunction:
    """``H~ f(x) = int Phi(y) |y|^n f(|y| x) dy``, evaluated as ``int phi~(r) f(x / r) dr``."""
    return apply(dual_profile(sym), f, out_grid, **kwargs)


@dataclass(frozen=True)
class DualityReport:
    """``F(H f)`` and ``H~ (F f)`` on a common frequency grid."""

    lhs: SampledFunction = field(repr=False)
    rhs: SampledFunction = field(repr=False)

    @property
    def discrepancy(self) -> float:
        """Relative L^2 distance ``||lhs - rhs|| / ||lhs||`` (0 when both vanish)."""
        num = float(np.sqrt(np.sum(np.abs(self.lhs.values - self.rhs.values) ** 2)))
        den = float(np.sqrt(np.sum(np.abs(self.lhs.values) ** 2)))
        if den == 0.0:
            return 0.0 if num == 0.0 else math.inf
        return num / den


def duality_check(sym: "Symbol", f: SampledFunction, refine: int = 16, **kwargs) -> DualityReport:
    """Compare the transform of ``H f`` with the dual operator applied to the transform of ``f``.

    ``H f`` is generally only Lipschitz at the origin, so its transform is
    taken from f's grid refined ``refine`` times (the grid must hold the
    support of ``H f``). The refined grid keeps the period ``N h``, so both
    sides live on the frequency grid of ``F f``, where ``F f`` is evaluated
    by cubic interpolation.
    """
    if refine < 1:
        raise ValueError("refine must be a positive integer")
    g = f.grid
    fhat = fourier_transform(f)
    fine = BoxGrid(g.origin, tuple(h / refine for h in g.spacing), tuple(c * refine for c in g.count), g.budget)
    hf_hat = fourier_transform(apply(reduce_to_profile(sym), f, fine, **kwargs), out_origin=fhat.grid.origin)
    lhs = SampledFunction(fhat.grid, hf_hat.values[tuple(slice(0, c) for c in g.count)])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InterpolationWarning)
        rhs = apply_dual(sym, fhat, fhat.grid, **kwargs)
    return DualityReport(lhs, rhs)


def deviation_average(profile: RadialProfile, r0: float, delta: float) -> float:
    """``(1 / 2 delta) int_{r0 - delta}^{r0 + delta} |phi(r) - phi(r0)| dr``."""
    v = profile.value(r0)
    a, b = max(r0 - delta, 0.0), r0 + delta
    bps = tuple(profile.breakpoints) + tuple(profile.support) + (r0,)
    val = integrate_interval(lambda r: np.abs(profile(r) - v), a, b, bps, rtol=1e-10)
    return float(val) / (b - a)


@dataclass(frozen=True)
class LebesguePointReport:
    r0: float
    deltas: np.ndarray
    eps: np.ndarray
    averages: np.ndarray
    value: float
    is_lebesgue: bool

    @property
    def verdict(self) -> str:
        if self.is_lebesgue:
            return f"lebesgue-with-value-{self.value:g}"
        return "not-lebesgue"


def lebesgue_report(profile: RadialProfile, r0: float = 1.0, levels: int = 12,
                    tol: float = 1e-3) -> LebesguePointReport:
    """Shrinking-interval averages of ``|phi - phi(r0)|`` for ``delta_k = 2^-k``."""
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    v = profile.value(r0)
    bps = tuple(profile.breakpoints) + tuple(profile.support) + (r0,)
    deltas, eps, avgs = [], [], []
    for k in range(1, levels + 1):
        d = 2.0**-k
        if d >= r0:
            continue
        a, b = r0 - d, r0 + d
        eps.append(deviation_average(profile, r0, d))
        avgs.append(float(integrate_interval(profile, a, b, bps, rtol=1e-10)) / (b - a))
        deltas.append(d)
    eps_arr = np.array(eps)
    ok = eps_arr.size > 0 and eps_arr[-1] <= tol * max(1.0, abs(v))
    if ok:
        tail = eps_arr[len(eps_arr) // 2:]
        ok = bool(np.all(tail[1:] <= tail[:-1] * (1 + 1e-6) + 1e-12))
    return LebesguePointReport(float(r0), np.array(deltas), eps_arr, np.array(avgs), v, bool(ok))


def write_profile_csv(profile: RadialProfile, dest, r: Optional[np.ndarray] = None) -> str:
    """Two-column ``r,phi`` CSV on a log-spaced grid, header ``# profile n=<n>``."""
    if r is None:
        r = profile.table[0] if profile.table is not None else profile.tabulate()[0]
    r = np.asarray(r, dtype=float)
    vals = profile(r)
    lines = [f"# profile n={profile.n}"] + [f"{float(a)!r},{float(b)!r}" for a, b in zip(r, vals)]
    text = "\n".join(lines) + "\n"
    if dest is not None:
        if hasattr(dest, "write"):
            dest.write(text)
        else:
            with open(dest, "w") as fh:
                fh.write(text)
    return text


def read_profile_csv(src) -> RadialProfile:
    if hasattr(src, "read"):
        text = src.read()
    else:
        with open(src) as fh:
            text = fh.read()
    n = None
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            toks = line[1:].split()
            if toks and toks[0] == "profile":
                for tok in toks[1:]:
                    if tok.startswith("n="):
                        n = int(tok[2:])
            continue
        a, b = line.split(",")[:2]
        if not rows and a.strip() == "r":
            continue  # column names
        rows.append((float(a), float(b)))
    if n is None:
        raise ValueError("missing '# profile n=<n>' header")
    r, v = np.array(rows).T
    return RadialProfile.from_table(r, v, n=n, name="tabulated")
