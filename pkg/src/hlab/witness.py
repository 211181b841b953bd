"""Translated-bump witnesses for the unboundedness of nonzero Hausdorff operators
on L^p-type quasi-Banach spaces, 0 < p < 1.

With ``theta = (1 - p) / 2`` the translates ``g_j = g(. - 2^j e_0)`` keep a
fixed norm in every translation-invariant space, while the main term
``int_0^inf phi(1) g_j(x / r) dr`` is of size ``2^-j`` on a set ``E_j`` of
measure ``~ 2^{(1 - theta) j}``. Its L^p(E_j)^p mass therefore grows like
``2^{(1 - p) j / 2}``; the error term carries an extra factor ``eps_j^p``
where ``eps_j`` is the average of ``|phi - phi(1)|`` over
``A_j = [1 - 2^{-theta j}, 1 + 2^{-theta j}]``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import descriptors
from .grid import (DEFAULT_BUDGET, BoxGrid, GridBudgetError, Region, SampledFunction, convolve,
                   lp_integral, sample)
from .hausdorff import RadialProfile, apply, deviation_average, lebesgue_report

__all__ = [
    "make_bump",
    "WitnessParams",
    "WitnessInstance",
    "EnvelopeData",
    "GrowthRow",
    "GrowthReport",
    "Verdict",
    "min_feasible_j",
    "build_instance",
    "envelope_scan",
    "split_main_error",
    "witness_grid",
    "growth_experiment",
    "fit_slope",
    "unboundedness_verdict",
]


def make_bump(n: int = 1) -> descriptors.Descriptor:
    """``g(x) = T(2 - |x|)`` with ``T(t) = s(t) / (s(t) + s(1 - t))``, ``s(t) = e^{-1/t}``."""
    return descriptors.bump(0.0, n)


def _conditions(p: float, j: int) -> bool:
    theta = (1.0 - p) / 2.0
    d = 2.0 ** (-theta * j)
    big = 2.0**j
    if big <= 2.0:
        return False
    a_lo = (big + 2.0) * (1.0 - d) + 1.0
    a_hi = (big - 2.0) * (1.0 + d) - 1.0
    # a_lo < a_hi, tightened so that Xi_j = [a_lo + 3/2, a_hi - 3/2] is nonempty
    return a_hi - a_lo > 3.0


def min_feasible_j(p: float, j_cap: int = 60) -> int:
    """Smallest j from which every later j satisfies the construction's size conditions."""
    j = j_cap
    while j > 0 and _conditions(p, j - 1):
        j -= 1
    return j


@dataclass(frozen=True)
class WitnessParams:
    p: float
    j_min: int
    j_max: int
    n: int = 1

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"requires 0<p<1 (the construction needs theta = (1-p)/2 > 0), got p={self.p}")
        if self.n != 1:
            raise ValueError("witness experiments are implemented for n = 1")
        if self.j_min > self.j_max:
            raise ValueError(f"empty j range {self.j_min}:{self.j_max}")
        threshold = min_feasible_j(self.p)
        if self.j_min < threshold:
            raise ValueError(f"j_min={self.j_min} is too small for p={self.p}; need j >= {threshold}")

    @property
    def theta(self) -> float:
        return (1.0 - self.p) / 2.0

    @property
    def target_slope(self) -> float:
        return (1.0 - self.p) / 2.0

    @property
    def js(self) -> list:
        return list(range(self.j_min, self.j_max + 1))


@dataclass(frozen=True)
class WitnessInstance:
    params: WitnessParams
    j: int
    g: descriptors.Descriptor = field(repr=False)
    g_j: descriptors.Descriptor = field(repr=False)
    A: tuple
    a_lo: float
    a_hi: float
    E: tuple
    Xi: tuple

    @property
    def theta(self) -> float:
        return self.params.theta

    @property
    def center(self) -> float:
        return 2.0**self.j

    @property
    def E_measure(self) -> float:
        return self.E[1] - self.E[0]

    @property
    def Xi_measure(self) -> float:
        return self.Xi[1] - self.Xi[0]


def build_instance(params: WitnessParams, j: int) -> WitnessInstance:
    """Sets and functions of the construction at level j (n = 1: E_j and Xi_j are intervals)."""
    threshold = min_feasible_j(params.p)
    if j < threshold:
        raise ValueError(f"j={j} is below the feasibility threshold j >= {threshold} for p={params.p}")
    d = 2.0 ** (-params.theta * j)
    big = 2.0**j
    a_lo = (big + 2.0) * (1.0 - d) + 1.0
    a_hi = (big - 2.0) * (1.0 + d) - 1.0
    E = (a_lo - 0.5, a_hi + 0.5)
    Xi = (E[0] + 2.0, E[1] - 2.0)
    return WitnessInstance(params, j, make_bump(), descriptors.bump(big), (1.0 - d, 1.0 + d),
                           a_lo, a_hi, E, Xi)


@dataclass(frozen=True)
class EnvelopeData:
    """Measured ``E^0_{j,x} = {r : g_j(x/r) != 0}`` and ``E^1_{j,x} = {r : g_j(x/r) = 1}``."""

    j: int
    A: tuple
    x: np.ndarray
    e0: np.ndarray
    e1: np.ndarray
    contain: np.ndarray
    inner: np.ndarray

    @property
    def e0_measure(self) -> np.ndarray:
        return self.e0[:, 1] - self.e0[:, 0]

    @property
    def e1_measure(self) -> np.ndarray:
        return self.e1[:, 1] - self.e1[:, 0]

    def chain_holds(self, rtol: float = 1e-12) -> np.ndarray:
        """``E^1 subset E^0 subset (|x|/(2^j+2), |x|/(2^j-2)) subset A_j`` per sample."""
        tol = rtol * self.contain[:, 1]
        ok = (self.e1[:, 0] >= self.e0[:, 0] - tol) & (self.e1[:, 1] <= self.e0[:, 1] + tol)
        ok &= (self.e0[:, 0] >= self.contain[:, 0] - tol) & (self.e0[:, 1] <= self.contain[:, 1] + tol)
        ok &= (self.contain[:, 0] >= self.A[0]) & (self.contain[:, 1] <= self.A[1])
        return ok

    def inner_holds(self, rtol: float = 1e-12) -> np.ndarray:
        """``[a/(2^j + 1/4), a/(2^j - 1/4)] subset E^1`` per sample."""
        tol = rtol * self.contain[:, 1]
        return (self.inner[:, 0] >= self.e1[:, 0] - tol) & (self.inner[:, 1] <= self.e1[:, 1] + tol)


def _bisect(pred, inside: float, outside: float, iters: int = 200) -> float:
    """Boundary of ``pred`` between a point where it holds and one where it fails."""
    if not pred(inside) or pred(outside):
        raise RuntimeError("root bracketing failed; check the bump construction")
    for _ in range(iters):
        mid = 0.5 * (inside + outside)
        if mid == inside or mid == outside:
            break
        if pred(mid):
            inside = mid
        else:
            outside = mid
    return 0.5 * (inside + outside)


def envelope_scan(inst: WitnessInstance, samples: int = 32) -> EnvelopeData:
    """Locate E^0 and E^1 along r by bisection on the closed form of g_j."""
    if samples < 16:
        raise ValueError("envelope_scan needs at least 16 samples")
    big = inst.center
    xs = np.linspace(inst.E[0], inst.E[1], samples)
    nonzero, plateau = inst.g_j.nonzero, inst.g_j.plateau
    e0, e1, contain, inner = [], [], [], []
    for x in xs:
        rc = x / big

        def on_support(r, x=x):
            return bool(nonzero(np.array(x / r)))

        def on_plateau(r, x=x):
            return bool(plateau(np.array(x / r)))

        e0.append((_bisect(on_support, rc, rc / 2.0), _bisect(on_support, rc, rc * 2.0)))
        e1.append((_bisect(on_plateau, rc, rc / 2.0), _bisect(on_plateau, rc, rc * 2.0)))
        contain.append((x / (big + 2.0), x / (big - 2.0)))
        a = min(max(x, inst.a_lo), inst.a_hi)
        inner.append((a / (big + 0.25), a / (big - 0.25)))
    return EnvelopeData(inst.j, inst.A, xs, np.array(e0), np.array(e1), np.array(contain), np.array(inner))


def _lebesgue_value(profile: RadialProfile, normalize: bool = False) -> float:
    """phi(1) after confirming r0 = 1 is a Lebesgue point; 0 for the zero profile."""
    if profile.zero:
        return 0.0
    rep = lebesgue_report(profile, 1.0)
    if not rep.is_lebesgue:
        raise ValueError(f"r0=1 is not a Lebesgue point of {profile.name!r} "
                         f"(eps at delta={rep.deltas[-1]:.3g} is {rep.eps[-1]:.3g})")
    if not normalize and abs(rep.value - 1.0) > 1e-12:
        raise ValueError(f"profile {profile.name!r} has phi(1)={rep.value:g}; the construction "
                         "is normalized to phi(1)=1 (use normalize to rescale)")
    if rep.value == 0.0:
        raise ValueError(f"phi(1)=0 for {profile.name!r}; pick a Lebesgue point where phi is nonzero")
    return rep.value


def _witness_function(inst: WitnessInstance, h: float) -> SampledFunction:
    big = inst.center
    return sample(inst.g_j, BoxGrid.from_range(big - 2.0, big + 2.0, h))


def split_main_error(profile: RadialProfile, inst: WitnessInstance, out_grid: BoxGrid,
                     *, h: float = 0.125, threads: int = 1):
    """``(H^M g_j, H^E g_j)`` with ``H^M`` using the constant ``phi(1)`` and ``H^E`` using ``phi - phi(1)``."""
    v = _lebesgue_value(profile)
    gj = _witness_function(inst, h)
    main = apply(RadialProfile.constant(v), gj, out_grid, threads=threads)
    err = apply(profile.shifted(v) if v else profile, gj, out_grid, threads=threads)
    return main, err


def witness_grid(inst: WitnessInstance, h: float = 0.125, padding: float = 4.0,
                 budget: int = DEFAULT_BUDGET) -> BoxGrid:
    """Grid over E_j padded on both sides, with nodes on multiples of h."""
    lo = math.floor((inst.E[0] - padding) / h) * h
    hi = math.ceil((inst.E[1] + padding) / h) * h
    return BoxGrid.from_range(lo, hi, h, budget)


def _grid_points(p: float, j: int, h: float, padding: float) -> int:
    theta = (1.0 - p) / 2.0
    d = 2.0 ** (-theta * j)
    width = (2.0**j - 2.0) * (1.0 + d) - (2.0**j + 2.0) * (1.0 - d) + 2.0 * padding
    return int(math.ceil(width / h)) + 3


def _max_feasible_j(p: float, h: float, padding: float, budget: int) -> int:
    j = min_feasible_j(p)
    while _grid_points(p, j + 1, h, padding) <= budget and j < 60:
        j += 1
    return j


@dataclass(frozen=True)
class GrowthRow:
    j: int
    main_p: float
    error_p: float
    total_p: float
    eps_j: float
    E_j_measure: float
    Xi_j_measure: float
    g_norm: float


@dataclass(frozen=True)
class GrowthReport:
    """Per-level L^p(E_j)^p masses (or mollified masses over Xi_j) and fitted slopes."""

    p: float
    mollified: bool
    rows: tuple
    slope_main: float
    slope_total: float
    profile_name: str = "profile"
    g_norm_reference: float = float("nan")

    @property
    def target_slope(self) -> float:
        return (1.0 - self.p) / 2.0

    @property
    def js(self) -> np.ndarray:
        return np.array([r.j for r in self.rows])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def to_csv(self, header: Sequence[str] = (), verdict: Optional["Verdict"] = None) -> str:
        buf = io.StringIO()
        for line in header:
            buf.write(line.rstrip("\n") + "\n")
        buf.write("j,main_p,error_p,total_p,eps_j,E_j_measure,Xi_j_measure\n")
        for r in self.rows:
            buf.write(",".join([str(r.j)] + [repr(float(v)) for v in
                      (r.main_p, r.error_p, r.total_p, r.eps_j, r.E_j_measure, r.Xi_j_measure)]) + "\n")
        buf.write(f"# p={self.p!r} mollified={int(self.mollified)} profile={self.profile_name}\n")
        buf.write(f"# slope={self.slope_main!r} total_slope={self.slope_total!r} "
                  f"target={self.target_slope!r}\n")
        buf.write("# g_norms=" + ",".join(repr(r.g_norm) for r in self.rows) + "\n")
        if verdict is not None:
            buf.write(f"# verdict={verdict.label}\n")
        return buf.getvalue()


def fit_slope(js: Sequence[int], values: Sequence[float], upper_half: bool = True) -> float:
    """Least-squares slope of ``log2(values)`` against j, on the upper half of the range by default."""
    js = np.asarray(js, dtype=float)
    vals = np.asarray(values, dtype=float)
    if upper_half and len(js) >= 4:
        keep = js >= np.median(js)
        js, vals = js[keep], vals[keep]
    if len(js) < 2 or np.any(vals <= 0):
        return float("nan")
    return float(np.polyfit(js, np.log2(vals), 1)[0])


def growth_experiment(
    profile: RadialProfile,
    params: WitnessParams,
    mollified: bool = False,
    *,
    h: float = 0.125,
    padding: float = 4.0,
    budget: int = DEFAULT_BUDGET,
    normalize: bool = False,
    threads: int = 1,
) -> GrowthReport:
    """Run the witness construction for every j in ``params`` and fit the growth exponent.

    With ``mollified=True`` every term is first convolved with the bump
    (which is 1 on B(0,1) and supported in B(0,2)) and integrated over Xi_j
    instead of E_j.
    """
    worst = max(_grid_points(params.p, j, h, padding) for j in params.js)
    if worst > budget:
        raise GridBudgetError(
            f"j_max={params.j_max} needs ~{worst} grid points, over the budget {budget}; "
            f"max feasible j is {_max_feasible_j(params.p, h, padding, budget)}"
        )
    v = _lebesgue_value(profile, normalize)
    phi = profile.scaled(1.0 / v) if (v and normalize) else profile
    v = 1.0 if (v and normalize) else v
    p = params.p
    g = make_bump()
    g_local = sample(g, BoxGrid.from_range(-2.0, 2.0, h))
    g_ref = lp_integral(g_local, p) ** (1.0 / p)
    mollifier = g_local
    rows = []
    for j in params.js:
        inst = build_instance(params, j)
        grid = witness_grid(inst, h, padding, budget)
        gj = _witness_function(inst, h)
        main = apply(RadialProfile.constant(v), gj, grid, threads=threads)
        err = apply(phi.shifted(v) if v else phi, gj, grid, threads=threads)
        total = apply(phi, gj, grid, threads=threads)
        if mollified:
            region = Region.from_boxes(grid, [inst.Xi])
            main, err, total = (convolve(t, mollifier, mode="same") for t in (main, err, total))
        else:
            region = Region.from_boxes(grid, [inst.E])
        eps = deviation_average(phi, 1.0, 2.0 ** (-params.theta * j)) if not phi.zero else 0.0
        g_norm = lp_integral(gj, p) ** (1.0 / p)
        rows.append(GrowthRow(j, lp_integral(main, p, region), lp_integral(err, p, region),
                              lp_integral(total, p, region), eps, inst.E_measure, inst.Xi_measure, g_norm))
    js = [r.j for r in rows]
    return GrowthReport(
        p, mollified, tuple(rows),
        fit_slope(js, [r.main_p for r in rows]),
        fit_slope(js, [r.total_p for r in rows]),
        profile.name, g_ref,
    )


@dataclass(frozen=True)
class Verdict:
    status: str
    reason: str

    @property
    def label(self) -> str:
        return self.status if self.status == "unbounded-witnessed" else f"{self.status}: {self.reason}"

    def __str__(self) -> str:
        return self.label


def unboundedness_verdict(report: GrowthReport, norm_of_g: Optional[float] = None, *,
                          slope_fraction: float = 0.5, min_growth: Optional[float] = None,
                          rtol: float = 1e-12) -> Verdict:
    """Decide whether the report witnesses unboundedness.

    Requires the total-term slope to reach ``slope_fraction`` of the target
    and the last value to exceed the first by ``min_growth``. The default
    growth threshold is ``2^{slope_fraction * target * (j_last - j_first)}``,
    i.e. the growth the slope threshold itself implies.
    """
    if len(report.rows) < 5:
        raise ValueError(f"a verdict needs at least 5 j-values, got {len(report.rows)}")
    totals = report.column("total_p")
    if np.all(totals == 0.0):
        return Verdict("inconclusive", "zero branch")
    ref = report.g_norm_reference if norm_of_g is None else norm_of_g
    norms = report.column("g_norm")
    if not np.allclose(norms, ref, rtol=rtol, atol=0.0):
        return Verdict("inconclusive", "witness norms are not constant across j")
    js = report.js
    target = report.target_slope
    if min_growth is None:
        min_growth = 2.0 ** (slope_fraction * target * (js[-1] - js[0]))
    slope = report.slope_total
    growth = totals[-1] / totals[0] if totals[0] > 0 else math.inf
    if math.isfinite(slope) and slope >= slope_fraction * target and growth >= min_growth:
        return Verdict("unbounded-witnessed",
                       f"slope {slope:.4f} vs target {target:.4f}, growth x{growth:.3g}")
    return Verdict("inconclusive", f"slope {slope:.4f} (need >= {slope_fraction * target:.4f}), "
                                   f"growth x{growth:.3g} (need >= {min_growth:.3g})")
