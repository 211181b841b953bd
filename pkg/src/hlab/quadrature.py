"""Vectorized composite Gauss-Legendre quadrature with per-row refinement.

Many integrals with the same segment layout (one row per output point) are
evaluated at once. Each row is refined by doubling the number of panels on
all of its segments until two successive levels agree.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = ["QuadratureError", "integrate_segments", "integrate_interval", "segment_bounds"]

_EVAL_BUDGET = 1 << 22


class QuadratureError(RuntimeError):
    """Composite quadrature failed to converge or the domain is unusable."""


def _level_sum(integrand, lo, hi, rows, level, xg, wg):
    panels = 2**level
    t = ((np.arange(panels)[:, None] + 0.5 * (xg[None, :] + 1.0)) / panels).ravel()
    w = np.tile(wg / (2.0 * panels), panels)
    tail = np.isinf(hi) & (hi > lo)
    width = np.where(tail | ~(hi > lo), 0.0, hi - lo)
    base = np.where(np.isfinite(lo), lo, 0.0)
    r = base[..., None] + width[..., None] * t
    jac = width[..., None] * w
    if tail.any():
        # [a, inf) mapped from s in (0, 1] through r = a / s
        r = np.where(tail[..., None], base[..., None] / t, r)
        jac = np.where(tail[..., None], base[..., None] / t**2 * w, jac)
    with np.errstate(all="ignore"):
        vals = integrand(r, rows)
    vals = np.where(jac != 0.0, vals, 0.0)
    if not np.all(np.isfinite(vals)):
        raise QuadratureError("integrand produced non-finite values inside the domain")
    total = np.sum(vals * jac, axis=(-1, -2))
    scale = np.sum(np.abs(vals) * jac, axis=(-1, -2))
    return total, scale


def integrate_segments(
    integrand: Callable[[np.ndarray, np.ndarray], np.ndarray],
    bounds: np.ndarray,
    *,
    nodes: int = 64,
    rtol: float = 1e-7,
    atol_scale: float = 1e-13,
    max_level: int = 10,
) -> np.ndarray:
    """Integrate one row of segments per output.

    Parameters
    ----------
    integrand : callable
        ``integrand(r, rows)`` with ``r`` of shape ``(m, S, Q)`` and ``rows``
        the indices (into ``bounds``) of the ``m`` rows being evaluated.
    bounds : ndarray, shape (M, S + 1)
        Non-decreasing breakpoints per row. The last entry may be ``inf``, in
        which case the final segment is integrated through ``r = a / s``.
    nodes : int
        Gauss-Legendre nodes per panel.
    rtol : float
        Relative change between successive refinement levels to accept.
    atol_scale : float
        Absolute tolerance as a fraction of ``int |integrand|`` (guards
        integrals that cancel to near zero).
    max_level : int
        At most ``2**max_level`` panels per segment.

    Returns
    -------
    ndarray, shape (M,)
    """
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] < 2:
        raise ValueError("bounds must have shape (M, S + 1) with S >= 1")
    lo_all, hi_all = bounds[:, :-1], bounds[:, 1:]
    if np.any(np.isinf(hi_all) & (hi_all > lo_all) & ~(lo_all > 0)):
        raise QuadratureError("effective interval unbounded: a tail segment must start at r > 0")
    if np.any(np.isinf(lo_all) & (hi_all > lo_all)):
        raise QuadratureError("segments must start at a finite point")
    # move empty segments to the end of each row and drop columns that are empty everywhere
    live = hi_all > lo_all
    order = np.argsort(~live, axis=1, kind="stable")
    lo_all = np.take_along_axis(lo_all, order, axis=1)
    hi_all = np.take_along_axis(hi_all, order, axis=1)
    keep = max(1, int(live.sum(axis=1).max(initial=0)))
    lo_all, hi_all = lo_all[:, :keep], hi_all[:, :keep]
    n_rows, n_seg = lo_all.shape
    xg, wg = np.polynomial.legendre.leggauss(nodes)

    def run(level, rows):
        chunk = max(1, _EVAL_BUDGET // (n_seg * nodes * 2**level))
        tot = np.empty(len(rows), dtype=complex)
        sc = np.empty(len(rows))
        for start in range(0, len(rows), chunk):
            sel = rows[start:start + chunk]
            t, s = _level_sum(integrand, lo_all[sel], hi_all[sel], sel, level, xg, wg)
            tot[start:start + chunk] = t
            sc[start:start + chunk] = s
        return tot, sc

    every = np.arange(n_rows)
    coarse, _ = run(0, every)
    fine, scale = run(1, every)

    def settled(c, f, s):
        return np.abs(f - c) <= rtol * np.abs(f) + atol_scale * s + 1e-300

    active = ~settled(coarse, fine, scale)
    level = 1
    while active.any():
        if level >= max_level:
            raise QuadratureError(
                f"{int(active.sum())} of {n_rows} integrals did not reach rtol={rtol} "
                f"with {2**level} panels per segment"
            )
        level += 1
        idx = np.flatnonzero(active)
        new, sc = run(level, idx)
        coarse[idx] = fine[idx]
        fine[idx] = new
        scale[idx] = sc
        active[idx] = ~settled(coarse[idx], fine[idx], scale[idx])
    if np.all(fine.imag == 0.0):
        return fine.real
    return fine


def segment_bounds(lo: float, hi: float, breakpoints: Sequence[float] = ()) -> np.ndarray:
    """Sorted ``[lo, interior breakpoints..., hi]`` as a single row."""
    inner = sorted(b for b in breakpoints if lo < b < hi)
    return np.array([[lo, *inner, hi]], dtype=float)


def integrate_interval(func: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                       breakpoints: Sequence[float] = (), **kwargs) -> float:
    """Scalar convenience wrapper: ``int_lo^hi func(r) dr`` split at the breakpoints."""
    if hi <= lo:
        return 0.0
    row = segment_bounds(lo, hi, breakpoints)
    out = integrate_segments(lambda r, rows: func(r), row, **kwargs)
    return out[0]
