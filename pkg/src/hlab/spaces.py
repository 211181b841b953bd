"""Frequency decompositions and the quasi-norms built on them.

Block operators act on the DFT of the samples, so a sampled function is
treated as one period of a periodic function; functions are expected to be
band-limited below the covered frequency range of the grid. When they are
not, a :class:`BandLimitWarning` reports the spectral mass that the finite
decomposition misses.
"""

from __future__ import annotations

import itertools
import math
import re
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .descriptors import Descriptor, bump
from .grid import BoxGrid, SampledFunction, convolve, lp_quasi_norm, sample

__all__ = [
    "BandLimitWarning",
    "smoothstep",
    "dyadic_generator",
    "uniform_window",
    "DyadicDecomposition",
    "UniformDecomposition",
    "SpaceSpec",
    "block_apply",
    "lq_combine",
    "besov_norm",
    "triebel_lizorkin_norm",
    "modulation_norm",
    "local_hardy_norm",
    "default_t_grid",
    "space_norm",
]


class BandLimitWarning(UserWarning):
    """Spectral mass lies outside the frequencies covered by the decomposition."""


def smoothstep(t) -> np.ndarray:
    """C^2 polynomial transition ``6t^5 - 15t^4 + 10t^3`` clamped to [0, 1]."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def dyadic_generator(radius) -> np.ndarray:
    """1 on ``|xi| <= 4/3``, 0 on ``|xi| >= 3/2``."""
    return 1.0 - smoothstep((np.asarray(radius, dtype=float) - 4.0 / 3.0) * 6.0)


def uniform_window(t) -> np.ndarray:
    """One-dimensional factor of eta: 1 on ``|t| <= 1/2``, 0 on ``|t| >= 3/4``."""
    return 1.0 - smoothstep((np.abs(np.asarray(t, dtype=float)) - 0.5) * 4.0)


def _uniform_sigma(t) -> np.ndarray:
    # sum_l eta(t - l) only involves the three integers nearest to t
    t = np.asarray(t, dtype=float)
    u = t - np.round(t)
    total = uniform_window(u) + uniform_window(u - 1.0) + uniform_window(u + 1.0)
    return uniform_window(t) / total


def _fft(f: SampledFunction) -> np.ndarray:
    return np.fft.fftn(f.values)


def _ifft(spec: np.ndarray, real: bool) -> np.ndarray:
    out = np.fft.ifftn(spec)
    return out.real if real else out


class DyadicDecomposition:
    """Littlewood-Paley blocks ``phi_0 = varphi``, ``phi_j(xi) = varphi(2^-j xi) - varphi(2^{1-j} xi)``.

    The top level is ``J = floor(log2(nyquist)) - 1`` so every block sits
    inside the Nyquist range; ``sum_{j<=J} phi_j = 1`` on ``|xi| <= 2^J * 4/3``.
    """

    def __init__(self, grid: BoxGrid):
        self.grid = grid
        nyq = grid.nyquist
        self.levels = int(math.floor(math.log2(nyq))) - 1
        if self.levels < 0:
            raise ValueError(f"grid Nyquist {nyq} is too small for a dyadic decomposition")
        freqs = np.meshgrid(*grid.frequencies(), indexing="ij")
        self.radius = np.sqrt(sum(fr * fr for fr in freqs))
        self.covered_radius = 2.0**self.levels * 4.0 / 3.0

    @property
    def indices(self) -> range:
        return range(self.levels + 1)

    def symbol(self, j: int) -> np.ndarray:
        if j < 0 or j > self.levels:
            raise ValueError(f"dyadic block {j} is outside the Nyquist range (0..{self.levels})")
        if j == 0:
            return dyadic_generator(self.radius)
        return dyadic_generator(self.radius / 2.0**j) - dyadic_generator(self.radius / 2.0 ** (j - 1))

    def partition_error(self) -> float:
        total = sum(self.symbol(j) for j in self.indices)
        inside = self.radius <= self.covered_radius
        return float(np.max(np.abs(total[inside] - 1.0)))

    def tail_fraction(self, spec: np.ndarray) -> float:
        power = np.abs(spec) ** 2
        tot = power.sum()
        return float(power[self.radius > self.covered_radius].sum() / tot) if tot > 0 else 0.0


class UniformDecomposition:
    """Unit-cube blocks ``sigma_k(xi) = sigma_0(xi - k)``, ``sigma_0 = eta / sum_l eta(. - l)``.

    eta is a tensor product of :func:`uniform_window`, so sigma_k factors over
    axes. Active indices satisfy ``|k|_inf <= nyquist - 1``; the partition is
    exact on ``|xi|_inf <= kmax + 1/4``.
    """

    def __init__(self, grid: BoxGrid):
        self.grid = grid
        self.kmax = int(math.floor(grid.nyquist - 1.0))
        if self.kmax < 0:
            raise ValueError(f"grid Nyquist {grid.nyquist} is too small for a uniform decomposition")
        self.freqs = grid.frequencies()
        self.covered = self.kmax + 0.25
        self._cache = {}

    @property
    def indices(self):
        rng = range(-self.kmax, self.kmax + 1)
        if self.grid.n == 1:
            return [(k,) for k in rng]
        return list(itertools.product(rng, repeat=self.grid.n))

    def _axis_symbol(self, axis: int, k: int) -> np.ndarray:
        key = (axis, k)
        if key not in self._cache:
            self._cache[key] = _uniform_sigma(self.freqs[axis] - k)
        return self._cache[key]

    def symbol(self, k) -> np.ndarray:
        k = tuple(np.atleast_1d(k).astype(int))
        if len(k) != self.grid.n:
            raise ValueError(f"index {k} has the wrong dimension")
        if max(abs(v) for v in k) > self.kmax:
            raise ValueError(f"uniform block {k} is outside the Nyquist range (|k| <= {self.kmax})")
        out = None
        for axis, kk in enumerate(k):
            s = self._axis_symbol(axis, kk)
            shape = [1] * self.grid.n
            shape[axis] = -1
            s = s.reshape(shape)
            out = s if out is None else out * s
        return np.broadcast_to(out, self.grid.shape)

    def _covered_mask(self) -> np.ndarray:
        mesh = np.meshgrid(*self.freqs, indexing="ij")
        return np.all([np.abs(m) <= self.covered for m in mesh], axis=0)

    def partition_error(self) -> float:
        total = sum(self.symbol(k) for k in self.indices)
        mask = self._covered_mask()
        return float(np.max(np.abs(total[mask] - 1.0)))

    def max_overlap(self) -> int:
        count = sum((self.symbol(k) > 0).astype(int) for k in self.indices)
        return int(np.max(count))

    def tail_fraction(self, spec: np.ndarray) -> float:
        power = np.abs(spec) ** 2
        tot = power.sum()
        return float(power[~self._covered_mask()].sum() / tot) if tot > 0 else 0.0


Decomposition = Union[DyadicDecomposition, UniformDecomposition]


def block_apply(dec: Decomposition, index, f: SampledFunction) -> SampledFunction:
    """``F^{-1} (symbol_index * F f)`` on f's grid."""
    if dec.grid != f.grid:
        raise ValueError("decomposition was built for a different grid")
    sym = dec.symbol(index)
    real = not f.is_complex and isinstance(dec, DyadicDecomposition)
    return SampledFunction(f.grid, _ifft(sym * _fft(f), real))


def lq_combine(values: Sequence[float], q: float) -> float:
    """``(sum v^q)^{1/q}``, or ``max v`` when q is infinite."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return 0.0
    if math.isinf(q):
        return float(v.max())
    return float(np.sum(v**q) ** (1.0 / q))


def _warn_tail(dec, spec, tol=1e-10):
    frac = dec.tail_fraction(spec)
    if frac > tol:
        warnings.warn(f"{frac:.2e} of the spectral energy lies outside the covered frequencies",
                      BandLimitWarning, stacklevel=3)


@dataclass(frozen=True)
class SpaceSpec:
    """Which quasi-norm to compute: ``Lp``, ``hp``, ``B``, ``F`` or ``M`` with (p, q, s)."""

    kind: str
    p: float
    q: float = math.inf
    s: float = 0.0

    KINDS = {"lp": "Lp", "hp": "hp", "b": "B", "besov": "B", "f": "F", "triebellizorkin": "F",
             "m": "M", "modulation": "M"}

    def __post_init__(self):
        kind = self.KINDS.get(str(self.kind).lower().replace("-", "").replace("_", ""))
        if kind is None:
            raise ValueError(f"unknown space kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not self.p > 0:
            raise ValueError(f"p must be positive, got {self.p}")
        if not self.q > 0:
            raise ValueError(f"q must be positive, got {self.q}")
        if kind == "F" and math.isinf(self.p):
            raise ValueError("Triebel-Lizorkin norms need p < inf")
        if kind == "hp" and math.isinf(self.p):
            raise ValueError("local Hardy norms need p < inf")

    @classmethod
    def parse(cls, text: str) -> "SpaceSpec":
        """Parse strings like ``B:p=0.5,q=0.5,s=0`` or ``hp:p=0.75``; q defaults to p."""
        m = re.fullmatch(r"\s*([A-Za-z_-]+)\s*(?::(.*))?", text)
        if not m:
            raise ValueError(f"bad space spec {text!r}")
        kind, rest = m.group(1), m.group(2) or ""
        params = {}
        for tok in filter(None, (t.strip() for t in rest.split(","))):
            key, sep, val = tok.partition("=")
            key = key.strip().lower()
            if not sep or key not in ("p", "q", "s"):
                raise ValueError(f"bad parameter {tok!r} in space spec {text!r}")
            try:
                params[key] = math.inf if val.strip().lower() in ("inf", "infinity") else float(val)
            except ValueError as exc:
                raise ValueError(f"bad value in {tok!r}") from exc
        if "p" not in params:
            raise ValueError(f"space spec {text!r} needs p")
        params.setdefault("q", params["p"])
        return cls(kind, **params)

    def __str__(self) -> str:
        def fmt(v):
            return "inf" if math.isinf(v) else f"{v:g}"

        if self.kind in ("Lp", "hp"):
            return f"{self.kind}:p={fmt(self.p)}"
        return f"{self.kind}:p={fmt(self.p)},q={fmt(self.q)},s={fmt(self.s)}"


def _require(spec: SpaceSpec, kind: str):
    if spec.kind != kind:
        raise ValueError(f"expected a {kind} space spec, got {spec}")


def _roundoff_floor(spec: np.ndarray) -> float:
    # blocks below this are FFT noise, which would dominate sums of |.|^p for small p
    return 64 * np.finfo(float).eps * float(np.max(np.abs(spec), initial=0.0))


def _dyadic_blocks(f: SampledFunction, dec: Optional[DyadicDecomposition]):
    dec = dec or DyadicDecomposition(f.grid)
    spec = _fft(f)
    _warn_tail(dec, spec)
    real = not f.is_complex
    floor = _roundoff_floor(spec)
    blocks = []
    for j in dec.indices:
        piece = dec.symbol(j) * spec
        blocks.append(_ifft(piece, real) if np.any(np.abs(piece) > floor) else np.zeros(f.grid.shape))
    return dec, blocks


def besov_norm(f: SampledFunction, spec: SpaceSpec, dec: Optional[DyadicDecomposition] = None) -> float:
    """``(sum_j 2^{jsq} ||Delta_j f||_p^q)^{1/q}`` over the levels the grid resolves."""
    _require(spec, "B")
    dec, blocks = _dyadic_blocks(f, dec)
    norms = [2.0 ** (j * spec.s) * lp_quasi_norm(SampledFunction(f.grid, b), spec.p)
             for j, b in zip(dec.indices, blocks)]
    return lq_combine(norms, spec.q)


def triebel_lizorkin_norm(f: SampledFunction, spec: SpaceSpec,
                          dec: Optional[DyadicDecomposition] = None) -> float:
    """``|| (sum_j 2^{jsq} |Delta_j f|^q)^{1/q} ||_p``."""
    _require(spec, "F")
    dec, blocks = _dyadic_blocks(f, dec)
    weighted = np.stack([2.0 ** (j * spec.s) * np.abs(b) for j, b in zip(dec.indices, blocks)])
    if math.isinf(spec.q):
        inner = weighted.max(axis=0)
    else:
        inner = np.sum(weighted**spec.q, axis=0) ** (1.0 / spec.q)
    return lp_quasi_norm(SampledFunction(f.grid, inner), spec.p)


def modulation_norm(f: SampledFunction, spec: SpaceSpec, dec: Optional[UniformDecomposition] = None) -> float:
    """``(sum_k <k>^{sq} ||Box_k f||_p^q)^{1/q}`` over the active lattice points."""
    _require(spec, "M")
    dec = dec or UniformDecomposition(f.grid)
    fhat = _fft(f)
    _warn_tail(dec, fhat)
    floor = _roundoff_floor(fhat)
    norms = []
    for k in dec.indices:
        piece = dec.symbol(k) * fhat
        if not np.any(np.abs(piece) > floor):
            continue
        weight = (1.0 + float(np.dot(k, k))) ** (spec.s / 2.0)
        norms.append(weight * lp_quasi_norm(SampledFunction(f.grid, np.fft.ifftn(piece)), spec.p))
    return lq_combine(norms, spec.q)


def default_t_grid() -> np.ndarray:
    """64 log-spaced scales in ``[2^-12, 1)``."""
    return np.logspace(-12.0, 0.0, 64, endpoint=False, base=2.0)


def _support_radius(desc: Descriptor) -> float:
    return max(max(abs(a), abs(b)) for a, b in desc.support)


def local_hardy_norm(f: SampledFunction, p: float, mollifier: Optional[Descriptor] = None,
                     t_grid: Optional[Sequence[float]] = None) -> float:
    """``|| max_t |psi_t * f| ||_p`` over a finite set of scales ``t`` in (0, 1).

    ``psi_t`` is sampled on f's grid and rescaled to unit discrete mass. Scales
    whose kernel is narrower than one cell act as the identity, which is the
    ``t -> 0`` limit on the grid.
    """
    if not p > 0 or math.isinf(p):
        raise ValueError("local Hardy norms need 0 < p < inf")
    psi = mollifier or bump(n=f.grid.n)
    ts = np.asarray(default_t_grid() if t_grid is None else t_grid, dtype=float)
    if np.any(ts <= 0) or np.any(ts >= 1):
        raise ValueError("t_grid must lie in (0, 1)")
    h = f.grid.spacing
    reach = _support_radius(psi)
    envelope = np.zeros(f.grid.shape)
    for t in ts:
        if reach * t < min(h):
            envelope = np.maximum(envelope, np.abs(f.values))
            continue
        cells = tuple(int(math.ceil(reach * t / s)) for s in h)
        kgrid = BoxGrid(tuple(-c * s for c, s in zip(cells, h)), h, tuple(2 * c + 1 for c in cells))
        kern = sample(lambda x, t=t: psi(x / t), kgrid)
        mass = kern.values.sum() * kgrid.cell_volume
        if mass == 0:
            continue
        kern = SampledFunction(kgrid, kern.values / mass)
        envelope = np.maximum(envelope, np.abs(convolve(f, kern, mode="same").values))
    return lp_quasi_norm(SampledFunction(f.grid, envelope), p)


def space_norm(f: SampledFunction, spec: Union[SpaceSpec, str], **kwargs) -> float:
    """Dispatch on the kind of ``spec``."""
    if isinstance(spec, str):
        spec = SpaceSpec.parse(spec)
    if spec.kind == "Lp":
        return lp_quasi_norm(f, spec.p)
    if spec.kind == "hp":
        return local_hardy_norm(f, spec.p, **kwargs)
    if spec.kind == "B":
        return besov_norm(f, spec, **kwargs)
    if spec.kind == "F":
        return triebel_lizorkin_norm(f, spec, **kwargs)
    return modulation_norm(f, spec, **kwargs)
