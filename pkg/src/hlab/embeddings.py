"""Randomized checks of the L^p lower bound and of the mollified embedding into L^p.

For X among h^p, M^{p,p}, B^{p,p}, F^{p,p} (0 < p <= 1) the ratio
``||g||_{L^p} / ||g||_X`` should stay bounded over any corpus; for the
Besov and Triebel-Lizorkin cases with s = 0 the p-triangle inequality gives
the constant 1. For the mollified embedding the ratio
``||psi * f||_{L^p} / ||f||_Y`` is bounded by a constant depending on psi.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from . import descriptors
from .descriptors import Descriptor
from .grid import BoxGrid, SampledFunction, convolve, lp_quasi_norm, sample
from .spaces import SpaceSpec, space_norm

__all__ = [
    "GENERATORS",
    "Corpus",
    "EmbeddingReport",
    "check_lp_lower_bound",
    "check_mollified_embedding",
    "sampled_mollifier",
]

GENERATORS = ("bandlimited", "nonnegative", "structured")
DEFAULT_GRID = "-16:16:1/16"


def _random_spectrum(rng: np.random.Generator, grid: BoxGrid, band: float) -> np.ndarray:
    """Hermitian random spectrum with a Gaussian envelope, zero outside ``|xi| <= band``."""
    freqs = np.meshgrid(*grid.frequencies(), indexing="ij")
    rad = np.sqrt(sum(f * f for f in freqs))
    env = np.exp(-((rad / band) ** 2)) * (rad <= band)
    spec = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * env
    # symmetrize so the inverse transform is real: xi -> -xi is index k -> -k mod N
    flipped = np.conj(spec[np.ix_(*(np.r_[0, n - 1:0:-1] for n in grid.shape))])
    return 0.5 * (spec + flipped)


def _bandlimited(rng, grid, band):
    vals = np.fft.ifftn(_random_spectrum(rng, grid, band)).real
    peak = np.max(np.abs(vals))
    return vals / peak if peak > 0 else vals


def _structured(rng, grid, band, index):
    x = grid.points()
    if grid.n > 1:
        x = x[..., 0]
    lo, hi = grid.origin[0], grid.upper[0]
    kind = index % 4
    center = rng.uniform(lo / 2, hi / 2)
    if kind == 0:
        return descriptors.bump(0.0, grid.n)(grid.points())
    if kind == 1:
        return descriptors.bump(center, 1)(x) if grid.n == 1 else descriptors.bump(0.0, grid.n)(
            grid.points() - np.array([center] + [0.0] * (grid.n - 1)))
    width = rng.uniform(1.0, 3.0)
    window = np.exp(-np.pi * ((x - center) / width) ** 2)
    if kind == 2:
        return window
    # chirp whose instantaneous frequency a + 2 b (x - center) stays below the band
    a = rng.uniform(0.0, band / 4)
    b = rng.uniform(0.0, band / (8 * width))
    return window * np.cos(2 * np.pi * (a * (x - center) + b * (x - center) ** 2))


@dataclass(frozen=True)
class Corpus:
    """Reproducible family of test functions on a fixed grid.

    Parameters
    ----------
    generator : {"bandlimited", "nonnegative", "structured"}
        ``bandlimited``: real trigonometric polynomials with random spectra
        inside ``|xi| <= band``. ``nonnegative``: squares of band-limited
        samples with half the band. ``structured``: bumps, translated bumps,
        Gaussians and chirps.
    seed, count : int
    grid : BoxGrid or str
    band : float
    """

    generator: str = "bandlimited"
    seed: int = 0
    count: int = 20
    grid: Union[BoxGrid, str] = DEFAULT_GRID
    band: float = 4.0

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown corpus generator {self.generator!r}; choose from {GENERATORS}")
        if self.count < 1:
            raise ValueError("corpus count must be positive")
        if isinstance(self.grid, str):
            object.__setattr__(self, "grid", BoxGrid.parse(self.grid))
        if not 0 < self.band <= self.grid.nyquist / 2:
            raise ValueError(f"band must lie in (0, {self.grid.nyquist / 2:g}] for this grid")

    def describe(self) -> str:
        return f"{self.generator} seed={self.seed} count={self.count} band={self.band:g}"

    def samples(self) -> List[SampledFunction]:
        rng = np.random.default_rng(self.seed)
        out = []
        for i in range(self.count):
            if self.generator == "bandlimited":
                vals = _bandlimited(rng, self.grid, self.band)
            elif self.generator == "nonnegative":
                vals = _bandlimited(rng, self.grid, self.band / 2) ** 2
            else:
                vals = _structured(rng, self.grid, self.band, i)
            out.append(SampledFunction(self.grid, vals, source=f"{self.generator}[{i}]"))
        return out


@dataclass(frozen=True)
class EmbeddingReport:
    space: SpaceSpec
    check: str
    corpus: str
    norm_lp: np.ndarray = field(repr=False)
    norm_X: np.ndarray = field(repr=False)
    bound: float

    @property
    def ratios(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = self.norm_lp / self.norm_X
        return np.where(self.norm_X > 0, r, 0.0)

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max())

    @property
    def median_ratio(self) -> float:
        return float(np.median(self.ratios))

    @property
    def passed(self) -> bool:
        r = self.ratios
        return bool(np.all(np.isfinite(r)) and np.all(r >= 0) and r.max() <= self.bound)

    def summary(self) -> str:
        return (f"max={self.max_ratio!r} median={self.median_ratio!r} bound={self.bound!r} "
                f"pass={int(self.passed)}")

    def to_csv(self, header: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in header:
            buf.write(line.rstrip("\n") + "\n")
        buf.write(f"# check={self.check} space={self.space} corpus={self.corpus}\n")
        buf.write("sample_id,norm_lp,norm_X,ratio\n")
        for i, (a, b, r) in enumerate(zip(self.norm_lp, self.norm_X, self.ratios)):
            buf.write(f"{i},{float(a)!r},{float(b)!r},{float(r)!r}\n")
        buf.write(f"# {self.summary()}\n")
        return buf.getvalue()


def _samples(corpus: Union[Corpus, Sequence[SampledFunction]]) -> tuple:
    if isinstance(corpus, Corpus):
        return corpus.samples(), corpus.describe()
    items = list(corpus)
    if not items:
        raise ValueError("empty corpus")
    return items, f"explicit count={len(items)}"


def check_lp_lower_bound(space: Union[SpaceSpec, str], corpus: Union[Corpus, Sequence[SampledFunction]],
                         bound: Optional[float] = None, tol: float = 1e-6) -> EmbeddingReport:
    """Ratios ``||g||_{L^p} / ||g||_X`` for X in {hp, M^{p,p}_0, B^{p,p}_0, F^{p,p}_0}.

    The default bound is ``1 + tol`` for B and F (constant 1) and 10 for hp
    and M.
    """
    spec = SpaceSpec.parse(space) if isinstance(space, str) else space
    if not 0 < spec.p <= 1:
        raise ValueError(f"the L^p lower bound is checked for 0 < p <= 1, got p={spec.p}")
    if spec.kind in ("B", "F", "M") and (spec.q != spec.p or spec.s != 0):
        raise ValueError(f"{spec.kind} must have q = p and s = 0 for this check, got {spec}")
    if spec.kind not in ("hp", "B", "F", "M"):
        raise ValueError(f"unsupported space {spec} for the L^p lower bound")
    if bound is None:
        bound = 1.0 + tol if spec.kind in ("B", "F") else 10.0
    items, desc = _samples(corpus)
    lp = np.array([lp_quasi_norm(f, spec.p) for f in items])
    xs = np.array([space_norm(f, spec) for f in items])
    return EmbeddingReport(spec, "lp-lower-bound", desc, lp, xs, float(bound))


def sampled_mollifier(grid: BoxGrid, mollifier: Optional[Descriptor] = None) -> SampledFunction:
    """Mollifier sampled on a centered grid with f's spacing (the bump by default)."""
    psi = mollifier or descriptors.bump(n=grid.n)
    cells = [int(math.ceil(max(abs(a), abs(b)) / h)) for (a, b), h in zip(psi.support, grid.spacing)]
    kgrid = BoxGrid(tuple(-c * h for c, h in zip(cells, grid.spacing)), grid.spacing,
                    tuple(2 * c + 1 for c in cells))
    return sample(psi, kgrid)


def check_mollified_embedding(space: Union[SpaceSpec, str], corpus: Union[Corpus, Sequence[SampledFunction]],
                              mollifier: Optional[Descriptor] = None, bound: float = 1e3) -> EmbeddingReport:
    """Ratios ``||psi * f||_{L^p} / ||f||_Y`` for Y in {M, B, F}."""
    spec = SpaceSpec.parse(space) if isinstance(space, str) else space
    if spec.kind not in ("M", "B", "F"):
        raise ValueError(f"mollified embedding is checked for M, B and F spaces, got {spec}")
    if math.isinf(spec.p):
        raise ValueError("mollified embedding needs p < inf")
    items, desc = _samples(corpus)
    kern = sampled_mollifier(items[0].grid, mollifier)
    lp = np.array([lp_quasi_norm(convolve(f, kern, mode="same"), spec.p) for f in items])
    ys = np.array([space_norm(f, spec) for f in items])
    return EmbeddingReport(spec, "mollified", desc, lp, ys, float(bound))
