"""Monte Carlo estimators for ordered singular-value tails of ``A = D V + M``.

Samples are generated in fixed-size chunks; chunk ``k`` draws from a Philox
counter stream keyed by ``(seed, k)``, and standard normals come from the
inverse CDF of its uniforms. Chunk results are integer counts that are added
in chunk order, so estimates are bit-identical for any number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .linalg import WishartParams, batched_singular_values

SCALES = ("sigma", "eigen")


@dataclass(frozen=True)
class McConfig:
    n_samples: int = 100_000
    seed: int = 0
    chunk_size: int = 1 << 16
    workers: int = 1

    def __post_init__(self):
        if self.n_samples < 1000:
            raise ValueError("n_samples must be at least 1000")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.chunk_size < 1 or self.workers < 1:
            raise ValueError("chunk_size and workers must be positive")


@dataclass(frozen=True)
class TailEstimate:
    value: float
    stderr: float
    n_samples: int
    seed: int


@dataclass(frozen=True)
class RatioEstimate:
    """Pr(lambda_2 >= x) / Pr(lambda_1 >= x); NaN with ``flagged`` when no sample reaches x."""

    ratio: float
    stderr: float
    n_denominator: int
    flagged: bool


def chunk_stream(seed: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(chunk,))
    return np.random.Generator(np.random.Philox(ss))


def standard_normals(stream: np.random.Generator, shape) -> np.ndarray:
    # 53-bit uniforms on the open interval (0, 1), then the inverse normal CDF
    bits = stream.integers(0, 2**64, size=shape, dtype=np.uint64, endpoint=False) >> np.uint64(11)
    u = (bits.astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def sample_matrix(p: WishartParams, stream: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw ``diag(1/sqrt(scales)) V + mean``; with ``size`` a stack of that many."""
    shape = (p.m, p.n) if size is None else (size, p.m, p.n)
    V = standard_normals(stream, shape)
    return V / np.sqrt(p.scales)[:, None] + p.mean


def _check_grid(xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float).reshape(-1)
    if xs.size == 0:
        raise ValueError("x grid is empty")
    if np.any(xs < 0) or not np.all(np.isfinite(xs)):
        raise ValueError("x grid must be finite and nonnegative")
    if np.any(np.diff(xs) < 0):
        raise ValueError("x grid must be sorted ascending")
    return xs


def _chunks(cfg: McConfig):
    full, rest = divmod(cfg.n_samples, cfg.chunk_size)
    sizes = [cfg.chunk_size] * full + ([rest] if rest else [])
    return list(enumerate(sizes))


def _chunk_counts(p, xs, scale, seed, chunk, size):
    sv = batched_singular_values(sample_matrix(p, chunk_stream(seed, chunk), size))
    if scale == "sigma":
        ind = sv[:, None, :] >= xs[None, :, None]
    else:
        ind = (sv * sv)[:, None, :] >= xs[None, :, None]
    tails = ind.sum(axis=0, dtype=np.int64)  # (nx, m)
    sign = np.where(np.arange(p.m) % 2 == 0, 1, -1)
    alt = (ind * sign).sum(axis=2)  # (size, nx)
    return tails, alt.sum(axis=0, dtype=np.int64), (alt * alt).sum(axis=0, dtype=np.int64)


def _run(p: WishartParams, xs, cfg: McConfig, scale: str):
    if scale not in SCALES:
        raise ValueError(f"scale must be one of {SCALES}")
    xs = _check_grid(xs)
    jobs = _chunks(cfg)
    fn = lambda job: _chunk_counts(p, xs, scale, cfg.seed, *job)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            parts = list(ex.map(fn, jobs))
    else:
        parts = [fn(j) for j in jobs]
    tails = sum(part[0] for part in parts)
    s1 = sum(part[1] for part in parts)
    s2 = sum(part[2] for part in parts)
    return xs, tails, s1, s2


@dataclass(frozen=True)
class EigenTails:
    """Per-x, per-index tail fractions; ``value[j, i]`` estimates Pr(sigma_{i+1} >= xs[j])
    (or Pr(lambda_{i+1} >= xs[j]) on the eigenvalue scale)."""

    xs: np.ndarray
    counts: np.ndarray
    n_samples: int
    seed: int
    scale: str

    @property
    def value(self) -> np.ndarray:
        return self.counts / self.n_samples

    @property
    def stderr(self) -> np.ndarray:
        v = self.value
        return np.sqrt(v * (1.0 - v) / self.n_samples)

    def estimate(self, j: int, i: int) -> TailEstimate:
        return TailEstimate(float(self.value[j, i]), float(self.stderr[j, i]), self.n_samples, self.seed)


def estimate_eigen_tails(p: WishartParams, xs, cfg: McConfig, scale: str = "sigma") -> EigenTails:
    xs, tails, _, _ = _run(p, xs, cfg, scale)
    return EigenTails(xs, tails, cfg.n_samples, cfg.seed, scale)


def estimate_expected_euler(p: WishartParams, xs, cfg: McConfig, scale: str = "sigma") -> list[TailEstimate]:
    """Alternating sum ``sum_i (-1)^(i-1) Pr(sigma_i >= x)``, averaged per sample."""
    xs, _, s1, s2 = _run(p, xs, cfg, scale)
    n = cfg.n_samples
    out = []
    for a, b in zip(s1, s2):
        mean = a / n
        var = max(b / n - mean * mean, 0.0)
        out.append(TailEstimate(float(mean), math.sqrt(var / n), n, cfg.seed))
    return out


def tail_ratio_curve(p: WishartParams, xs, cfg: McConfig, scale: str = "sigma") -> list[RatioEstimate]:
    """Ratio of second- to first-eigenvalue tails per x.

    Every sample with lambda_2 >= x also has lambda_1 >= x, so the ratio is a
    binomial proportion among the denominator's hits; its delta-method
    standard error is ``sqrt(r (1 - r) / hits)``.
    """
    xs, tails, _, _ = _run(p, xs, cfg, scale)
    out = []
    for c1, c2 in zip(tails[:, 0], tails[:, 1]):
        if c1 == 0:
            out.append(RatioEstimate(math.nan, math.nan, 0, True))
            continue
        r = c2 / c1
        out.append(RatioEstimate(float(r), math.sqrt(r * (1.0 - r) / c1), int(c1), False))
    return out
