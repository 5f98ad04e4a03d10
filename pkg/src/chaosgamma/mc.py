"""Seedable Monte Carlo for chaos functionals.

Reproducibility contract: sampling is partitioned into fixed-size chunks and
chunk i draws from a counter-based Philox stream keyed by (master seed, i).
Per-chunk reductions are folded in chunk order with compensated summation, so
an estimate depends only on (seed, n, chunk size) and is bit-identical for
any worker count.  Normal and Gamma variates come from inverse CDFs, keeping
the draw count per chunk fixed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import gammaincinv, ndtri

from .chaos import (
    ChaosVector,
    _needed_degree,
    carre_du_champ,
    evaluate,
    generator,
    gradient_norm_sq,
)
from .polynomials import hermite_table

__all__ = [
    "CHUNK_SIZE",
    "REJECT_EPS",
    "McEstimate",
    "substream",
    "standard_normals",
    "gamma_variates",
    "run_chunked",
    "run_chunked_multi",
    "mc_expect",
    "MomentFunctional",
    "GradientNormFunctional",
    "MixedNegativeFunctional",
    "IndicatorFunctional",
    "SecondChaosSpec",
    "density_malliavin",
    "density_kde",
    "density_cf_oracle",
    "estimator_vectors",
]

CHUNK_SIZE = 16384
REJECT_EPS = 1e-12
HEAVY_TAIL_SHARE = 0.05

_U_LO = np.finfo(float).tiny
_U_HI = 1.0 - np.finfo(float).epsneg


def substream(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for chunk `index` of master stream `seed`."""
    key = np.array([np.uint64(seed & (2**64 - 1)), np.uint64(index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def standard_normals(gen: np.random.Generator, shape) -> np.ndarray:
    """N(0,1) variates by inverse CDF (deterministic draw count)."""
    u = gen.random(shape)
    return ndtri(np.clip(u, _U_LO, _U_HI))


def gamma_variates(gen: np.random.Generator, alpha: float, size: int) -> np.ndarray:
    """Gamma(alpha, 1) variates by inverse CDF."""
    u = gen.random(size)
    return gammaincinv(alpha, np.clip(u, _U_LO, _U_HI))


@dataclass(frozen=True)
class McEstimate:
    """A Monte Carlo mean with its sampling error and provenance."""

    value: float
    stderr: float
    n: int
    seed: int
    chunking: str
    n_requested: int = 0
    n_nonfinite: int = 0
    n_rejected: int = 0
    max_abs_share: float = 0.0
    flags: tuple[str, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "value": self.value,
            "stderr": self.stderr,
            "n": self.n,
            "seed": self.seed,
            "chunking": self.chunking,
            "n_requested": self.n_requested,
            "n_nonfinite": self.n_nonfinite,
            "n_rejected": self.n_rejected,
            "max_abs_share": self.max_abs_share,
            "flags": list(self.flags),
        }

    def within(self, target: float, sigmas: float = 4.0, atol: float = 0.0) -> bool:
        return abs(self.value - target) <= sigmas * self.stderr + atol


def _chunk_sizes(n: int, chunk_size: int) -> list[int]:
    if n < 1:
        raise ValueError("need n >= 1 samples")
    full, rem = divmod(n, chunk_size)
    return [chunk_size] * full + ([rem] if rem else [])


def run_chunked_multi(
    sample_chunk: Callable[[np.random.Generator, int], tuple[np.ndarray, int]],
    n: int,
    seed: int,
    n_columns: int,
    workers: int = 1,
    chunk_size: int = CHUNK_SIZE,
) -> list[McEstimate]:
    """Estimate the column means of a (n, n_columns) sample matrix.

    ``sample_chunk(gen, m)`` returns (values of shape (m, n_columns),
    n_rejected).  Rejected or otherwise invalid entries must be NaN; they are
    dropped per column and counted.  The fold over chunks uses math.fsum on
    per-chunk partial sums, so the result is independent of the worker count.
    """
    sizes = _chunk_sizes(n, chunk_size)

    def work(i: int):
        gen = substream(seed, i)
        vals, rejected = sample_chunk(gen, sizes[i])
        vals = np.asarray(vals, dtype=float)
        if vals.shape != (sizes[i], n_columns):
            raise ValueError(f"sample_chunk returned shape {vals.shape}")
        finite = np.isfinite(vals)
        safe = np.where(finite, vals, 0.0)
        return (
            finite.sum(axis=0).astype(float),
            np.sum(safe, axis=0),
            np.sum(safe * safe, axis=0),
            np.sum(np.abs(safe), axis=0),
            np.max(np.abs(safe), axis=0, initial=0.0),
            int(rejected),
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            stats = list(pool.map(work, range(len(sizes))))
    else:
        stats = [work(i) for i in range(len(sizes))]

    total_rejected = sum(s[5] for s in stats)
    chunk_tag = f"philox2x64/{chunk_size}"
    out = []
    for c in range(n_columns):
        n_used = int(math.fsum(s[0][c] for s in stats))
        total = math.fsum(s[1][c] for s in stats)
        total_sq = math.fsum(s[2][c] for s in stats)
        total_abs = math.fsum(s[3][c] for s in stats)
        max_abs = max(s[4][c] for s in stats)
        n_bad = n - n_used
        flags: list[str] = []
        if n_used == 0:
            out.append(
                McEstimate(
                    math.nan, math.nan, 0, seed, chunk_tag, n, n_bad, total_rejected,
                    0.0, ("no_valid_samples",),
                )
            )
            continue
        mean = total / n_used
        var = max(total_sq / n_used - mean * mean, 0.0)
        stderr = math.sqrt(var / n_used)
        share = max_abs / total_abs if total_abs > 0 else 0.0
        if share > HEAVY_TAIL_SHARE:
            flags.append("heavy_tail")
        if n_bad > total_rejected:
            flags.append("nonfinite_samples")
        out.append(
            McEstimate(
                mean, stderr, n_used, seed, chunk_tag, n, n_bad, total_rejected,
                share, tuple(flags),
            )
        )
    return out


def run_chunked(
    sample_chunk: Callable[[np.random.Generator, int], tuple[np.ndarray, int]],
    n: int,
    seed: int,
    workers: int = 1,
    chunk_size: int = CHUNK_SIZE,
) -> McEstimate:
    """Single-column version of ``run_chunked_multi``."""

    def wrap(gen, m):
        vals, rejected = sample_chunk(gen, m)
        return np.asarray(vals, dtype=float).reshape(m, 1), rejected

    return run_chunked_multi(wrap, n, seed, 1, workers, chunk_size)[0]


# -- catalog of analytic functionals ---------------------------------------------


@dataclass(frozen=True)
class MomentFunctional:
    """E[(F + shift)^power]; negative bases with fractional power are rejected."""

    power: float
    shift: float = 0.0


@dataclass(frozen=True)
class GradientNormFunctional:
    """E[||DF||^power], evaluated through the exact chaos kernel of ||DF||^2."""

    power: float


@dataclass(frozen=True)
class MixedNegativeFunctional:
    """E[||DF||^(-2a) (F + shift)^(-b)]."""

    a: float
    b: float
    shift: float


@dataclass(frozen=True)
class IndicatorFunctional:
    """E[1_{F + shift > x} weight(F + shift)]; weight None means 1.

    ``below=True`` flips the indicator to 1_{F + shift <= x}.
    """

    x: float
    shift: float = 0.0
    weight: Callable[[np.ndarray], np.ndarray] | None = None
    below: bool = False


Functional = (
    MomentFunctional | GradientNormFunctional | MixedNegativeFunctional | IndicatorFunctional
)


def _signed_power(base: np.ndarray, power: float) -> tuple[np.ndarray, int]:
    """base**power with near-zero/negative bases rejected for negative or
    fractional powers; returns (values-with-NaN, rejection count)."""
    if power >= 0 and float(power).is_integer():
        return base ** power, 0
    bad = base < REJECT_EPS
    out = np.where(bad, np.nan, np.power(np.where(bad, 1.0, base), power))
    return out, int(bad.sum())


def mc_expect(
    F: ChaosVector,
    g: Functional,
    n: int,
    seed: int,
    workers: int = 1,
    chunk_size: int = CHUNK_SIZE,
) -> McEstimate:
    """Monte Carlo expectation of a catalog functional of F."""
    needs_w = isinstance(g, (GradientNormFunctional, MixedNegativeFunctional))
    wvec = gradient_norm_sq(F) if needs_w else None

    def sample_chunk(gen, m):
        Z = standard_normals(gen, (m, F.dim))
        rejected = 0
        if isinstance(g, MomentFunctional):
            vals, rejected = _signed_power(evaluate(F, Z) + g.shift, g.power)
        elif isinstance(g, GradientNormFunctional):
            vals, rejected = _signed_power(evaluate(wvec, Z), g.power / 2.0)
        elif isinstance(g, MixedNegativeFunctional):
            v1, r1 = _signed_power(evaluate(wvec, Z), -g.a)
            v2, r2 = _signed_power(evaluate(F, Z) + g.shift, -g.b)
            vals, rejected = v1 * v2, r1 + r2
        elif isinstance(g, IndicatorFunctional):
            y = evaluate(F, Z) + g.shift
            ind = (y <= g.x) if g.below else (y > g.x)
            wt = np.ones_like(y) if g.weight is None else g.weight(y)
            vals = np.where(ind, wt, 0.0)
        else:
            raise TypeError(f"unknown functional {type(g).__name__}")
        return vals, rejected

    return run_chunked(sample_chunk, n, seed, workers, chunk_size)


# -- second chaos -----------------------------------------------------------------


@dataclass(frozen=True)
class SecondChaosSpec:
    """F = sum_i zeta_i (Z_i^2 - 1) with non-increasing positive weights,
    approximated against a Gamma(alpha) target via the shift F + alpha."""

    zeta: tuple[float, ...]
    alpha: float

    def __post_init__(self) -> None:
        z = tuple(float(v) for v in self.zeta)
        if not z:
            raise ValueError("zeta must be non-empty")
        if any(v <= 0 for v in z):
            raise ValueError("zeta entries must be positive")
        if any(z[i] < z[i + 1] for i in range(len(z) - 1)):
            raise ValueError("zeta must be non-increasing")
        object.__setattr__(self, "zeta", z)
        object.__setattr__(self, "alpha", float(self.alpha))
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    @property
    def dim(self) -> int:
        return len(self.zeta)

    def variance(self) -> float:
        return 2.0 * sum(v * v for v in self.zeta)

    def third_moment(self) -> float:
        return 8.0 * sum(v**3 for v in self.zeta)

    def fourth_moment(self) -> float:
        s2 = sum(v * v for v in self.zeta)
        return 48.0 * sum(v**4 for v in self.zeta) + 12.0 * s2 * s2

    def shift_gap(self) -> float:
        """alpha - sum(zeta); nonnegative keeps F + alpha > 0 almost surely."""
        return self.alpha - sum(self.zeta)

    def matches_variance(self, tol: float = 1e-9) -> bool:
        return abs(self.alpha - self.variance()) <= tol

    def chaos_vector(self, max_order: int | None = None) -> ChaosVector:
        if max_order is None:
            return ChaosVector.second_chaos_diagonal(self.zeta)
        return ChaosVector.second_chaos_diagonal(self.zeta, max_order)

    def negative_moment_finite(self, p: float) -> bool:
        """Whether E[(F+alpha)^{-p}] (equivalently E[||DF||^{-2p}]) is finite.

        A quadratic form with m positive weights has P(S < eps) of order
        eps^{m/2}, so the -p moment exists iff m > 2p.  Requires the shift
        gap to be nonnegative for the F + alpha version.
        """
        return len(self.zeta) > 2.0 * p and self.shift_gap() >= -1e-12

    def to_json_dict(self) -> dict:
        return {"zeta": list(self.zeta), "alpha": self.alpha}

    @staticmethod
    def from_json_dict(doc: Mapping) -> "SecondChaosSpec":
        return SecondChaosSpec(tuple(doc["zeta"]), float(doc["alpha"]))


# -- Malliavin density estimator ---------------------------------------------------


def estimator_vectors(F: ChaosVector, k: int) -> dict[str, ChaosVector]:
    """Exact chaos vectors feeding the order-k density estimator weights.

    With w = ||DF||^2 and the directional operator A(X) = <DX, DF>/w, the
    integration-by-parts weights G_1, G_2, G_3 reduce to rational functions
    of w and carre-du-champ chains:

        V1 = -LF, V2 = Gamma(w,F), V3 = Gamma(V1,F), V4 = Gamma(V2,F),
        V5 = Gamma(V3,F), V6 = Gamma(V4,F).
    """
    if not 0 <= k <= 2:
        raise ValueError("density derivative order k must be in 0..2")
    w = gradient_norm_sq(F)
    v1 = generator(F).scale(-1.0)
    out = {"F": F, "w": w, "V1": v1}
    if k >= 0:
        out["V2"] = carre_du_champ(w, F)
    if k >= 1:
        out["V3"] = carre_du_champ(out["V1"], F)
        out["V4"] = carre_du_champ(out["V2"], F)
    if k >= 2:
        out["V5"] = carre_du_champ(out["V3"], F)
        out["V6"] = carre_du_champ(out["V4"], F)
    return out


def _estimator_weights(vals: Mapping[str, np.ndarray], k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample (G_{k+1}, reject mask) from evaluated estimator vectors."""
    w = vals["w"]
    bad = w < REJECT_EPS
    w = np.where(bad, 1.0, w)
    v1, v2 = vals["V1"], vals["V2"]
    g1 = v1 / w + v2 / w**2
    if k == 0:
        return np.where(bad, np.nan, g1), bad
    v3, v4 = vals["V3"], vals["V4"]
    h = v3 / w**2 - v1 * v2 / w**3 + v4 / w**3 - 2.0 * v2**2 / w**4
    g2 = g1 * g1 - h
    if k == 1:
        return np.where(bad, np.nan, g2), bad
    v5, v6 = vals["V5"], vals["V6"]
    ah = (
        v5 / w**3
        + (v6 - 3.0 * v2 * v3 - v1 * v4) / w**4
        + (3.0 * v1 * v2**2 - 7.0 * v2 * v4) / w**5
        + 8.0 * v2**3 / w**6
    )
    g3 = g1**3 - 3.0 * g1 * h + ah
    return np.where(bad, np.nan, g3), bad


def density_malliavin(
    F: ChaosVector,
    alpha: float,
    k: int,
    xs: Sequence[float],
    n: int,
    seed: int,
    workers: int = 1,
    chunk_size: int = CHUNK_SIZE,
) -> list[McEstimate]:
    """Estimate the k-th derivative of the density of F + alpha at points xs.

    p^(k)(x) = (-1)^k E[1_{F+alpha>x} G_{k+1}] with the integration-by-parts
    weights evaluated exactly on each sample; samples with ||DF||^2 below
    REJECT_EPS are rejected and counted.
    """
    vecs = estimator_vectors(F, k)
    deg = _needed_degree(vecs.values())
    xs = [float(x) for x in xs]
    sign = (-1.0) ** k

    def sample_chunk(gen, m):
        Z = standard_normals(gen, (m, F.dim))
        table = hermite_table(Z, deg)
        vals = {name: evaluate(vec, Z, table) for name, vec in vecs.items()}
        g, bad = _estimator_weights(vals, k)
        y = vals["F"] + alpha
        cols = np.empty((m, len(xs)))
        for j, x in enumerate(xs):
            cols[:, j] = sign * np.where(y > x, g, 0.0)
        cols[bad, :] = np.nan
        return cols, int(bad.sum())

    return run_chunked_multi(sample_chunk, n, seed, len(xs), workers, chunk_size)


def density_kde(
    F: ChaosVector,
    alpha: float,
    xs: Sequence[float],
    n: int,
    bandwidth: float,
    seed: int,
    workers: int = 1,
    chunk_size: int = CHUNK_SIZE,
) -> list[McEstimate]:
    """Gaussian-kernel density estimate of F + alpha at points xs."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    xs = [float(x) for x in xs]
    norm = 1.0 / (bandwidth * math.sqrt(2.0 * math.pi))

    def sample_chunk(gen, m):
        Z = standard_normals(gen, (m, F.dim))
        y = evaluate(F, Z) + alpha
        cols = np.empty((m, len(xs)))
        for j, x in enumerate(xs):
            u = (x - y) / bandwidth
            cols[:, j] = norm * np.exp(-0.5 * u * u)
        return cols, 0

    return run_chunked_multi(sample_chunk, n, seed, len(xs), workers, chunk_size)


# -- characteristic function oracle ------------------------------------------------


def _second_chaos_cf(zeta: Sequence[float], alpha: float, t: np.ndarray) -> np.ndarray:
    """Characteristic function of F + alpha for diagonal second chaos."""
    t = np.asarray(t, dtype=float)
    log_phi = 1j * alpha * t
    for z in zeta:
        log_phi = log_phi - 0.5 * np.log(1.0 - 2j * z * t) - 1j * z * t
    return np.exp(log_phi)


def density_cf_oracle(
    spec: SecondChaosSpec,
    xs: Sequence[float],
    rtol: float = 1e-6,
    max_refinements: int = 4,
) -> list[float]:
    """Density of F + alpha by Fourier inversion of the closed-form
    characteristic function; adaptive tolerance tightened until two
    consecutive runs agree within rtol at every point."""
    from scipy.integrate import quad

    re_phi = lambda t: np.real(_second_chaos_cf(spec.zeta, spec.alpha, t))
    im_phi = lambda t: np.imag(_second_chaos_cf(spec.zeta, spec.alpha, t))

    def invert(x: float, epsabs: float) -> float:
        if x == 0.0:
            val, _ = quad(re_phi, 0.0, np.inf, epsabs=epsabs, limit=400)
            return val / math.pi
        c, _ = quad(re_phi, 0.0, np.inf, weight="cos", wvar=x, epsabs=epsabs, limit=400)
        s, _ = quad(im_phi, 0.0, np.inf, weight="sin", wvar=x, epsabs=epsabs, limit=400)
        return (c + s) / math.pi

    out = []
    for x in xs:
        epsabs = 1e-8
        prev = invert(float(x), epsabs)
        for _ in range(max_refinements):
            cur = invert(float(x), epsabs / 10.0)
            if abs(cur - prev) <= rtol * max(1.0, abs(cur)):
                out.append(cur)
                break
            prev, epsabs = cur, epsabs / 10.0
        else:
            raise RuntimeError(
                f"characteristic-function inversion did not stabilize at x={x}: "
                f"last two values differ by {abs(cur - prev):.3e} (> {rtol})"
            )
    return out
