"""Empirical complexity estimation and dyadic-shell embedding series.

Two numeric probes of the log-weighted spectral norm ball:

* a randomized lower bound on its empirical Rademacher complexity, built from
  random candidate frequencies on dyadic shells, and
* partial sums of the shell series that witness when square-integrability and
  log-weighted integrability part ways.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RademacherConfig",
    "rademacher_estimate",
    "ShellSpectrum",
    "SeriesVerdict",
    "EmbeddingSeries",
    "embedding_series",
]


@dataclass(frozen=True)
class RademacherConfig:
    """Estimator parameters: n data points in [-1, 1]^d, a ball radius Q,
    sigma_draws sign vectors, and candidate frequencies per dyadic shell."""

    n: int
    d: int
    Q: float
    sigma_draws: int
    shells: int
    candidates_per_shell: int
    seed: int

    def __post_init__(self) -> None:
        if min(self.n, self.d, self.sigma_draws, self.shells, self.candidates_per_shell) < 1:
            raise ValueError("all counts must be >= 1")
        if not self.Q >= 0.0:
            raise ValueError("Q must be nonnegative")


def _shell_candidates(config: RademacherConfig) -> np.ndarray:
    """Random frequencies with 1-norm in [2^k, 2^(k+1)) per shell, plus 0.

    Each candidate owns its seed substream so larger candidate counts extend
    smaller ones (the estimator is monotone in candidates_per_shell).
    """
    rows = [np.zeros(config.d)]
    for k in range(-1, config.shells + 1):
        for j in range(config.candidates_per_shell):
            rng = np.random.default_rng(
                np.random.SeedSequence([config.seed, 7, k + 1, j])
            )
            radius = rng.uniform(2.0**k, 2.0 ** (k + 1))
            while True:
                direction = rng.normal(size=config.d)
                l1 = np.abs(direction).sum()
                if l1 > 1e-12:
                    break
            rows.append(radius * direction / l1)
    return np.asarray(rows)


def rademacher_estimate(config: RademacherConfig) -> tuple[float, float]:
    """Randomized lower bound on the Rademacher complexity of the norm ball.

    Data points are uniform with sup-norm at most 1.  For each sign vector the
    supremum over the ball is lower-bounded by the best candidate frequency of
    ``|(1/n) sum_j sigma_j exp(2*pi*i xi . x_j)| / log2(2 + |xi|_1)``; the
    estimate averages over sign draws and scales linearly in Q.  The reference
    value ``Q * sqrt(d/n)`` is returned for trend comparison (its absolute
    constant is not pinned down).
    """
    xs = np.random.default_rng(
        np.random.SeedSequence([config.seed, 3])
    ).uniform(-1.0, 1.0, size=(config.n, config.d))
    sigma = (
        np.random.default_rng(np.random.SeedSequence([config.seed, 5])).integers(
            0, 2, size=(config.sigma_draws, config.n)
        )
        * 2
        - 1
    )
    candidates = _shell_candidates(config)
    weights = np.log2(2.0 + np.abs(candidates).sum(axis=1))
    phases = xs @ candidates.T
    features = np.exp(2j * math.pi * phases)
    corr = np.abs(sigma @ features) / config.n
    per_draw = (corr / weights).max(axis=1)
    estimate = config.Q * float(per_draw.mean())
    bound = config.Q * math.sqrt(config.d / config.n)
    return estimate, bound


# --- shell series ------------------------------------------------------------

@dataclass(frozen=True)
class ShellSpectrum:
    """Dyadic-shell amplitude profile for the embedding counterexamples.

    ``uniform-shell`` places the constant amplitude ``2^{-(d/2+s)k}/k`` on the
    whole Euclidean shell; ``thin-set`` places ``k^p 2^k`` on a subset of
    measure ``k^{-2p} 2^{-k}`` (requires p > 2).
    """

    d: int
    s: float
    construction: str
    K: int
    p: float | None = None

    def __post_init__(self) -> None:
        if self.construction not in ("uniform-shell", "thin-set"):
            raise ValueError("construction must be 'uniform-shell' or 'thin-set'")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not self.s >= 0.0:
            raise ValueError("s must be >= 0")
        if self.construction == "thin-set":
            if self.p is None or not self.p > 2:
                raise ValueError("thin-set construction requires p > 2")
        elif self.p is not None:
            raise ValueError("uniform-shell construction takes no p")


@dataclass(frozen=True)
class SeriesVerdict:
    """Convergence classification of one shell series.

    ``is_cauchy`` marks numerically convergent partial sums: either the last
    increment is below 1e-9 of the running sum, or the increments decay with a
    fitted geometric rate < 1 or power > 1.1 (so the tail is summable).
    ``growing`` marks non-decreasing increments; ``ratio_estimate`` is the
    recent increment ratio in either case.
    """

    is_cauchy: bool
    growing: bool
    ratio_estimate: float
    fitted_power: float
    last_rel_increment: float


@dataclass(frozen=True)
class EmbeddingSeries:
    """Per-shell increments and partial sums, in log2 to dodge overflow."""

    spec: ShellSpectrum
    k: np.ndarray
    hs_increment_log2: np.ndarray
    hs_partial_log2: np.ndarray
    blog_increment_log2: np.ndarray
    blog_partial_log2: np.ndarray
    hs_verdict: SeriesVerdict
    blog_verdict: SeriesVerdict

    def linear(self, log2_values: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp2(log2_values)

    @property
    def hs_partial(self) -> np.ndarray:
        return self.linear(self.hs_partial_log2)

    @property
    def blog_partial(self) -> np.ndarray:
        return self.linear(self.blog_partial_log2)


def _classify(increment_log2: np.ndarray, partial_log2: np.ndarray) -> SeriesVerdict:
    K = increment_log2.size
    last_rel = float(np.exp2(increment_log2[-1] - partial_log2[-1]))
    if K < 3:
        return SeriesVerdict(last_rel < 1e-9, False, math.nan, math.nan, last_rel)

    diffs = np.diff(increment_log2)
    window = diffs[-min(10, diffs.size):]
    ratio = float(np.exp2(np.median(window)))
    growing = ratio >= 1.0 - 1e-9
    if growing:
        return SeriesVerdict(False, True, ratio, math.nan, last_rel)

    # fit log2(inc) ~ c0 + c1 * k + c2 * log2(k) on the tail: c1 < 0 means a
    # geometric factor, c2 < -1 a summable power law
    tail = max(6, K // 2)
    ks = np.arange(K - tail + 1, K + 1, dtype=np.float64)
    y = increment_log2[-tail:]
    design = np.stack([np.ones_like(ks), ks, np.log2(ks)], axis=1)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    geometric = coef[1] < -1e-3
    power = -float(coef[2])
    summable_power = abs(coef[1]) <= 1e-3 and power > 1.1
    is_cauchy = last_rel < 1e-9 or geometric or summable_power
    return SeriesVerdict(bool(is_cauchy), False, ratio, power, last_rel)


def embedding_series(spec: ShellSpectrum) -> EmbeddingSeries:
    """Accumulate the square-norm and log-weighted shell series.

    uniform-shell per shell k:  hs += 2^(2sk) c_k^2 vol(A_k),
                                blog += k c_k vol(A_k),
    with c_k = 2^{-(d/2+s)k}/k and vol(A_k) the Euclidean shell volume.

    thin-set per shell k:       hs += (2/sqrt(d))^s 2^(sk) m_k^2 |E_k|,
                                blog += 2 k m_k |E_k|,
    with m_k = k^p 2^k and |E_k| = k^{-2p} 2^{-k}.

    All accumulation happens in log2 space so geometric growth never
    overflows.
    """
    k = np.arange(1, spec.K + 1, dtype=np.float64)
    log2k = np.log2(k)
    if spec.construction == "uniform-shell":
        # vol(A_k) = V_d (2^(d(k+1)) - 2^(dk)) for the Euclidean unit-ball volume V_d
        unit_ball_log2 = math.log2(math.pi ** (spec.d / 2.0) / math.gamma(spec.d / 2.0 + 1.0))
        vol_log2 = unit_ball_log2 + spec.d * k + math.log2(2.0**spec.d - 1.0)
        c_log2 = -(spec.d / 2.0 + spec.s) * k - log2k
        hs_inc = 2.0 * spec.s * k + 2.0 * c_log2 + vol_log2
        blog_inc = log2k + c_log2 + vol_log2
    else:
        m_log2 = spec.p * log2k + k
        e_log2 = -2.0 * spec.p * log2k - k
        hs_inc = spec.s * math.log2(2.0 / math.sqrt(spec.d)) + spec.s * k + 2.0 * m_log2 + e_log2
        blog_inc = 1.0 + log2k + m_log2 + e_log2

    hs_partial = np.logaddexp2.accumulate(hs_inc)
    blog_partial = np.logaddexp2.accumulate(blog_inc)
    return EmbeddingSeries(
        spec=spec,
        k=k.astype(np.int64),
        hs_increment_log2=hs_inc,
        hs_partial_log2=hs_partial,
        blog_increment_log2=blog_inc,
        blog_partial_log2=blog_partial,
        hs_verdict=_classify(hs_inc, hs_partial),
        blog_verdict=_classify(blog_inc, blog_partial),
    )
