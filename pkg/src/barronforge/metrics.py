"""Quadrature-based error estimation and convergence diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spectral import TWO_PI, Box, SpectralTarget, evaluate, gradient

__all__ = [
    "QuadratureSpec",
    "quadrature_points",
    "l2_error",
    "h1_error",
    "verify_cos_lemma",
    "slope_fit",
]

KINDS = ("tensor-grid", "monte-carlo")


@dataclass(frozen=True)
class QuadratureSpec:
    """Deterministic description of how integrals over the domain are estimated."""

    kind: str
    n_points: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"quadrature kind must be one of {KINDS}, got {self.kind!r}")
        if self.n_points < 16:
            raise ValueError("n_points must be >= 16")


def quadrature_points(quad: QuadratureSpec, box: Box, dim: int) -> np.ndarray:
    """Sample points for the spec: uniform draws or a midpoint tensor grid."""
    lo = box.lo_array
    hi = box.hi_array
    if quad.kind == "monte-carlo":
        rng = np.random.default_rng(quad.seed)
        return rng.uniform(lo, hi, size=(quad.n_points, dim))
    if dim > 3:
        raise ValueError("tensor-grid quadrature is only supported for d <= 3")
    per_axis = max(2, int(round(quad.n_points ** (1.0 / dim))))
    axes = [
        lo[i] + (hi[i] - lo[i]) * (np.arange(per_axis) + 0.5) / per_axis
        for i in range(dim)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _scalar_field(F, X: np.ndarray) -> np.ndarray:
    vals = np.asarray(F.eval(X), dtype=np.float64)
    if vals.ndim == 2 and vals.shape[1] == 1:
        vals = vals[:, 0]
    if vals.shape != (X.shape[0],):
        raise ValueError("error estimation expects a scalar-valued approximant")
    return vals


def _gradient_field(F, X: np.ndarray) -> np.ndarray:
    grads = np.asarray(F.grad(X), dtype=np.float64)
    if grads.ndim == 3 and grads.shape[1] == 1:
        grads = grads[:, 0, :]
    if grads.shape != X.shape:
        raise ValueError("error estimation expects a scalar-valued approximant")
    return grads


def _estimate_from_samples(e: np.ndarray, volume: float, stochastic: bool) -> tuple[float, float]:
    mean_sq = volume * float(e.mean())
    estimate = math.sqrt(max(mean_sq, 0.0))
    if not stochastic or len(e) < 2:
        return estimate, 0.0
    se_sq = volume * float(e.std(ddof=1)) / math.sqrt(len(e))
    std_err = se_sq / (2.0 * estimate) if estimate > 0 else 0.0
    return estimate, std_err


def l2_error(f: SpectralTarget, F, quad: QuadratureSpec) -> tuple[float, float]:
    """Estimate of the L2 distance between the target and an approximant.

    ``F`` needs an ``eval`` method accepting an (n, d) batch.  Returns the
    root of the estimated squared integral over the domain together with the
    Monte Carlo standard error of the squared quantity propagated to the root
    (0 for tensor grids).
    """
    X = quadrature_points(quad, f.domain, f.dim)
    e = (np.asarray(evaluate(f, X)) - _scalar_field(F, X)) ** 2
    return _estimate_from_samples(e, f.domain.volume, quad.kind == "monte-carlo")


def h1_error(f: SpectralTarget, F, quad: QuadratureSpec) -> tuple[float, float]:
    """First-order Sobolev error: value mismatch plus gradient mismatch.

    The squared integrand is ``(f - F)^2 + |grad f - grad F|^2``; ``F`` needs
    ``eval`` and ``grad``.  Monte Carlo points miss ReLU kinks almost surely.
    """
    X = quadrature_points(quad, f.domain, f.dim)
    e = (np.asarray(evaluate(f, X)) - _scalar_field(F, X)) ** 2
    e = e + ((gradient(f, X) - _gradient_field(F, X)) ** 2).sum(axis=1)
    return _estimate_from_samples(e, f.domain.volume, quad.kind == "monte-carlo")


# --- cosine reconstruction check --------------------------------------------

def _simpson_weights(n_nodes: int) -> np.ndarray:
    w = np.ones(n_nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def _cosine_integral(s: np.ndarray, nodes_per_piece: int) -> np.ndarray:
    """Kink-split composite Simpson value of -2*pi^2 * int cos(2*pi*r) gamma(s, r) dr.

    For a folded coordinate s in (0, 1/2) the integrand is piecewise smooth on
    [-1/2, -s], [-s, 0], [0, s] and [s, 1/2]; the first piece vanishes
    identically and each remaining piece gets its own composite Simpson rule.
    """
    u = np.linspace(0.0, 1.0, nodes_per_piece)
    w = _simpson_weights(nodes_per_piece)
    s = s[:, None]

    # piece on [-s, 0]: integrand cos(2 pi r) * (s + r)
    r = -s + s * u
    total = s[:, 0] / (nodes_per_piece - 1) * (
        (np.cos(TWO_PI * r) * (s + r)) @ w
    )
    # piece on [0, s]: integrand cos(2 pi r) * s
    r = s * u
    total += s[:, 0] / (nodes_per_piece - 1) * ((np.cos(TWO_PI * r) * s) @ w)
    # piece on [s, 1/2]: integrand cos(2 pi r) * r
    width = 0.5 - s
    r = s + width * u
    total += width[:, 0] / (nodes_per_piece - 1) * ((np.cos(TWO_PI * r) * r) @ w)
    return -2.0 * math.pi**2 * total


def verify_cos_lemma(
    n_values: Sequence[int], t_grid: Sequence[float], r_quad_points: int
) -> float:
    """Max deviation of the quadrature identity reconstructing cosines.

    For each ``n`` and ``t`` the value ``-2*pi^2 * int_{-1/2}^{1/2}
    cos(2*pi*r) * gamma(n*t mod 1, r) dr`` is computed by kink-split Simpson
    quadrature with about ``r_quad_points`` nodes and compared against
    ``cos(2*pi*n*t)``.  Returns the largest absolute deviation.
    """
    n_arr = np.asarray(list(n_values), dtype=np.int64)
    t_arr = np.asarray(list(t_grid), dtype=np.float64)
    if n_arr.size == 0 or np.any(n_arr < 1):
        raise ValueError("n values must be positive integers")
    if t_arr.size == 0 or np.any(t_arr <= 0.0) or np.any(t_arr >= 1.0):
        raise ValueError("t grid must lie strictly inside (0, 1)")
    if r_quad_points < 1000:
        raise ValueError("r_quad_points must be >= 1000")

    nodes = r_quad_points // 4
    if nodes % 2 == 0:
        nodes += 1
    nodes = max(nodes, 5)

    frac = (n_arr[:, None] * t_arr[None, :]) % 1.0
    s = np.minimum(frac, 1.0 - frac).ravel()
    # the deviation only depends on the folded coordinate, so identical values
    # share one quadrature run
    s_unique = np.unique(s)
    if np.any(s_unique <= 0.0):
        raise ValueError("n*t mod 1 hit an integer; choose an off-lattice t grid")

    worst = 0.0
    chunk = 128
    for start in range(0, s_unique.size, chunk):
        block = s_unique[start : start + chunk]
        integral = _cosine_integral(block, nodes)
        dev = np.abs(integral - np.cos(TWO_PI * block))
        worst = max(worst, float(dev.max()))
    return worst


def slope_fit(points: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
    """Ordinary least squares of log err against log m.

    Returns ``(slope, intercept, r2)``; intercept is in natural-log units.
    """
    pts = list(points)
    if len(pts) < 3:
        raise ValueError("slope_fit needs at least 3 points")
    m = np.asarray([p[0] for p in pts], dtype=np.float64)
    err = np.asarray([p[1] for p in pts], dtype=np.float64)
    if np.any(err <= 0.0) or np.any(m <= 0.0):
        raise ValueError("slope_fit needs positive sizes and errors")
    x = np.log(m)
    y = np.log(err)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float((resid**2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot <= 1e-300:
        r2 = 1.0 if ss_res <= 1e-300 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2
