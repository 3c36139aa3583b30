"""Probabilistic construction of deep narrow approximants with certified bounds.

The builder samples (mode, r) pairs from the amplitude-weighted measure,
assembles one sub-network per pair, merges them into a single width-(d+4)
network, and retries with fresh samples until the realized network meets both
the error bound and the depth budget.  The bounds are existence guarantees
with positive per-draw success probability, so the expected retry count is a
small constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .metrics import QuadratureSpec, h1_error, l2_error
from .network import (
    ReluNetwork,
    SubNetworkSpec,
    build_subnetwork,
    depth_for_l1,
    merge,
    normalize_variant,
    precompose_affine,
    variant_norm_factor,
)
from .spectral import (
    TWO_PI,
    Box,
    FourierMode,
    NormKind,
    SpectralTarget,
    norm,
)

__all__ = [
    "BuildConfig",
    "BuildReport",
    "AffineInputMap",
    "compute_theta",
    "sample_pairs",
    "make_subnetwork_spec",
    "rescale_to_unit",
    "build_l2",
    "build_h1",
]

PI_SQ = math.pi**2


@dataclass(frozen=True)
class BuildConfig:
    """Parameters of one construction run."""

    m: int
    variant: str
    seed: int
    quad: QuadratureSpec
    max_retries: int = 16
    error_slack: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", normalize_variant(self.variant))
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")
        if not self.error_slack >= 1.0:
            raise ValueError("error_slack must be >= 1")


@dataclass(frozen=True)
class AffineInputMap:
    """Input change of variables ``x -> x / scale + offset``."""

    scale: float
    offset: tuple[float, ...]

    @property
    def is_identity(self) -> bool:
        return self.scale == 1.0 and all(v == 0.0 for v in self.offset)

    def apply(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) / self.scale + np.asarray(self.offset)

    def to_dict(self) -> dict:
        return {"scale": self.scale, "offset": list(self.offset)}

    @staticmethod
    def identity(dim: int) -> "AffineInputMap":
        return AffineInputMap(1.0, (0.0,) * dim)


@dataclass(frozen=True)
class BuildReport:
    """Certified outcome of a construction run.

    ``accepted`` means the quadrature error estimate stayed within
    ``error_slack * error_bound + 2 * error_std_err`` and the sampled depth
    total ``sum_i ceil(log2(2 + |xi_i|_1))`` stayed within ``depth_bound``.
    ``pairs`` records the sampled (mode index, r) list of the returned
    attempt so both checks can be recomputed from scratch.
    """

    variant: str
    m: int
    seed: int
    error_estimate: float
    error_std_err: float
    error_bound: float
    error_slack: float
    total_depth: int
    depth_bound: float
    retries_used: int
    accepted: bool
    rescale: dict | None
    c_factor: float
    domain_volume: float
    norms: dict
    merged_width: int
    merged_depth: int
    quad_kind: str
    quad_points: int
    quad_seed: int
    pairs: tuple[tuple[int, float], ...] = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "m": self.m,
            "seed": self.seed,
            "error_estimate": self.error_estimate,
            "error_std_err": self.error_std_err,
            "error_bound": self.error_bound,
            "error_slack": self.error_slack,
            "total_depth": self.total_depth,
            "depth_bound": self.depth_bound,
            "retries_used": self.retries_used,
            "accepted": self.accepted,
            "rescale": self.rescale,
            "c_factor": self.c_factor,
            "domain_volume": self.domain_volume,
            "norms": self.norms,
            "merged_width": self.merged_width,
            "merged_depth": self.merged_depth,
            "quad": {
                "kind": self.quad_kind,
                "n_points": self.quad_points,
                "seed": self.quad_seed,
            },
            "pairs": [[int(i), float(r)] for i, r in self.pairs],
        }


def _wrap_phase(value: float) -> float:
    # float modulo can round up to exactly 1.0 for tiny negative inputs
    ph = value % 1.0
    return 0.0 if ph >= 1.0 else ph


def compute_theta(mode: FourierMode) -> float:
    """Phase shift keeping ``xi . x + theta`` inside [0, |xi|_1 + 1] on [0, 1]^d.

    With ``k = ceil(sum_{xi_i < 0} |xi_i| - phase)`` the shift
    ``theta = phase + k`` differs from the mode phase by an integer, so the
    cosine value is unchanged while the folded coordinate stays in range.
    """
    negative_mass = sum(-v for v in mode.frequency if v < 0.0)
    k = math.ceil(negative_mass - mode.phase)
    return mode.phase + k


def sample_pairs(
    target: SpectralTarget, m: int, variant: str, rng: np.random.Generator
) -> list[tuple[int, float]]:
    """Draw m i.i.d. (mode index, r) pairs for the chosen variant.

    Indices follow the categorical law with weights ``A_j`` (l2) or
    ``(1 + |xi_j|_1) A_j`` (h1); r is uniform on [-1/2, 1/2].
    """
    variant = normalize_variant(variant)
    if m < 1:
        raise ValueError("m must be >= 1")
    kind = NormKind.b0() if variant == "l2" else NormKind.bs(1.0)
    w = kind.weight(target.l1_norms) * target.amplitudes
    total = w.sum()
    if not total > 0:
        raise ValueError("degenerate spectrum: all sampling weights are zero")
    idx = rng.choice(len(w), size=m, p=w / total)
    r = rng.uniform(-0.5, 0.5, size=m)
    return list(zip(idx.tolist(), r.tolist()))


def make_subnetwork_spec(
    target: SpectralTarget, mode_index: int, r: float, variant: str
) -> SubNetworkSpec:
    """Fill in the derived sub-network fields for one sampled pair."""
    mode = target.modes[mode_index]
    l1 = mode.l1
    scale = -2.0 * PI_SQ * variant_norm_factor(target, variant, l1) * math.cos(TWO_PI * r)
    return SubNetworkSpec(
        mode_index=mode_index,
        r=float(r),
        depth_L=depth_for_l1(l1),
        theta=compute_theta(mode),
        scale=scale,
    )


def rescale_to_unit(
    target: SpectralTarget, c_floor: float = 0.0
) -> tuple[SpectralTarget, AffineInputMap]:
    """Map a general domain into the unit cube by scaling frequencies.

    Returns a target g with frequencies ``c * xi`` (amplitudes unchanged,
    phases shifted so g(x/c + b) = f(x)) together with the input map
    ``x -> x/c + b`` to pre-compose into a network built for g.  ``c`` is the
    domain diameter, floored at ``c_floor`` (the first-order variant needs
    c >= 1 for its norm bookkeeping).  Domains already inside [0, 1]^d are
    returned unchanged with the identity map.
    """
    box = target.domain
    if box.fits_unit_cube:
        return target, AffineInputMap.identity(target.dim)
    diam = box.diameter
    if not diam > 0:
        raise ValueError("domain has zero diameter")
    c = max(diam, c_floor)
    b = -box.lo_array / c
    modes = tuple(
        FourierMode(
            tuple(c * v for v in mode.frequency),
            mode.amplitude,
            _wrap_phase(mode.phase + float(np.dot(mode.frequency, box.lo_array))),
        )
        for mode in target.modes
    )
    new_box = Box((0.0,) * target.dim, tuple((box.hi_array - box.lo_array) / c))
    scaled = SpectralTarget(dim=target.dim, modes=modes, domain=new_box)
    return scaled, AffineInputMap(c, tuple(b))


def _build(
    target: SpectralTarget, config: BuildConfig, variant: str
) -> tuple[ReluNetwork, BuildReport]:
    variant = normalize_variant(variant)
    if config.variant != variant:
        raise ValueError(f"config variant {config.variant!r} does not match {variant!r}")

    work, amap = rescale_to_unit(target, c_floor=1.0 if variant == "h1" else 0.0)
    d = target.dim

    b0 = norm(work, NormKind.b0())
    blog = norm(work, NormKind.blog())
    b1 = norm(work, NormKind.bs(1.0))
    b1log = norm(work, NormKind.bs_log(1.0))
    vol = target.domain.volume
    root_m = math.sqrt(config.m)

    if variant == "l2":
        error_bound = 2.0 * PI_SQ / root_m * math.sqrt(vol) * norm(target, NormKind.b0())
        depth_bound = 5.0 * config.m * blog / b0
        norm_used = b0
        c_factor = 1.0 if amap.is_identity else math.log2(2.0 + amap.scale)
        estimator = l2_error
    else:
        c2 = 1.0 if amap.is_identity else max(1.0, target.domain.diameter)
        error_bound = (
            4.0 * PI_SQ / root_m * c2 * math.sqrt(vol) * norm(target, NormKind.bs(1.0))
        )
        depth_bound = 5.0 * config.m * b1log / b1
        norm_used = b1
        c_factor = c2
        estimator = h1_error

    offset = 2.0 * PI_SQ * norm_used
    rng = np.random.default_rng(config.seed)
    best = None

    for attempt in range(config.max_retries):
        pairs = sample_pairs(work, config.m, variant, rng)
        subnets = [
            build_subnetwork(work, make_subnetwork_spec(work, i, r, variant), variant)
            for i, r in pairs
        ]
        net = merge(subnets, d, offset)
        full = net if amap.is_identity else precompose_affine(net, amap.scale, amap.offset)
        estimate, std_err = estimator(target, full, config.quad)
        total_depth = sum(depth_for_l1(work.modes[i].l1) for i, _ in pairs)
        accepted = (
            estimate <= config.error_slack * error_bound + 2.0 * std_err
            and total_depth <= depth_bound
        )
        candidate = (estimate, std_err, total_depth, accepted, attempt, pairs, full)
        if best is None or estimate < best[0]:
            best = candidate
        if accepted:
            best = candidate
            break

    estimate, std_err, total_depth, accepted, attempt, pairs, full = best
    report = BuildReport(
        variant=variant,
        m=config.m,
        seed=config.seed,
        error_estimate=estimate,
        error_std_err=std_err,
        error_bound=error_bound,
        error_slack=config.error_slack,
        total_depth=total_depth,
        depth_bound=depth_bound,
        retries_used=attempt,
        accepted=accepted,
        rescale=None if amap.is_identity else amap.to_dict(),
        c_factor=c_factor,
        domain_volume=vol,
        norms={"b0": b0, "blog": blog, "b1": b1, "b1log": b1log},
        merged_width=full.width,
        merged_depth=full.depth,
        quad_kind=config.quad.kind,
        quad_points=config.quad.n_points,
        quad_seed=config.quad.seed,
        pairs=tuple((int(i), float(r)) for i, r in pairs),
    )
    return full, report


def build_l2(target: SpectralTarget, config: BuildConfig) -> tuple[ReluNetwork, BuildReport]:
    """Construct a width-(d+4) network meeting the L2 error and depth budgets.

    The acceptance threshold is ``error_slack * (2*pi^2/sqrt(m)) * |domain|^(1/2)
    * |f|_b0`` plus two quadrature standard errors; the depth budget is
    ``5 m |f|_blog / |f|_b0``.  Resamples up to ``max_retries`` times and
    returns the best attempt (flagged unaccepted) if none passes.
    """
    return _build(target, config, "l2")


def build_h1(target: SpectralTarget, config: BuildConfig) -> tuple[ReluNetwork, BuildReport]:
    """As ``build_l2`` but in the first-order Sobolev norm.

    Sub-network amplitudes carry the extra ``(1 + |xi|_1)^-1`` factor, the
    error threshold is ``4*pi^2/sqrt(m) * |domain|^(1/2) * |f|_b1`` and the
    depth budget ``5 m |f|_b1log / |f|_b1``.
    """
    return _build(target, config, "h1")
