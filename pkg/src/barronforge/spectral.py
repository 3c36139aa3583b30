"""Spectral target functions: finite sums of Fourier modes.

A target is stored in amplitude/phase cosine form

    f(x) = sum_j A_j * cos(2*pi*(xi_j . x + phi_j)),

which keeps every Barron-type norm exactly computable as a finite weighted
sum over the atoms.  Targets are immutable and safe to share across threads;
all sampling takes an explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

__all__ = [
    "FourierMode",
    "Box",
    "SpectralTarget",
    "NormKind",
    "evaluate",
    "gradient",
    "norm",
    "spectral_decay_amplitude",
    "synth_target",
    "sample_frequency",
    "target_to_dict",
    "target_from_dict",
    "save_target",
    "load_target",
]


@dataclass(frozen=True)
class FourierMode:
    """One cosine atom ``A * cos(2*pi*(xi . x + phase))``.

    ``frequency`` is measured in cycles per unit length, ``phase`` in turns
    (so ``phase = 0.25`` is a quarter period).
    """

    frequency: tuple[float, ...]
    amplitude: float
    phase: float

    def __post_init__(self) -> None:
        freq = tuple(float(v) for v in self.frequency)
        object.__setattr__(self, "frequency", freq)
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "phase", float(self.phase))
        if len(freq) == 0:
            raise ValueError("frequency must have at least one component")
        if not all(math.isfinite(v) for v in freq):
            raise ValueError("frequency components must be finite")
        if not math.isfinite(self.amplitude) or self.amplitude < 0.0:
            raise ValueError(f"amplitude must be finite and >= 0, got {self.amplitude}")
        if not math.isfinite(self.phase) or not 0.0 <= self.phase < 1.0:
            raise ValueError(f"phase must lie in [0, 1), got {self.phase}")

    @property
    def l1(self) -> float:
        """1-norm of the frequency vector."""
        return float(sum(abs(v) for v in self.frequency))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with finite positive edge lengths."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi) or len(lo) == 0:
            raise ValueError("box lo/hi must be nonempty and of equal length")
        if not all(math.isfinite(v) for v in lo + hi):
            raise ValueError("box bounds must be finite")
        if not all(h > l for l, h in zip(lo, hi)):
            raise ValueError("box must have positive edge lengths")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @cached_property
    def lo_array(self) -> np.ndarray:
        arr = np.asarray(self.lo, dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def hi_array(self) -> np.ndarray:
        arr = np.asarray(self.hi, dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi_array - self.lo_array))

    @property
    def diameter(self) -> float:
        """Euclidean diameter (the long diagonal)."""
        return float(np.linalg.norm(self.hi_array - self.lo_array))

    @property
    def fits_unit_cube(self) -> bool:
        tol = 1e-12
        return bool(np.all(self.lo_array >= -tol) and np.all(self.hi_array <= 1.0 + tol))

    @staticmethod
    def unit(dim: int) -> "Box":
        return Box((0.0,) * dim, (1.0,) * dim)


@dataclass(frozen=True)
class SpectralTarget:
    """A target function given by an explicit finite mode list on a box."""

    dim: int
    modes: tuple[FourierMode, ...]
    domain: Box

    def __post_init__(self) -> None:
        object.__setattr__(self, "modes", tuple(self.modes))
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if len(self.modes) == 0:
            raise ValueError("target needs at least one mode")
        for mode in self.modes:
            if len(mode.frequency) != self.dim:
                raise ValueError(
                    f"mode frequency has length {len(mode.frequency)}, expected {self.dim}"
                )
        if self.domain.dim != self.dim:
            raise ValueError("domain dimension does not match target dimension")

    @cached_property
    def frequency_matrix(self) -> np.ndarray:
        arr = np.asarray([m.frequency for m in self.modes], dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def amplitudes(self) -> np.ndarray:
        arr = np.asarray([m.amplitude for m in self.modes], dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def phases(self) -> np.ndarray:
        arr = np.asarray([m.phase for m in self.modes], dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def l1_norms(self) -> np.ndarray:
        arr = np.abs(self.frequency_matrix).sum(axis=1)
        arr.setflags(write=False)
        return arr


@dataclass(frozen=True)
class NormKind:
    """Selector for the four spectral norms.

    The per-atom weights are

    * ``b0``                     -> 1
    * ``bs`` with order s        -> 1 + |xi|_1^s
    * ``blog``                   -> log2(2 + |xi|_1)
    * ``bslog`` with order s     -> (1 + |xi|_1^s) * log2(2 + |xi|_1)
    """

    tag: str
    order: float | None = None

    def __post_init__(self) -> None:
        if self.tag not in ("b0", "bs", "blog", "bslog"):
            raise ValueError(f"unknown norm tag {self.tag!r}")
        if self.tag in ("bs", "bslog"):
            if self.order is None or not self.order > 0:
                raise ValueError("order s must be > 0 for bs/bslog norms")
        elif self.order is not None:
            raise ValueError(f"norm {self.tag!r} takes no order")

    @classmethod
    def b0(cls) -> "NormKind":
        return cls("b0")

    @classmethod
    def bs(cls, order: float) -> "NormKind":
        return cls("bs", float(order))

    @classmethod
    def blog(cls) -> "NormKind":
        return cls("blog")

    @classmethod
    def bs_log(cls, order: float) -> "NormKind":
        return cls("bslog", float(order))

    def weight(self, l1: np.ndarray | float) -> np.ndarray:
        """Per-atom weight as a function of the frequency 1-norm."""
        l1 = np.asarray(l1, dtype=np.float64)
        if self.tag == "b0":
            return np.ones_like(l1)
        if self.tag == "bs":
            return 1.0 + l1**self.order
        if self.tag == "blog":
            return np.log2(2.0 + l1)
        return (1.0 + l1**self.order) * np.log2(2.0 + l1)


def _check_points(target: SpectralTarget, x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.ndim != 2 or pts.shape[1] != target.dim:
        raise ValueError(f"points must have {target.dim} components, got shape {x.shape}")
    return pts, single


def evaluate(target: SpectralTarget, x) -> float | np.ndarray:
    """Evaluate the mode sum at ``x`` (a d-vector or an (n, d) batch)."""
    pts, single = _check_points(target, x)
    angles = TWO_PI * (pts @ target.frequency_matrix.T + target.phases)
    vals = np.cos(angles) @ target.amplitudes
    return float(vals[0]) if single else vals


def gradient(target: SpectralTarget, x) -> np.ndarray:
    """Exact gradient, ``df/dx_i = -2*pi * sum_j A_j xi_j^(i) sin(2*pi*(...))``."""
    pts, single = _check_points(target, x)
    angles = TWO_PI * (pts @ target.frequency_matrix.T + target.phases)
    weighted = np.sin(angles) * target.amplitudes
    grads = -TWO_PI * (weighted @ target.frequency_matrix)
    return grads[0] if single else grads


def norm(target: SpectralTarget, kind: NormKind) -> float:
    """Weighted amplitude sum ``sum_j w(|xi_j|_1) A_j`` for the chosen kind."""
    return float(kind.weight(target.l1_norms) @ target.amplitudes)


def spectral_decay_amplitude(l1, d: int, log_exponent: float) -> np.ndarray:
    """Amplitude envelope ``(1 + |xi|_1^d)^-1 * log2(2 + |xi|_1)^-p``."""
    l1 = np.asarray(l1, dtype=np.float64)
    return 1.0 / (1.0 + l1 ** float(d)) / np.log2(2.0 + l1) ** float(log_exponent)


def synth_target(
    d: int,
    n_modes: int,
    log_exponent: float,
    seed: int,
    radius_range: tuple[float, float] = (0.5, 4096.0),
    lattice: float = 0.5,
) -> SpectralTarget:
    """Draw a synthetic target on [0, 1]^d with a log-corrected polynomial decay.

    Frequencies get a log-uniform radius over ``radius_range`` and a uniform
    direction, with components rounded to multiples of ``lattice`` to avoid
    pathological near-zero frequencies.  Amplitudes follow
    ``spectral_decay_amplitude`` evaluated at the rounded 1-norm; phases are
    uniform in [0, 1).  Deterministic given ``seed``.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if not log_exponent > 1:
        raise ValueError("log_exponent must be > 1")
    lo, hi = radius_range
    if not (0 < lo < hi):
        raise ValueError("radius_range must be increasing and positive")
    if not lattice > 0:
        raise ValueError("lattice must be positive")

    rng = np.random.default_rng(seed)
    radii = np.exp(rng.uniform(math.log(lo), math.log(hi), size=n_modes))
    dirs = rng.normal(size=(n_modes, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    freqs = lattice * np.round(radii[:, None] * dirs / lattice)
    l1 = np.abs(freqs).sum(axis=1)
    amps = spectral_decay_amplitude(l1, d, log_exponent)
    phases = rng.uniform(0.0, 1.0, size=n_modes)

    modes = tuple(
        FourierMode(tuple(freqs[j]), float(amps[j]), float(phases[j]))
        for j in range(n_modes)
    )
    return SpectralTarget(dim=d, modes=modes, domain=Box.unit(d))


def sample_frequency(
    target: SpectralTarget, weighting: NormKind, rng: np.random.Generator
) -> int:
    """Draw a mode index with probability proportional to ``w(|xi_j|_1) A_j``.

    Only the flat (``b0``) and first-order (``bs`` with s=1) weightings are
    meaningful sampling measures here.
    """
    if not (weighting.tag == "b0" or (weighting.tag == "bs" and weighting.order == 1.0)):
        raise ValueError("weighting must be b0 or bs with order 1")
    w = weighting.weight(target.l1_norms) * target.amplitudes
    total = w.sum()
    if not total > 0:
        raise ValueError("cannot sample from an all-zero amplitude spectrum")
    return int(rng.choice(len(w), p=w / total))


# --- JSON interchange -------------------------------------------------------

def _reject_constant(name: str):
    raise ValueError(f"non-finite value {name!r} not allowed in target files")


def target_to_dict(target: SpectralTarget) -> dict:
    return {
        "dim": target.dim,
        "domain": {"lo": list(target.domain.lo), "hi": list(target.domain.hi)},
        "modes": [
            {"xi": list(m.frequency), "amplitude": m.amplitude, "phase": m.phase}
            for m in target.modes
        ],
    }


def target_from_dict(data: dict) -> SpectralTarget:
    try:
        dim = int(data["dim"])
        domain = Box(tuple(data["domain"]["lo"]), tuple(data["domain"]["hi"]))
        modes = tuple(
            FourierMode(tuple(m["xi"]), m["amplitude"], m["phase"])
            for m in data["modes"]
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed target document: {exc}") from exc
    return SpectralTarget(dim=dim, modes=modes, domain=domain)


def save_target(target: SpectralTarget, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(target_to_dict(target), fh, indent=1)
        fh.write("\n")


def load_target(path) -> SpectralTarget:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh, parse_constant=_reject_constant)
    return target_from_dict(data)
