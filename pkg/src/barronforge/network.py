"""Explicit ReLU networks and exact constructors for the approximation scheme.

A network is an ordered list of affine maps; every layer except the last is
followed by a ReLU.  ``depth`` counts affine maps, ``width`` the largest
hidden output dimension.  Two exact one-dimensional primitives drive the
whole construction:

* the triangle map ``beta(t) = relu(2t) - 2*relu(2t - 1)``, which folds
  [0, 1] onto itself and doubles frequency once per application, and
* the kernel tail ``gamma(t, r) = max(0, r) + relu(beta(t)/2 - |r|)``, whose
  integral against ``cos(2*pi*r)`` over r in [-1/2, 1/2] reproduces a cosine.

Chaining L copies of ``beta`` in front of the tail evaluates
``gamma(2^L * t mod 1, r)`` exactly, which is how a narrow network reaches
high frequencies through depth alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .spectral import TWO_PI, NormKind, SpectralTarget, norm

__all__ = [
    "Layer",
    "ReluNetwork",
    "SubNetworkSpec",
    "normalize_variant",
    "variant_norm_factor",
    "depth_for_l1",
    "build_beta",
    "build_gamma_tail",
    "compose",
    "build_subnetwork",
    "merge",
    "precompose_affine",
    "network_to_dict",
    "network_from_dict",
    "save_network",
    "load_network",
]


@dataclass(frozen=True)
class Layer:
    """One affine map ``z -> w @ z + b`` with ``w`` of shape (out, in)."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.weight, dtype=np.float64)
        b = np.array(self.bias, dtype=np.float64)
        if w.ndim != 2:
            raise ValueError("layer weight must be a matrix")
        if b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise ValueError("layer bias must match the weight row count")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValueError("layer weights and biases must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass(frozen=True)
class ReluNetwork:
    """Layered affine-plus-ReLU network; the final layer is affine only."""

    layers: tuple[Layer, ...]
    input_dim: int

    def __post_init__(self) -> None:
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if len(layers) == 0:
            raise ValueError("network needs at least one affine layer")
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        prev = self.input_dim
        for idx, layer in enumerate(layers):
            if layer.in_dim != prev:
                raise ValueError(
                    f"layer {idx} expects input {layer.in_dim}, previous produces {prev}"
                )
            prev = layer.out_dim

    @property
    def depth(self) -> int:
        """Number of affine maps."""
        return len(self.layers)

    @property
    def hidden_depth(self) -> int:
        """Number of ReLU layers (all but the final affine map)."""
        return len(self.layers) - 1

    @property
    def width(self) -> int:
        """Largest hidden output dimension (output dim for affine-only nets)."""
        hidden = [layer.out_dim for layer in self.layers[:-1]]
        return max(hidden) if hidden else self.layers[-1].out_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def param_count(self) -> int:
        return sum(layer.weight.size + layer.bias.size for layer in self.layers)

    def _batch(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.ndim != 2 or pts.shape[1] != self.input_dim:
            raise ValueError(
                f"input must have {self.input_dim} components, got shape {x.shape}"
            )
        return pts, single

    def eval(self, x) -> np.ndarray:
        """Forward pass; returns (out,) for a single point, (n, out) for a batch."""
        z, single = self._batch(x)
        for layer in self.layers[:-1]:
            z = np.maximum(z @ layer.weight.T + layer.bias, 0.0)
        last = self.layers[-1]
        z = z @ last.weight.T + last.bias
        return z[0] if single else z

    def grad(self, x) -> np.ndarray:
        """Piecewise-linear Jacobian with the convention ``relu'(0) = 0``.

        Returns (out, d) for a single point, (n, out, d) for a batch.  Equals
        the true derivative wherever no pre-activation sits exactly on a kink.
        """
        z, single = self._batch(x)
        n = z.shape[0]
        jac = np.broadcast_to(np.eye(self.input_dim), (n, self.input_dim, self.input_dim)).copy()
        for layer in self.layers[:-1]:
            pre = z @ layer.weight.T + layer.bias
            mask = pre > 0.0
            jac = np.matmul(layer.weight, jac) * mask[:, :, None]
            z = np.where(mask, pre, 0.0)
        jac = np.matmul(self.layers[-1].weight, jac)
        return jac[0] if single else jac

    def kink_distance(self, x) -> float | np.ndarray:
        """First-order distance from ``x`` to the nearest ReLU kink hyperplane.

        For each hidden unit the estimate is ``|pre| / |grad pre|_2``; the
        minimum over units and layers is a conservative radius inside which
        the network is affine.  Used to reject probe points before comparing
        analytic gradients with finite differences.
        """
        z, single = self._batch(x)
        n = z.shape[0]
        jac = np.broadcast_to(np.eye(self.input_dim), (n, self.input_dim, self.input_dim)).copy()
        dist = np.full(n, np.inf)
        for layer in self.layers[:-1]:
            pre = z @ layer.weight.T + layer.bias
            grads = np.matmul(layer.weight, jac)
            norms = np.linalg.norm(grads, axis=2)
            active = norms > 1e-300
            ratios = np.where(active, np.abs(pre) / np.where(active, norms, 1.0), np.inf)
            dist = np.minimum(dist, ratios.min(axis=1))
            mask = pre > 0.0
            jac = grads * mask[:, :, None]
            z = np.where(mask, pre, 0.0)
        return float(dist[0]) if single else dist


# --- primitive constructors -------------------------------------------------

def build_beta() -> ReluNetwork:
    """Triangle map ``beta(t) = relu(2t) - 2*relu(2t - 1)`` as a width-2 net."""
    hidden = Layer(np.array([[2.0], [2.0]]), np.array([0.0, -1.0]))
    out = Layer(np.array([[1.0, -2.0]]), np.array([0.0]))
    return ReluNetwork((hidden, out), input_dim=1)


def build_gamma_tail(r: float) -> ReluNetwork:
    """Kernel tail ``t -> gamma(t, r)`` on [0, 1] for a fixed offset ``r``.

    Realized through the identity ``gamma(t, r) = max(0, r) + relu(beta(t)/2
    - |r|)``: hidden layer 1 computes ``u1 = relu(2t)``, ``u2 = relu(2t-1)``;
    hidden layer 2 computes ``v = relu(u1/2 - u2 - |r|)``; the output affine
    adds ``max(0, r)``.
    """
    r = float(r)
    if not abs(r) <= 0.5:
        raise ValueError(f"|r| must be <= 1/2, got {r}")
    pair = Layer(np.array([[2.0], [2.0]]), np.array([0.0, -1.0]))
    fold = Layer(np.array([[0.5, -1.0]]), np.array([-abs(r)]))
    out = Layer(np.array([[1.0]]), np.array([max(0.0, r)]))
    return ReluNetwork((pair, fold, out), input_dim=1)


def compose(outer: ReluNetwork, inner: ReluNetwork) -> ReluNetwork:
    """Exact function composition ``outer o inner``.

    The final affine layer of ``inner`` is fused into the first layer of
    ``outer``, so the result has ``inner.hidden_depth + outer.depth`` affine
    maps and hidden depths add exactly.
    """
    if inner.output_dim != outer.input_dim:
        raise ValueError(
            f"inner output dim {inner.output_dim} != outer input dim {outer.input_dim}"
        )
    last = inner.layers[-1]
    first = outer.layers[0]
    fused = Layer(first.weight @ last.weight, first.weight @ last.bias + first.bias)
    return ReluNetwork(inner.layers[:-1] + (fused,) + outer.layers[1:], inner.input_dim)


# --- sub-networks for sampled modes ----------------------------------------

@dataclass(frozen=True)
class SubNetworkSpec:
    """Recipe for one sampled-mode sub-network.

    ``depth_L`` is the number of triangle layers, ``theta`` the phase shift
    that keeps the folded coordinate inside [0, 1] on the unit cube, and
    ``scale`` the full output coefficient (sign and cosine factor included).
    """

    mode_index: int
    r: float
    depth_L: int
    theta: float
    scale: float

    def __post_init__(self) -> None:
        if not abs(self.r) <= 0.5:
            raise ValueError(f"|r| must be <= 1/2, got {self.r}")
        if self.depth_L < 1:
            raise ValueError("depth_L must be a positive integer")
        if self.mode_index < 0:
            raise ValueError("mode_index must be nonnegative")


def normalize_variant(variant: str) -> str:
    v = str(variant).lower()
    if v not in ("l2", "h1"):
        raise ValueError(f"variant must be 'l2' or 'h1', got {variant!r}")
    return v


def depth_for_l1(l1: float) -> int:
    """Triangle-layer count ``ceil(log2(2 + |xi|_1))`` for one mode."""
    return max(1, int(math.ceil(math.log2(2.0 + float(l1)))))


def variant_norm_factor(target: SpectralTarget, variant: str, l1: float) -> float:
    """Amplitude normalizer of a sub-network: the sampling measure's total mass
    divided by the sampled atom's weight."""
    variant = normalize_variant(variant)
    if variant == "l2":
        return norm(target, NormKind.b0())
    return norm(target, NormKind.bs(1.0)) / (1.0 + float(l1))


def build_subnetwork(
    target: SpectralTarget, spec: SubNetworkSpec, variant: str
) -> ReluNetwork:
    """Width-2 deep network computing ``scale * gamma(n*t(x) mod 1, r)``.

    The input layer maps x to ``t(x) = (xi . x + theta) / n`` with
    ``n = 2^depth_L``; ``depth_L`` triangle layers fold it; the kernel tail
    and the scaled output affine finish the job.  Hidden depth is
    ``depth_L + 2``.
    """
    variant = normalize_variant(variant)
    if not target.domain.fits_unit_cube:
        raise ValueError("sub-network construction requires a domain inside [0, 1]^d")
    mode = target.modes[spec.mode_index]
    l1 = mode.l1
    want = depth_for_l1(l1)
    if spec.depth_L != want:
        raise ValueError(f"depth_L {spec.depth_L} inconsistent with mode (expected {want})")
    n_fold = 2.0**spec.depth_L

    freq = np.asarray(mode.frequency)
    lo = target.domain.lo_array
    hi = target.domain.hi_array
    low = spec.theta + np.minimum(freq * lo, freq * hi).sum()
    high = spec.theta + np.maximum(freq * lo, freq * hi).sum()
    if low < -1e-9 or high > n_fold + 1e-9:
        raise ValueError(
            "theta bookkeeping error: xi . x + theta leaves [0, n] on the domain "
            f"(range [{low}, {high}], n = {n_fold})"
        )

    expected = -2.0 * math.pi**2 * variant_norm_factor(target, variant, l1) * math.cos(
        TWO_PI * spec.r
    )
    if abs(spec.scale - expected) > 1e-9 * max(1.0, abs(expected)):
        raise ValueError(
            f"scale {spec.scale} inconsistent with variant {variant!r} (expected {expected})"
        )

    layers = [Layer(freq[None, :] / n_fold, np.array([spec.theta / n_fold]))]
    layers.append(Layer(np.array([[2.0], [2.0]]), np.array([0.0, -1.0])))
    for _ in range(spec.depth_L - 1):
        layers.append(Layer(np.array([[2.0, -4.0], [2.0, -4.0]]), np.array([0.0, -1.0])))
    layers.append(Layer(np.array([[0.5, -1.0]]), np.array([-abs(spec.r)])))
    layers.append(
        Layer(np.array([[spec.scale]]), np.array([spec.scale * max(0.0, spec.r)]))
    )
    return ReluNetwork(tuple(layers), input_dim=target.dim)


# --- wide-to-deep merging ---------------------------------------------------

SUBNET_CHANNELS = 3


def merge(subnets: Sequence[ReluNetwork], d: int, offset: float) -> ReluNetwork:
    """Stack scalar sub-networks into one width-(d+4) net computing their mean.

    The merged state carries d input pass-through channels, 3 sub-network
    channels, and one accumulator channel.  The accumulator starts at
    ``offset`` and collects ``F_i / m`` as each block finishes; ``offset`` is
    subtracted again in the output layer.  Exactness requires the domain to
    sit inside [0, 1]^d (so the pass-through survives ReLU) and ``offset`` to
    dominate every partial average (so the accumulator stays nonnegative).
    """
    subnets = list(subnets)
    if not subnets:
        raise ValueError("merge needs at least one sub-network")
    if not (math.isfinite(offset) and offset >= 0.0):
        raise ValueError("offset must be finite and nonnegative")
    m = len(subnets)
    for net in subnets:
        if net.input_dim != d:
            raise ValueError("all sub-networks must share the merge input dimension")
        if net.output_dim != 1:
            raise ValueError("merge expects scalar sub-networks")
        if net.hidden_depth < 1:
            raise ValueError("merge expects sub-networks with at least one hidden layer")
        if max(layer.out_dim for layer in net.layers[:-1]) > SUBNET_CHANNELS:
            raise ValueError(
                f"sub-network hidden width exceeds {SUBNET_CHANNELS} channels"
            )

    total = d + SUBNET_CHANNELS + 1
    acc = total - 1
    eye = np.eye(d)
    layers: list[Layer] = []
    prev_final: Layer | None = None
    prev_width = 0

    for i, net in enumerate(subnets):
        hidden = net.layers[:-1]
        for j, lay in enumerate(hidden):
            if j == 0:
                if i == 0:
                    w = np.zeros((total, d))
                    w[:d, :d] = eye
                    w[d : d + lay.out_dim, :] = lay.weight
                    b = np.zeros(total)
                    b[d : d + lay.out_dim] = lay.bias
                    b[acc] = offset
                else:
                    w = np.zeros((total, total))
                    w[:d, :d] = eye
                    w[d : d + lay.out_dim, :d] = lay.weight
                    w[acc, d : d + prev_width] = prev_final.weight[0] / m
                    w[acc, acc] = 1.0
                    b = np.zeros(total)
                    b[d : d + lay.out_dim] = lay.bias
                    b[acc] = prev_final.bias[0] / m
            else:
                w = np.zeros((total, total))
                w[:d, :d] = eye
                w[d : d + lay.out_dim, d : d + lay.in_dim] = lay.weight
                w[acc, acc] = 1.0
                b = np.zeros(total)
                b[d : d + lay.out_dim] = lay.bias
            layers.append(Layer(w, b))
        prev_final = net.layers[-1]
        prev_width = hidden[-1].out_dim

    w = np.zeros((1, total))
    w[0, d : d + prev_width] = prev_final.weight[0] / m
    w[0, acc] = 1.0
    b = np.array([prev_final.bias[0] / m - offset])
    layers.append(Layer(w, b))
    return ReluNetwork(tuple(layers), input_dim=d)


def precompose_affine(net: ReluNetwork, scale: float, offset) -> ReluNetwork:
    """Return the network ``x -> net(x / scale + offset)``."""
    if not (math.isfinite(scale) and scale != 0.0):
        raise ValueError("scale must be finite and nonzero")
    offset = np.asarray(offset, dtype=np.float64)
    if offset.shape != (net.input_dim,):
        raise ValueError("offset must match the network input dimension")
    first = net.layers[0]
    fused = Layer(first.weight / scale, first.weight @ offset + first.bias)
    return ReluNetwork((fused,) + net.layers[1:], net.input_dim)


# --- JSON interchange -------------------------------------------------------

def _reject_constant(name: str):
    raise ValueError(f"non-finite value {name!r} not allowed in network files")


def network_to_dict(net: ReluNetwork) -> dict:
    layers = []
    for idx, layer in enumerate(net.layers):
        layers.append(
            {
                "w": layer.weight.tolist(),
                "b": layer.bias.tolist(),
                "activation": "none" if idx == len(net.layers) - 1 else "relu",
            }
        )
    return {"input_dim": net.input_dim, "layers": layers}


def network_from_dict(data: dict) -> ReluNetwork:
    try:
        input_dim = int(data["input_dim"])
        raw_layers = list(data["layers"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed network document: {exc}") from exc
    if not raw_layers:
        raise ValueError("network document has no layers")
    layers = []
    for idx, entry in enumerate(raw_layers):
        expected = "none" if idx == len(raw_layers) - 1 else "relu"
        if entry.get("activation") != expected:
            raise ValueError(
                f"layer {idx} activation must be {expected!r}, got {entry.get('activation')!r}"
            )
        layers.append(Layer(np.asarray(entry["w"], dtype=np.float64), np.asarray(entry["b"], dtype=np.float64)))
    return ReluNetwork(tuple(layers), input_dim=input_dim)


def save_network(net: ReluNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(net), fh)
        fh.write("\n")


def load_network(path) -> ReluNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh, parse_constant=_reject_constant)
    return network_from_dict(data)
