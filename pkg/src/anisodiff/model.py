"""Trainable graph-regression model: diffusion blocks with a gradient tape.

One block applies the learnable diffusion layer, a ReLU, the configured
aggregators (neighbor mean/max/min and the directional b_av/b_dx filters,
optionally degree-scaled), concatenates everything with the diffused
features, runs a 2-layer MLP and adds a skip connection. Blocks are stacked
between a linear embedding and a pooled MLP readout.

All forward intermediates are recorded on a ``GradientTape``; ``backward``
replays the records in reverse and accumulates exact adjoints for every
parameter, including the per-channel diffusion times.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .anisotropic import AnisotropicOperators, build_operators
from .diffusion import (
    THETA_FOR_UNIT_TIME,
    DiffusionLayer,
    DiffusionOutput,
    Scheme,
    diffuse,
    diffusion_backward,
    softplus,
)
from .errors import (
    LengthMismatchError,
    NonFiniteActivationError,
    TapeConsumedError,
    WidthMismatchError,
)
from .graph import Graph, StructuralMatrices, structural_matrices
from .spectral import SpectralDecomposition, decompose

AGGREGATOR_NAMES = ("mean", "max", "min", "b_av", "b_dx")
NEIGHBOR_AGGREGATORS = ("mean", "max", "min")


# ---------------------------------------------------------------------------
# per-graph precomputation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GraphCache:
    """Structure-dependent quantities reused across layers and epochs."""

    graph: Graph
    sm: StructuralMatrices
    sd: SpectralDecomposition
    ops: AnisotropicOperators
    nbr_idx: np.ndarray    # (n, max_deg) neighbor indices, padded
    nbr_mask: np.ndarray   # (n, max_deg) validity of the padding
    mean_matrix: np.ndarray
    log_deg: np.ndarray


def precompute_cache(graph: Graph, bandwidth: int) -> GraphCache:
    """Spectral/anisotropic/neighbor caches for one graph.

    ``bandwidth`` is clamped to the node count; at least 2 eigenpairs are
    kept so the Fiedler vector exists.
    """
    n = graph.node_count
    k = max(2, min(int(bandwidth), n))
    sm = structural_matrices(graph)
    sd = decompose(graph, k)
    ops = build_operators(graph, sd.fiedler)

    nbrs = graph.neighbor_lists()
    max_deg = max(len(v) for v in nbrs)
    nbr_idx = np.zeros((n, max_deg), dtype=np.int64)
    nbr_mask = np.zeros((n, max_deg), dtype=bool)
    for i, v in enumerate(nbrs):
        nbr_idx[i, : len(v)] = v
        nbr_mask[i, : len(v)] = True

    deg = sm.degrees
    mean_matrix = sm.adjacency / deg[:, None]
    log_deg = np.log(deg + 1.0)
    for a in (nbr_idx, nbr_mask, mean_matrix, log_deg):
        a.setflags(write=False)
    return GraphCache(graph, sm, sd, ops, nbr_idx, nbr_mask, mean_matrix, log_deg)


# ---------------------------------------------------------------------------
# gradient tape
# ---------------------------------------------------------------------------

class Node:
    """One tensor tracked on the tape."""

    __slots__ = ("value", "grad")

    def __init__(self, value: np.ndarray):
        self.value = value
        self.grad: Optional[np.ndarray] = None


def _val(x):
    return x.value if isinstance(x, Node) else x


class GradientTape:
    """Reverse-mode tape over numpy arrays.

    Each recorded operation keeps its output node, its input nodes and a
    closure mapping the output adjoint to input adjoints. ``backward``
    traverses in exact reverse order; a tape can be consumed once.
    """

    def __init__(self):
        self._records: list[tuple[Node, tuple, Callable]] = []
        self._consumed = False
        self.params: dict[str, Node] = {}
        self.output: Optional[Node] = None

    # -- node creation ------------------------------------------------------

    def param(self, name: str, value: np.ndarray) -> Node:
        if name in self.params:
            raise WidthMismatchError(f"parameter {name!r} bound twice")
        node = Node(np.asarray(value, dtype=np.float64))
        self.params[name] = node
        return node

    def constant(self, value) -> Node:
        return Node(np.asarray(value, dtype=np.float64))

    def _record(self, out_value, inputs, backward) -> Node:
        out = Node(out_value)
        self._records.append((out, tuple(inputs), backward))
        return out

    # -- primitive operations -------------------------------------------------

    def matmul(self, a, b) -> Node:
        av, bv = _val(a), _val(b)
        def backward(g):
            return g @ bv.T, av.T @ g
        return self._record(av @ bv, (a, b), backward)

    def add(self, a, b) -> Node:
        def backward(g):
            return g, g
        return self._record(_val(a) + _val(b), (a, b), backward)

    def add_bias(self, a, bias) -> Node:
        def backward(g):
            return g, g.sum(axis=0)
        return self._record(_val(a) + _val(bias)[None, :], (a, bias), backward)

    def relu(self, a) -> Node:
        av = _val(a)
        mask = av > 0
        def backward(g):
            return (g * mask,)
        return self._record(np.where(mask, av, 0.0), (a,), backward)

    def concat_cols(self, parts: list) -> Node:
        widths = [_val(p).shape[1] for p in parts]
        splits = np.cumsum(widths)[:-1]
        def backward(g):
            return tuple(np.hsplit(g, splits))
        return self._record(np.hstack([_val(p) for p in parts]), parts, backward)

    def row_scale(self, a, scale: np.ndarray) -> Node:
        def backward(g):
            return (g * scale[:, None],)
        return self._record(_val(a) * scale[:, None], (a,), backward)

    def mul_mask(self, a, mask: np.ndarray) -> Node:
        def backward(g):
            return (g * mask,)
        return self._record(_val(a) * mask, (a,), backward)

    def pool(self, a, mode: str) -> Node:
        av = _val(a)
        n = av.shape[0]
        if mode == "sum":
            out = av.sum(axis=0, keepdims=True)
            def backward(g):
                return (np.repeat(g, n, axis=0),)
        elif mode == "mean":
            out = av.mean(axis=0, keepdims=True)
            def backward(g):
                return (np.repeat(g / n, n, axis=0),)
        else:
            raise ValueError(f"unknown pooling mode {mode!r}")
        return self._record(out, (a,), backward)

    def neighbor_reduce(self, a, nbr_idx, nbr_mask, mode: str) -> Node:
        """Per-node mean/max/min over padded neighbor indices."""
        av = _val(a)
        n, w = av.shape
        if mode == "mean":
            raise ValueError("mean aggregation goes through matmul")
        gathered = av[nbr_idx]  # (n, max_deg, w)
        fill = -np.inf if mode == "max" else np.inf
        masked = np.where(nbr_mask[:, :, None], gathered, fill)
        arg = masked.argmax(axis=1) if mode == "max" else masked.argmin(axis=1)
        out = np.take_along_axis(masked, arg[:, None, :], axis=1)[:, 0, :]
        contrib = np.take_along_axis(nbr_idx, arg, axis=1)  # (n, w)
        cols = np.broadcast_to(np.arange(w), (n, w))
        def backward(g):
            ga = np.zeros_like(av)
            np.add.at(ga, (contrib, cols), g)
            return (ga,)
        return self._record(out, (a,), backward)

    def diffusion(self, layer: DiffusionLayer, cache: GraphCache,
                  h, theta) -> Node:
        live = replace(layer, raw_times=_val(theta))
        out: DiffusionOutput = diffuse(live, cache.sm, _val(h), cache.sd)
        def backward(g):
            return diffusion_backward(live, out, g)
        return self._record(out.values, (h, theta), backward)

    def mae(self, pred, target) -> Node:
        pv = _val(pred)
        value, grad = mae_loss(pv.ravel(), target)
        def backward(g):
            return (float(g) * grad.reshape(pv.shape),)
        node = self._record(np.float64(value), (pred,), backward)
        self.output = node
        return node

    # -- replay ------------------------------------------------------------

    def backward(self, seed=1.0) -> None:
        if self._consumed:
            raise TapeConsumedError("tape backward() called twice")
        self._consumed = True
        if self.output is None:
            raise TapeConsumedError("no output recorded; run a forward pass first")
        self.output.grad = np.asarray(seed, dtype=np.float64)
        for out, inputs, backward in reversed(self._records):
            if out.grad is None:
                continue
            grads = backward(out.grad)
            for node, g in zip(inputs, grads):
                if g is None or not isinstance(node, Node):
                    continue
                node.grad = g if node.grad is None else node.grad + g


def mae_loss(pred, target) -> tuple[float, np.ndarray]:
    """Mean absolute error and its subgradient (0 at exact ties)."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    if pred.shape != target.shape:
        raise LengthMismatchError(
            f"prediction length {pred.shape[0]} != target length {target.shape[0]}"
        )
    diff = pred - target
    return float(np.mean(np.abs(diff))), np.sign(diff) / diff.size


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

@dataclass
class ModelConfig:
    feature_dim: int
    target_dim: int = 1
    hidden_width: int = 16
    num_blocks: int = 2
    scheme: str = "spectral"
    bandwidth: int = 20
    aggregators: tuple[str, ...] = ("mean", "b_av", "b_dx")
    scaler_alphas: tuple[int, ...] = (0,)
    scale_directional: bool = True
    readout: str = "sum"
    dropout: float = 0.0
    delta: float = float(np.log(2.0))

    def __post_init__(self):
        self.aggregators = tuple(self.aggregators)
        self.scaler_alphas = tuple(int(a) for a in self.scaler_alphas)
        for a in self.aggregators:
            if a not in AGGREGATOR_NAMES:
                raise ValueError(f"unknown aggregator {a!r}")
        if self.scheme not in ("implicit", "spectral"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.readout not in ("sum", "mean"):
            raise ValueError(f"unknown readout {self.readout!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def _scaler_count(self, aggregator: str) -> int:
        if aggregator in NEIGHBOR_AGGREGATORS or self.scale_directional:
            return len(self.scaler_alphas)
        return 1

    @property
    def concat_width(self) -> int:
        per_agg = sum(self._scaler_count(a) for a in self.aggregators)
        return self.hidden_width * (1 + per_agg)


@dataclass
class BlockParams:
    """Per-block parameters: diffusion times and the mixing MLP."""

    theta: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray


@dataclass
class Model:
    config: ModelConfig
    embed_w: np.ndarray
    embed_b: np.ndarray
    blocks: list[BlockParams]
    readout_w1: np.ndarray
    readout_b1: np.ndarray
    readout_w2: np.ndarray
    readout_b2: np.ndarray

    @classmethod
    def init(cls, config: ModelConfig, seed: int) -> "Model":
        """Seeded initialization: weights uniform in +-1/sqrt(fan_in),
        diffusion times starting at softplus(theta) = 1."""
        rng = np.random.default_rng(seed)

        def uniform(fan_in, shape):
            bound = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=shape)

        w = config.hidden_width
        cw = config.concat_width
        blocks = []
        for _ in range(config.num_blocks):
            blocks.append(BlockParams(
                theta=np.full(w, THETA_FOR_UNIT_TIME),
                w1=uniform(cw, (cw, w)),
                b1=uniform(cw, (w,)),
                w2=uniform(w, (w, w)),
                b2=uniform(w, (w,)),
            ))
        return cls(
            config=config,
            embed_w=uniform(config.feature_dim, (config.feature_dim, w)),
            embed_b=uniform(config.feature_dim, (w,)),
            blocks=blocks,
            readout_w1=uniform(w, (w, w)),
            readout_b1=uniform(w, (w,)),
            readout_w2=uniform(w, (w, config.target_dim)),
            readout_b2=uniform(w, (config.target_dim,)),
        )

    def parameters(self) -> dict[str, np.ndarray]:
        """Flat name -> array view of every trainable tensor."""
        out = {
            "embed.w": self.embed_w,
            "embed.b": self.embed_b,
            "readout.w1": self.readout_w1,
            "readout.b1": self.readout_b1,
            "readout.w2": self.readout_w2,
            "readout.b2": self.readout_b2,
        }
        for i, blk in enumerate(self.blocks):
            out[f"blocks.{i}.theta"] = blk.theta
            out[f"blocks.{i}.w1"] = blk.w1
            out[f"blocks.{i}.b1"] = blk.b1
            out[f"blocks.{i}.w2"] = blk.w2
            out[f"blocks.{i}.b2"] = blk.b2
        return out

    def learned_times(self) -> list[np.ndarray]:
        """Effective per-channel diffusion times, one vector per block."""
        return [softplus(blk.theta) for blk in self.blocks]


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------

def _check_finite(name: str, value: np.ndarray) -> None:
    if not np.isfinite(value).all():
        raise NonFiniteActivationError(f"non-finite activation after {name}")


def block_forward(params: BlockParams, config: ModelConfig, cache: GraphCache,
                  h_in: Node, tape: GradientTape, *, name: str = "block",
                  dropout_mask: Optional[np.ndarray] = None) -> Node:
    """One block: diffuse, ReLU, aggregate, concat, MLP, skip connection."""
    w = config.hidden_width
    if h_in.value.shape[1] != w:
        raise WidthMismatchError(
            f"{name}: input width {h_in.value.shape[1]} != hidden width {w}"
        )
    if params.w1.shape != (config.concat_width, w):
        raise WidthMismatchError(
            f"{name}: w1 shape {params.w1.shape} != ({config.concat_width}, {w})"
        )

    theta = tape.param(f"{name}.theta", params.theta)
    layer = DiffusionLayer(
        scheme=Scheme(config.scheme), raw_times=params.theta,
        bandwidth=cache.sd.k,
    )
    h_diff = tape.diffusion(layer, cache, h_in, theta)
    _check_finite(f"{name}.diffusion", h_diff.value)
    act = tape.relu(h_diff)

    parts: list[Node] = [h_diff]
    for agg in config.aggregators:
        if agg == "mean":
            base = tape.matmul(cache.mean_matrix, act)
        elif agg in ("max", "min"):
            base = tape.neighbor_reduce(act, cache.nbr_idx, cache.nbr_mask, agg)
        elif agg == "b_av":
            base = tape.matmul(cache.ops.b_av, act)
        else:
            base = tape.matmul(cache.ops.b_dx, act)

        if agg in NEIGHBOR_AGGREGATORS or config.scale_directional:
            for alpha in config.scaler_alphas:
                if alpha == 0:
                    parts.append(base)
                else:
                    scale = (cache.log_deg / config.delta) ** alpha
                    parts.append(tape.row_scale(base, scale))
        else:
            parts.append(base)

    cat = tape.concat_cols(parts)
    z = tape.relu(tape.add_bias(tape.matmul(cat, tape.param(f"{name}.w1", params.w1)),
                                tape.param(f"{name}.b1", params.b1)))
    if dropout_mask is not None:
        z = tape.mul_mask(z, dropout_mask)
    mlp = tape.add_bias(tape.matmul(z, tape.param(f"{name}.w2", params.w2)),
                        tape.param(f"{name}.b2", params.b2))
    out = tape.add(mlp, h_in)
    _check_finite(f"{name}.out", out.value)
    return out


def model_forward(model: Model, cache: GraphCache, tape: GradientTape, *,
                  rng: Optional[np.random.Generator] = None,
                  train: bool = False) -> Node:
    """Embedding, block stack, pooled MLP readout. Returns the prediction node."""
    cfg = model.config
    feats = cache.graph.node_features
    if feats.shape[1] != cfg.feature_dim:
        raise WidthMismatchError(
            f"graph features have dim {feats.shape[1]}, model expects "
            f"{cfg.feature_dim}"
        )

    x = tape.constant(feats)
    h = tape.add_bias(tape.matmul(x, tape.param("embed.w", model.embed_w)),
                      tape.param("embed.b", model.embed_b))
    for i, blk in enumerate(model.blocks):
        mask = None
        if train and cfg.dropout > 0.0:
            if rng is None:
                raise ValueError("dropout during training requires an rng")
            keep = 1.0 - cfg.dropout
            mask = (rng.random(h.value.shape) < keep) / keep
        h = block_forward(blk, cfg, cache, h, tape, name=f"blocks.{i}",
                          dropout_mask=mask)

    pooled = tape.pool(h, cfg.readout)
    z = tape.relu(tape.add_bias(
        tape.matmul(pooled, tape.param("readout.w1", model.readout_w1)),
        tape.param("readout.b1", model.readout_b1)))
    pred = tape.add_bias(
        tape.matmul(z, tape.param("readout.w2", model.readout_w2)),
        tape.param("readout.b2", model.readout_b2))
    _check_finite("readout", pred.value)
    return pred


def model_backward(model: Model, tape: GradientTape,
                   loss_grad: float = 1.0) -> dict[str, np.ndarray]:
    """Adjoint for every parameter; zeros where the loss does not depend on it."""
    tape.backward(loss_grad)
    grads = {}
    for name, value in model.parameters().items():
        node = tape.params.get(name)
        if node is None or node.grad is None:
            grads[name] = np.zeros_like(value)
        else:
            grads[name] = np.asarray(node.grad, dtype=np.float64)
    return grads


def predict(model: Model, cache: GraphCache) -> np.ndarray:
    """Forward pass without gradient bookkeeping kept around."""
    tape = GradientTape()
    return model_forward(model, cache, tape).value.ravel()


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    step: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def init(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            step=0,
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, *, lr: float, weight_decay: float = 0.0,
              betas: tuple[float, float] = (0.9, 0.999),
              eps: float = 1e-8) -> AdamState:
    """In-place Adam update with decoupled weight decay."""
    b1, b2 = betas
    state.step += 1
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = grads[name]
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
        if weight_decay:
            p -= lr * weight_decay * p
    return state
