"""Finite-difference verification of the analytic gradients.

Central differences with step 1e-5 are the independent oracle; the suite
reports the worst relative error over (a) diffusion time gradients for both
schemes, and (b) every parameter of a small two-block model.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .dataset import random_connected_graph
from .diffusion import (
    DiffusionLayer,
    Scheme,
    diffuse,
    diffusion_backward,
)
from .graph import structural_matrices
from .model import (
    GradientTape,
    Model,
    ModelConfig,
    mae_loss,
    model_backward,
    model_forward,
    precompute_cache,
)
from .spectral import decompose

FD_STEP = 1e-5


def finite_difference(f: Callable[[np.ndarray], float], x: np.ndarray,
                      step: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of a scalar function, one entry at a time."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.ravel()
    for i in range(x.size):
        bump = np.zeros_like(x)
        bump.ravel()[i] = step
        flat[i] = (f(x + bump) - f(x - bump)) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray,
                   floor: float = 1e-6) -> float:
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_diffusion_gradients(scheme: str, seed: int = 0, *,
                              node_count: int = 7,
                              channels: int = 3) -> dict[str, float]:
    """Worst relative error of the diffusion adjoints on a random graph.

    The probe loss is sum(W * h) for a fixed random W, so its gradient with
    respect to h is exactly W.
    """
    rng = np.random.default_rng(seed)
    graph = random_connected_graph(rng, node_count, feature_dim=channels)
    sm = structural_matrices(graph)
    sd = decompose(graph, graph.node_count)
    x = rng.standard_normal((node_count, channels))
    theta = rng.standard_normal(channels)
    upstream = rng.standard_normal((node_count, channels))
    layer = DiffusionLayer(scheme=Scheme(scheme), raw_times=theta,
                           bandwidth=sd.k)

    out = diffuse(layer, sm, x, sd)
    grad_x, grad_theta = diffusion_backward(layer, out, upstream)

    def loss_of_theta(th):
        probe = DiffusionLayer(scheme=Scheme(scheme), raw_times=th, bandwidth=sd.k)
        return float(np.sum(upstream * diffuse(probe, sm, x, sd).values))

    def loss_of_x(xv):
        return float(np.sum(upstream * diffuse(layer, sm, xv, sd).values))

    return {
        "theta": relative_error(grad_theta, finite_difference(loss_of_theta, theta)),
        "x": relative_error(grad_x, finite_difference(loss_of_x, x)),
    }


def small_model_setup(scheme: str, seed: int = 0):
    """Width-4 two-block model on a 5-node graph with every aggregator.

    Initializations whose readout ReLU starts dead (gradient blocked for
    every upstream parameter) are skipped deterministically, so the check
    exercises the whole parameter set.
    """
    config = ModelConfig(
        feature_dim=2,
        target_dim=1,
        hidden_width=4,
        num_blocks=2,
        scheme=scheme,
        bandwidth=5,
        aggregators=("mean", "max", "min", "b_av", "b_dx"),
        scaler_alphas=(-1, 0, 1),
        scale_directional=True,
    )
    for attempt in range(64):
        rng = np.random.default_rng(seed + attempt)
        graph = random_connected_graph(rng, 5, feature_dim=2)
        model = Model.init(config, seed=seed + attempt + 1)
        cache = precompute_cache(graph, config.bandwidth)
        target = rng.standard_normal(1)

        tape = GradientTape()
        tape.mae(model_forward(model, cache, tape), target)
        grads = model_backward(model, tape)
        if all(np.any(g != 0) for g in grads.values()):
            return model, cache, target
    raise RuntimeError("no live initialization found for the gradient check")


def check_model_gradients(scheme: str, seed: int = 0) -> float:
    """Worst relative error over every scalar parameter of the small model."""
    model, cache, target = small_model_setup(scheme, seed)
    params = model.parameters()

    tape = GradientTape()
    pred = model_forward(model, cache, tape)
    tape.mae(pred, target)
    analytic = model_backward(model, tape)

    def loss() -> float:
        value, _ = mae_loss(
            model_forward(model, cache, GradientTape()).value.ravel(), target
        )
        return value

    worst = 0.0
    for name, p in params.items():
        flat = p.ravel()
        fd = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + FD_STEP
            up = loss()
            flat[i] = orig - FD_STEP
            down = loss()
            flat[i] = orig
            fd[i] = (up - down) / (2.0 * FD_STEP)
        worst = max(worst, relative_error(analytic[name], fd))
    return worst


def run_all(seed: int = 0) -> dict[str, float]:
    """The full suite as reported by the check-grad command."""
    results = {}
    for scheme in ("implicit", "spectral"):
        diffusion = check_diffusion_gradients(scheme, seed)
        results[f"diffusion_{scheme}_theta"] = diffusion["theta"]
        results[f"diffusion_{scheme}_x"] = diffusion["x"]
        results[f"model_{scheme}"] = check_model_gradients(scheme, seed)
    return results
