"""Channel-wise learnable heat diffusion on a graph.

Each feature channel c is diffused for its own time t_c > 0 by one of two
schemes:

  implicit   h = (D + t L)^{-1} D x        (one backward-Euler step)
  spectral   h = Phi_k exp(-t Lam_k) Phi_k^T D x   (truncated eigenexpansion)

Times are reparametrized as t = softplus(theta) so they stay positive while
theta moves freely under gradient descent. Both schemes come with exact
analytic gradients with respect to the input features and theta.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    GraphMismatchError,
    NonFiniteInputError,
    NotPositiveDefiniteError,
    SolverFailureError,
    StateMismatchError,
)
from .graph import StructuralMatrices
from .linalg import spd_apply, spd_factor
from .spectral import SpectralDecomposition

#: raw parameter value giving softplus(theta) = 1 exactly
THETA_FOR_UNIT_TIME = float(np.log(np.e - 1.0))


class Scheme(enum.Enum):
    IMPLICIT = "implicit"
    SPECTRAL = "spectral"


def softplus(x):
    return np.logaddexp(0.0, x)


def sigmoid(x):
    # tanh form is overflow-safe on both tails
    return 0.5 * (np.tanh(0.5 * np.asarray(x, dtype=np.float64)) + 1.0)


@dataclass
class DiffusionLayer:
    """Per-channel diffusion parameters: scheme, raw times theta, bandwidth."""

    scheme: Scheme
    raw_times: np.ndarray
    bandwidth: Optional[int] = None

    def __post_init__(self):
        self.raw_times = np.asarray(self.raw_times, dtype=np.float64)
        if self.raw_times.ndim != 1:
            raise StateMismatchError("raw_times must be a 1-D per-channel vector")

    @property
    def times(self) -> np.ndarray:
        """Effective diffusion times softplus(theta), strictly positive."""
        return softplus(self.raw_times)


@dataclass
class DiffusionOutput:
    """Diffused features plus the intermediates the backward pass needs."""

    values: np.ndarray
    saved_state: "_SavedState"


@dataclass
class _SavedState:
    scheme: Scheme
    times: np.ndarray
    x: np.ndarray
    sm: StructuralMatrices
    # implicit: Cholesky factor per distinct time, keyed by time value
    factors: dict = field(default_factory=dict)
    # spectral: decomposition and per-channel expansion coefficients Phi^T D x
    sd: Optional[SpectralDecomposition] = None
    coeffs: Optional[np.ndarray] = None


def _as_feature_matrix(x, n: int, op: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x.reshape(-1, 1)
    if x.ndim != 2 or x.shape[0] != n:
        raise GraphMismatchError(f"{op}: features must have {n} rows, got {x.shape}")
    if not np.isfinite(x).all():
        raise NonFiniteInputError(f"{op}: features contain NaN/Inf")
    return x


def _as_times(times, channels: int, op: str) -> np.ndarray:
    t = np.asarray(times, dtype=np.float64)
    if t.ndim == 0:
        t = np.full(channels, float(t))
    if t.shape != (channels,):
        raise StateMismatchError(
            f"{op}: expected {channels} per-channel times, got shape {t.shape}"
        )
    if not np.isfinite(t).all():
        raise NonFiniteInputError(f"{op}: times contain NaN/Inf")
    if (t < 0).any():
        raise ValueError(f"{op}: times must be nonnegative")
    return t


def diffuse_implicit(sm: StructuralMatrices, x, times) -> DiffusionOutput:
    """One implicit Euler step per channel: solve (D + t_c L) h_c = D x_c.

    t = 0 short-circuits to the exact identity. Channels sharing a time
    share one Cholesky factorization.
    """
    n = sm.node_count
    x = _as_feature_matrix(x, n, "diffuse_implicit")
    t = _as_times(times, x.shape[1], "diffuse_implicit")

    dx = sm.degree @ x
    h = np.empty_like(x)
    state = _SavedState(scheme=Scheme.IMPLICIT, times=t, x=x, sm=sm)
    for tv in np.unique(t):
        cols = np.flatnonzero(t == tv)
        if tv == 0.0:
            h[:, cols] = x[:, cols]
            continue
        try:
            factor = spd_factor(sm.degree + tv * sm.laplacian)
        except NotPositiveDefiniteError as exc:  # unreachable for t > 0
            raise SolverFailureError(str(exc)) from exc
        state.factors[float(tv)] = factor
        h[:, cols] = spd_apply(factor, dx[:, cols])
    return DiffusionOutput(values=h, saved_state=state)


def diffuse_spectral(
    sd: SpectralDecomposition, sm: StructuralMatrices, x, times
) -> DiffusionOutput:
    """Truncated heat-operator expansion per channel.

    h_c = Phi_k diag(exp(-t_c lambda_i)) Phi_k^T D x_c. At k = n this is the
    exact solution exp(-t D^{-1} L) x_c.
    """
    n = sm.node_count
    if sd.node_count != n:
        raise GraphMismatchError(
            f"decomposition is over {sd.node_count} nodes, matrices over {n}"
        )
    x = _as_feature_matrix(x, n, "diffuse_spectral")
    t = _as_times(times, x.shape[1], "diffuse_spectral")

    coeffs = sd.eigenvectors.T @ (sm.degree @ x)  # (k, d)
    decay = np.exp(-np.outer(sd.eigenvalues, t))  # (k, d)
    h = sd.eigenvectors @ (decay * coeffs)
    state = _SavedState(
        scheme=Scheme.SPECTRAL, times=t, x=x, sm=sm, sd=sd, coeffs=coeffs
    )
    return DiffusionOutput(values=h, saved_state=state)


def diffuse(layer: DiffusionLayer, sm: StructuralMatrices, x,
            sd: Optional[SpectralDecomposition] = None) -> DiffusionOutput:
    """Apply a DiffusionLayer's scheme with its softplus-mapped times."""
    if layer.scheme is Scheme.IMPLICIT:
        return diffuse_implicit(sm, x, layer.times)
    if sd is None:
        raise StateMismatchError("spectral scheme requires a SpectralDecomposition")
    return diffuse_spectral(sd, sm, x, layer.times)


def time_gradients(out: DiffusionOutput, upstream) -> tuple[np.ndarray, np.ndarray]:
    """Adjoints of a diffusion forward pass.

    Returns ``(grad_x, grad_times)`` where ``grad_times`` is with respect to
    the effective per-channel times used by the forward call.

    implicit:  grad_x_c = D (D + t_c L)^{-1} g_c
               grad_t_c = -g_c^T (D + t_c L)^{-1} L h_c
    spectral:  grad_x_c = D Phi exp(-t_c Lam) Phi^T g_c
               grad_t_c = -(Phi^T g_c)^T Lam exp(-t_c Lam) (Phi^T D x_c)
    """
    state = out.saved_state
    g = np.asarray(upstream, dtype=np.float64)
    squeeze = g.ndim == 1
    if squeeze:
        g = g.reshape(-1, 1)
    if g.shape != out.values.shape:
        raise StateMismatchError(
            f"upstream shape {g.shape} does not match forward output "
            f"{out.values.shape}"
        )
    if not np.isfinite(g).all():
        raise NonFiniteInputError("upstream gradient contains NaN/Inf")

    t = state.times
    if state.scheme is Scheme.IMPLICIT:
        grad_x = np.empty_like(g)
        grad_t = np.empty_like(t)
        lh = state.sm.laplacian @ out.values
        for tv in np.unique(t):
            cols = np.flatnonzero(t == tv)
            if tv == 0.0:
                grad_x[:, cols] = g[:, cols]
                # d/dt at the identity short-circuit: -g^T D^{-1} L h
                dinv = 1.0 / state.sm.degrees
                grad_t[cols] = -np.einsum(
                    "ic,ic->c", g[:, cols], dinv[:, None] * lh[:, cols]
                )
                continue
            factor = state.factors[float(tv)]
            grad_x[:, cols] = state.sm.degree @ spd_apply(factor, g[:, cols])
            grad_t[cols] = -np.einsum(
                "ic,ic->c", g[:, cols], spd_apply(factor, lh[:, cols])
            )
    else:
        phi, lam = state.sd.eigenvectors, state.sd.eigenvalues
        decay = np.exp(-np.outer(lam, t))  # (k, d)
        pg = phi.T @ g  # (k, d)
        grad_x = state.sm.degree @ (phi @ (decay * pg))
        grad_t = -np.einsum("kc,k,kc->c", pg, lam, decay * state.coeffs)

    if squeeze:
        grad_x = grad_x[:, 0]
    return grad_x, grad_t


def diffusion_backward(
    layer: DiffusionLayer, out: DiffusionOutput, upstream
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients w.r.t. input features and the raw (pre-softplus) times."""
    if layer.scheme is not out.saved_state.scheme:
        raise StateMismatchError(
            f"layer scheme {layer.scheme} does not match saved state "
            f"{out.saved_state.scheme}"
        )
    if layer.raw_times.shape[0] != out.saved_state.times.shape[0]:
        raise StateMismatchError("layer channel count differs from saved state")
    grad_x, grad_t = time_gradients(out, upstream)
    return grad_x, grad_t * sigmoid(layer.raw_times)
