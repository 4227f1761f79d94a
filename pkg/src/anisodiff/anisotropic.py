"""Directional aggregation operators derived from the Fiedler vector.

The edge field F = A * (phi_i - phi_j) orients every edge along the gradient
of the Fiedler vector. Row-normalizing F by its L1 norms gives Fhat, from
which two aggregation matrices follow:

  b_av = |Fhat|                          directional smoothing
  b_dx = Fhat - diag(row sums of Fhat)   directional derivative

b_av rows are convex weights (sum 1 wherever the field is nonzero) and b_dx
annihilates constant signals by construction. The module also provides the
plain mean/max/min neighbor aggregators and degree scalers used alongside
the directional filters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NonPositiveDeltaError
from .graph import Graph


@dataclass(frozen=True)
class AnisotropicOperators:
    """Field matrices for one graph: F, row-normalized Fhat, b_av, b_dx."""

    field: np.ndarray
    field_normalized: np.ndarray
    b_av: np.ndarray
    b_dx: np.ndarray

    @property
    def node_count(self) -> int:
        return self.field.shape[0]


def build_operators(g: Graph, phi) -> AnisotropicOperators:
    """Aggregation matrices from a (sign-fixed) Fiedler vector.

    Rows whose field is identically zero (phi constant across a node's
    neighborhood) stay zero: they contribute no smoothing and no derivative,
    which is the only normalization keeping b_dx @ 1 = 0.
    """
    phi = np.asarray(phi, dtype=np.float64)
    n = g.node_count
    if phi.shape != (n,):
        raise DimensionMismatchError(
            f"Fiedler vector has shape {phi.shape}, graph has {n} nodes"
        )

    field = np.zeros((n, n))
    for i, j in g.edges:
        field[i, j] = phi[i] - phi[j]
        field[j, i] = phi[j] - phi[i]

    row_norms = np.abs(field).sum(axis=1)
    scale = np.divide(1.0, row_norms, out=np.zeros(n), where=row_norms > 0)
    fhat = field * scale[:, None]

    b_av = np.abs(fhat)
    b_dx = fhat - np.diag(fhat.sum(axis=1))
    for a in (field, fhat, b_av, b_dx):
        a.setflags(write=False)
    return AnisotropicOperators(
        field=field, field_normalized=fhat, b_av=b_av, b_dx=b_dx
    )


def apply_directional(ops: AnisotropicOperators, h) -> tuple[np.ndarray, np.ndarray]:
    """(b_av @ h, b_dx @ h) for node features h."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape[0] != ops.node_count:
        raise DimensionMismatchError(
            f"features have {h.shape[0]} rows, operators expect {ops.node_count}"
        )
    return ops.b_av @ h, ops.b_dx @ h


def neighbor_aggregators(g: Graph, h) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Entrywise mean, max and min over each node's neighbors."""
    h = np.asarray(h, dtype=np.float64)
    squeeze = h.ndim == 1
    if squeeze:
        h = h.reshape(-1, 1)
    if h.shape[0] != g.node_count:
        raise DimensionMismatchError(
            f"features have {h.shape[0]} rows, graph has {g.node_count} nodes"
        )
    mean = np.empty_like(h)
    hi = np.empty_like(h)
    lo = np.empty_like(h)
    for i, nbrs in enumerate(g.neighbor_lists()):
        block = h[nbrs]
        mean[i] = block.mean(axis=0)
        hi[i] = block.max(axis=0)
        lo[i] = block.min(axis=0)
    if squeeze:
        mean, hi, lo = mean[:, 0], hi[:, 0], lo[:, 0]
    return mean, hi, lo


def degree_scalers(g: Graph, h, delta: float, alphas) -> dict[int, np.ndarray]:
    """Degree scaling: row i of h times (log(deg_i + 1) / delta)^alpha.

    alpha = +1 amplifies high-degree nodes, -1 attenuates them, 0 is the
    identity. ``delta`` is a dataset statistic (average log(deg + 1) over
    the training set) supplied by the caller; this module never sees the
    dataset.
    """
    if not delta > 0:
        raise NonPositiveDeltaError(f"delta must be positive, got {delta}")
    h = np.asarray(h, dtype=np.float64)
    if h.shape[0] != g.node_count:
        raise DimensionMismatchError(
            f"features have {h.shape[0]} rows, graph has {g.node_count} nodes"
        )
    log_deg = np.log(g.degrees().astype(np.float64) + 1.0)
    out = {}
    for alpha in alphas:
        if alpha not in (-1, 0, 1):
            raise ValueError(f"scaler exponent must be in {{-1, 0, 1}}, got {alpha}")
        scale = (log_deg / delta) ** alpha
        scaled = h * scale[:, None] if h.ndim == 2 else h * scale
        out[int(alpha)] = scaled
    return out
