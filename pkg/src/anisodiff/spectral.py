"""Generalized eigenbasis of the graph Laplacian and the Fiedler vector.

Solves L phi = lambda D phi by the symmetric reduction: eigendecompose
D^{-1/2} L D^{-1/2} and map eigenvectors back through D^{-1/2}, which
yields a D-orthonormal basis. D is invertible because graph construction
rejects isolated nodes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BandwidthOutOfRangeError, DisconnectedGraphError
from .graph import Graph, connected_components, structural_matrices
from .linalg import fix_column_signs, sym_eig


@dataclass(frozen=True)
class SpectralDecomposition:
    """First k generalized eigenpairs of (L, D), eigenvalues ascending.

    Eigenvectors are D-orthonormal columns, each sign-fixed (largest-magnitude
    entry positive). ``fiedler`` exposes the first non-constant eigenvector
    and requires k >= 2.
    """

    k: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def node_count(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def fiedler(self) -> np.ndarray:
        if self.k < 2:
            raise BandwidthOutOfRangeError(
                f"Fiedler vector needs bandwidth >= 2, decomposition has k={self.k}"
            )
        return self.eigenvectors[:, 1]


def decompose(g: Graph, k: int) -> SpectralDecomposition:
    """Leading k eigenpairs of the generalized problem L phi = lambda D phi."""
    n = g.node_count
    if not 1 <= k <= n:
        raise BandwidthOutOfRangeError(f"bandwidth k={k} outside [1, {n}]")
    if len(connected_components(g)) > 1:
        raise DisconnectedGraphError(
            "spectral decomposition requires a connected graph"
        )

    sm = structural_matrices(g)
    inv_sqrt_d = 1.0 / np.sqrt(sm.degrees)
    lsym = inv_sqrt_d[:, None] * sm.laplacian * inv_sqrt_d[None, :]
    lsym = 0.5 * (lsym + lsym.T)  # kill last-ulp asymmetry from the scaling

    eig = sym_eig(lsym)
    phi = fix_column_signs(inv_sqrt_d[:, None] * eig.eigenvectors[:, :k])
    lam = eig.eigenvalues[:k].copy()
    lam.setflags(write=False)
    phi.setflags(write=False)
    return SpectralDecomposition(k=int(k), eigenvalues=lam, eigenvectors=phi)


def fiedler_vector(g: Graph) -> np.ndarray:
    """Sign-fixed first non-constant generalized eigenvector of (L, D)."""
    return decompose(g, 2).fiedler
