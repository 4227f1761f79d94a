"""Learnable heat diffusion on graphs with anisotropic aggregation filters."""

from .anisotropic import (
    AnisotropicOperators,
    apply_directional,
    build_operators,
    degree_scalers,
    neighbor_aggregators,
)
from .diffusion import (
    DiffusionLayer,
    DiffusionOutput,
    Scheme,
    diffuse,
    diffuse_implicit,
    diffuse_spectral,
    diffusion_backward,
)
from .graph import (
    Graph,
    StructuralMatrices,
    build_graph,
    connected_components,
    structural_matrices,
)
from .linalg import EigenDecomposition, expm_oracle, spd_solve, sym_eig
from .model import (
    AdamState,
    BlockParams,
    GradientTape,
    GraphCache,
    Model,
    ModelConfig,
    adam_step,
    block_forward,
    mae_loss,
    model_backward,
    model_forward,
    precompute_cache,
    predict,
)
from .spectral import SpectralDecomposition, decompose, fiedler_vector

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "AnisotropicOperators",
    "BlockParams",
    "DiffusionLayer",
    "DiffusionOutput",
    "EigenDecomposition",
    "GradientTape",
    "Graph",
    "GraphCache",
    "Model",
    "ModelConfig",
    "Scheme",
    "SpectralDecomposition",
    "StructuralMatrices",
    "adam_step",
    "apply_directional",
    "block_forward",
    "build_graph",
    "build_operators",
    "connected_components",
    "decompose",
    "degree_scalers",
    "diffuse",
    "diffuse_implicit",
    "diffuse_spectral",
    "diffusion_backward",
    "expm_oracle",
    "fiedler_vector",
    "mae_loss",
    "model_backward",
    "model_forward",
    "neighbor_aggregators",
    "precompute_cache",
    "predict",
    "spd_solve",
    "structural_matrices",
    "sym_eig",
]
