"""Latent-space Bayesian optimisation of three-phase electrode microstructures.

Label volumes are ``numpy.uint8`` arrays of shape ``(nz, ny, nx)`` holding
0 (pore), 1 (NMC) or 2 (CBD).
"""

from ._microforge import (
    DEFAULT_VOXEL_SIZE_UM,
    LATENT_LOWER,
    LATENT_UPPER,
    GPModel,
    alpha_schedule,
    derive_seed,
    evaluate,
    generate,
    latent_size,
    latin_hypercube,
    relative_diffusivity,
    run_cli,
    ssa_nmc,
    volume_fractions,
)

__all__ = [
    "DEFAULT_VOXEL_SIZE_UM",
    "LATENT_LOWER",
    "LATENT_UPPER",
    "GPModel",
    "alpha_schedule",
    "derive_seed",
    "evaluate",
    "generate",
    "latent_size",
    "latin_hypercube",
    "relative_diffusivity",
    "run_cli",
    "ssa_nmc",
    "volume_fractions",
]

__version__ = "0.1.0"
