"""Orthogonal GRU with Cayley-parameterized recurrent weights."""

from ._core import (
    ConfigError,
    ContractError,
    NumericError,
    RangeError,
    ShapeError,
    SingularityError,
    SkewOrthogonal,
    adam_updates,
    cayley_transform,
    copying_baseline,
    exact_inverse,
    fro_dist_identity,
    generate_task,
    gradcheck,
    init_skew,
    make_scaling,
    matmul,
    memoryless_copying_loss,
    modrelu,
    normalize_config,
    parameter_count,
    spectral_norm,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
