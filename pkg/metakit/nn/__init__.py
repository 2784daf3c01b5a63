"""Meta-modules, ParamSets and checkpoints."""

from metakit.nn.checkpoint import decode_params, encode_params, load_params, save_params
from metakit.nn.modules import (
    Activation,
    MetaActivation,
    MetaLinear,
    MetaModule,
    MetaSequential,
    build_mlp,
    mlp_from_params,
)
from metakit.nn.params import ParamSet, sgd_step

__all__ = [
    "Activation",
    "MetaActivation",
    "MetaLinear",
    "MetaModule",
    "MetaSequential",
    "ParamSet",
    "build_mlp",
    "decode_params",
    "encode_params",
    "load_params",
    "mlp_from_params",
    "save_params",
    "sgd_step",
]
