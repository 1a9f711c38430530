"""fndiff: diffusion models whose samples are functions with continuous domains.

Trains a latent-set denoiser on discretized function observations (context
coordinate/value pairs), samples new functions with a deterministic
coarse-to-fine update over a fixed context set, and evaluates generated
signed-distance and deformation fields with Monte-Carlo function metrics and
PDE residuals.

Hot kernels run through a compiled extension when built, with a pure-numpy
fallback selected at import; see :func:`backend_name`.
"""

from ._backend import backend_name
from .adcore import Tape, Tensor, backward
from .dataset import ContextSet, FunctionSample, QuerySet
from .denoiser import DenoiserParams, ModelConfig, init_params, load_checkpoint, save_checkpoint
from .diffusion import (
    GeneratedFunction,
    NetDenoiser,
    OracleDenoiser,
    TrainConfig,
    Trainer,
    ddim_step,
    forward_noise,
    sample,
)
from .noise_field import DomainSpec, GridNoiseField, sample_noise_field
from .schedule import NoiseSchedule, TimestepGrid, timestep_grid

__version__ = "0.1.0"

__all__ = [
    "backend_name",
    "Tape", "Tensor", "backward",
    "ContextSet", "FunctionSample", "QuerySet",
    "DenoiserParams", "ModelConfig", "init_params", "load_checkpoint", "save_checkpoint",
    "GeneratedFunction", "NetDenoiser", "OracleDenoiser",
    "TrainConfig", "Trainer", "ddim_step", "forward_noise", "sample",
    "DomainSpec", "GridNoiseField", "sample_noise_field",
    "NoiseSchedule", "TimestepGrid", "timestep_grid",
    "__version__",
]
