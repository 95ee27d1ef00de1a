"""Conformer ASR with fusion of cached self-supervised speech features."""
from .fusion import FusionMode
from .kernels import BACKEND
from .model import ASRModel, ModelConfig, param_count

__version__ = "0.1.0"

__all__ = ["ASRModel", "BACKEND", "FusionMode", "ModelConfig", "param_count", "__version__"]
