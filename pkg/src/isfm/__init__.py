"""Spatial-frequency interactive image fusion on the CPU."""

from .net import IsfmConfig, ModalityPair, isfm_forward
from .weights import WeightArchive, init_weights, load_weights, save_weights

__all__ = [
    "IsfmConfig",
    "ModalityPair",
    "isfm_forward",
    "WeightArchive",
    "init_weights",
    "load_weights",
    "save_weights",
]
__version__ = "0.1.0"
