"""Stratified-space spines: adaptive cover trees, local dimension labels and
graph collapse for point clouds sampled near unions of manifolds."""

from .geometry import InputError, PointCloud
from .pipeline import PipelineConfig, PipelineResult, run
from .synth import SynthSpec, generate

__all__ = ["InputError", "PointCloud", "PipelineConfig", "PipelineResult", "run",
           "SynthSpec", "generate"]
__version__ = "0.1.0"
