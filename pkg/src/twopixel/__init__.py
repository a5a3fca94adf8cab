"""Two-pixel polarimetric compressive imaging: optics, sensing and reconstruction."""

__version__ = "0.1.0"

from .imaging import PolarimetricSignal, SceneSpec, make_scene, osc_map, psnr
from .optics import ComplexRefractiveIndex, MirrorGeometry, MixingMatrix, condition_number
from .sensing import ImperfectionModel, MeasurementSet, SensingMatrix, scrambled_hadamard
from .solvers import SolverConfig, SolverResult, solve
from .transforms import SparseRepresentation

__all__ = [
    "ComplexRefractiveIndex", "ImperfectionModel", "MeasurementSet", "MirrorGeometry",
    "MixingMatrix", "PolarimetricSignal", "SceneSpec", "SensingMatrix", "SolverConfig",
    "SolverResult", "SparseRepresentation", "condition_number", "make_scene", "osc_map",
    "psnr", "scrambled_hadamard", "solve",
]
