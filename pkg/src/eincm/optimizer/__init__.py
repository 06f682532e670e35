from .bfgs import BfgsResult, SolverConfig, bfgs_maximize
from .multiscale import (HandoverConfig, LevelDiagnostics, MultiscaleResult, PyramidSpec,
                         handover, multiscale_estimate, solve_handover_weight)
from .resample import (bilinear_sample, downscale_lanczos3, upscale_bilinear_to_sensor,
                       upscale_repeat)

__all__ = [
    "BfgsResult", "SolverConfig", "bfgs_maximize",
    "HandoverConfig", "LevelDiagnostics", "MultiscaleResult", "PyramidSpec",
    "handover", "multiscale_estimate", "solve_handover_weight",
    "bilinear_sample", "downscale_lanczos3", "upscale_bilinear_to_sensor", "upscale_repeat",
]
