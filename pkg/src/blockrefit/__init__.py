"""Block-sparse analysis regularization with support-preserving refitting."""

from .linops import AnalysisOperator, ConvergenceError, DenseMatrix, Identity, PeriodicConvolution
from .penalties import KINDS, AnchorBlock, Kind, parse_kind
from .problems import ProblemSpec, add_gaussian_noise, build_scene, make_problem, psnr
from .solvers import (
    DRParams,
    DivergenceError,
    PDParams,
    dr_joint_solve,
    ib_boost,
    pd_joint_solve,
    posterior_refit,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisOperator",
    "ConvergenceError",
    "DenseMatrix",
    "Identity",
    "PeriodicConvolution",
    "KINDS",
    "AnchorBlock",
    "Kind",
    "parse_kind",
    "ProblemSpec",
    "add_gaussian_noise",
    "build_scene",
    "make_problem",
    "psnr",
    "DRParams",
    "DivergenceError",
    "PDParams",
    "dr_joint_solve",
    "ib_boost",
    "pd_joint_solve",
    "posterior_refit",
]
