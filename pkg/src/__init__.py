"""
gabor-sections - finite sections of Gabor systems
Riesz bounds, Gram matrices and spectral projections in Python
"""

from .errors import GaborSectionsError
from .windows import TFPoint, WindowSpec, gaussian_ambiguity
from .pointsets import LatticeSpec, PointSet, enumerate_lattice_in_ball
from .weights import WeightSpec
from .gram import GramSection, assemble_gram
from .spectrum import RieszBounds, GapReport, riesz_sweep, detect_gap, floor_gap
from .kernel_projection import ContourSpec, contour_projection, near_kernel_projection
from .analysis_report import SweepReport, fit_decay
from .config import RunConfig

__version__ = "0.1.0"
__all__ = [
    "GaborSectionsError",
    "TFPoint",
    "WindowSpec",
    "gaussian_ambiguity",
    "LatticeSpec",
    "PointSet",
    "enumerate_lattice_in_ball",
    "WeightSpec",
    "GramSection",
    "assemble_gram",
    "RieszBounds",
    "GapReport",
    "riesz_sweep",
    "detect_gap",
    "floor_gap",
    "ContourSpec",
    "contour_projection",
    "near_kernel_projection",
    "SweepReport",
    "fit_decay",
    "RunConfig",
]
