"""MAP smoothing on chain-structured LiDAR-inertial factor graphs."""

from .eliminate import PARALLEL, SERIAL, ChainBayesNet, eliminate, solve_linearized
from .errors import (ChainViolationError, CovarianceError, DivergenceError, FormatError,
                     InvalidArgumentError, LayoutError, LioGraphError, SingularSystemError,
                     UnderConstrainedError)
from .factors import (FULL, LAYOUTS, LINEAR, POSE, BetweenFactor, GpsFactor, MotionFactor,
                      PriorFactor, StateLayout)
from .graph import ChainFactorGraph, assemble, toy_example
from .metrics import rpe
from .solver import SolveConfig, SolveReport, gauss_newton

__version__ = "0.1.0"
