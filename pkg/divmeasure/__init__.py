"""Numerical toolkit for divergence-measure fields, normal traces and Cauchy fluxes."""
__version__ = "0.1.0"

from .config import Config, ExperimentConfig
from .errors import DivMeasureError
from .fields import DMField, make_analytic, make_piecewise, make_sampled
from .grid import GridSpec, MollifierKernel, mollify, rasterize
from .measures import ConvergenceTable, SignedMeasure
from .traces import TraceSchedule, exterior_trace, gauss_green_check, interior_trace
