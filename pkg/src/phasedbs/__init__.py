"""Fixed-point phase-locked closed-loop neuromodulation pipeline.

Front-end digitisation, decimating FIR with a quadrature band pair, a
lookup-table phase extractor, windowed connectivity features, trigger
engines and a stimulator/electrode model, plus offline drivers.
"""

from .config import RunConfig, load_config, parse_config
from .errors import ConfigError, DataError, DesignError
from .fir import BandConfig, FirPipeline, design_filters
from .phase import build_luts, cordic_phase, lpe_phase
from .pipeline import ClosedLoop, RunResult

__version__ = "0.1.0"

__all__ = [
    "BandConfig", "ClosedLoop", "ConfigError", "DataError", "DesignError", "FirPipeline",
    "RunConfig", "RunResult", "build_luts", "cordic_phase", "design_filters", "load_config",
    "lpe_phase", "parse_config",
]
