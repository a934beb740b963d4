"""flashsched: a discrete-event, microsecond-granular simulator of a
many-chip SSD comparing device-level I/O schedulers (vas, pas, spk1-3)."""

from .engine import Engine
from .flash import FlpClass
from .ftl import Ftl, GcConfig
from .geom import Geometry, PhysicalAddress, TimingParams
from .metrics import build_report
from .policies import make_policy
from .workload import SynthSpec, TraceRecord, generate, parse_trace

__version__ = "0.1.0"

__all__ = ["Engine", "FlpClass", "Ftl", "GcConfig", "Geometry",
           "PhysicalAddress", "TimingParams", "build_report", "make_policy",
           "SynthSpec", "TraceRecord", "generate", "parse_trace",
           "__version__"]
