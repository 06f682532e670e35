"""Edge-informed contrast maximization for dense optical flow from events."""
from .config import PRESETS, RunConfig, get_preset
from .data import Sample, load_events_text, read_flow, write_events_text, write_flow
from .events import EventSet, FlowField, IweConfig, SensorGeometry, build_iue, build_iwe, warp_events
from .kernels import BACKEND
from .objectives import ObjectiveConfig, Problem, ReferenceTimes
from .optimizer import multiscale_estimate
from .pipeline import estimate_sample, estimate_sequence, split_samples

__version__ = "0.1.0"
