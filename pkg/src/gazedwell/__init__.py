"""Probabilistic gaze modelling and variable dwell-time selection.

The pipeline: label raw 60 Hz gaze samples (`segmentation`), infer which
hyperlink the user intends to select from the recent scanpath (`intent`),
map the posterior to per-link dwell times (`policy`) and run the two-step
selection state machine (`engine`).  `simulate` evaluates policies by trace
replay and grid search; `service`/`protocol` expose sessions to streaming
clients; `traceio` reads and writes the trace and parameter file formats.
"""

__version__ = "0.1.0"

from .geometry import BoundingBox, Hyperlink, PageLayout, Point, assign_gaze, box_distance
from .intent import (Behavior, IntentModelParams, IntentPosterior, forward_posterior,
                     last_fixated_baseline, train_intent)
from .policy import (DwellAssignment, PolicyParams, assign_dwells, nominal_dwell,
                     parse_policy, policy_family_i, policy_family_ii, quantize_dwell)
from .segmentation import (FixationEvent, GazeSample, Label, SegModelParams,
                           extract_fixations, train_segmentation, viterbi_labels)
from .units import TS_MS

__all__ = [
    "BoundingBox", "Hyperlink", "PageLayout", "Point", "assign_gaze", "box_distance",
    "Behavior", "IntentModelParams", "IntentPosterior", "forward_posterior",
    "last_fixated_baseline", "train_intent",
    "DwellAssignment", "PolicyParams", "assign_dwells", "nominal_dwell",
    "parse_policy", "policy_family_i", "policy_family_ii", "quantize_dwell",
    "FixationEvent", "GazeSample", "Label", "SegModelParams",
    "extract_fixations", "train_segmentation", "viterbi_labels",
    "TS_MS",
    "__version__",
]
