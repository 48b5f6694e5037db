"""In-ear pulse-oximetry workload pipeline.

Synthetic two-wavelength PPG with known ground truth, SpO2/pulse/respiration
extraction, 21-feature epoching, and boosted random-forest classification
with k-fold and leave-one-subject-out protocols.
"""

from . import dsp, features, ingest, learner, stats, synth, vitals
from .synth import GroundTruth, PpgRecord, r_from_spo2, synthesize, synthesize_cohort
from .vitals import VitalsSeries, compute_r, extract_vitals, spo2_from_r

__version__ = "0.1.0"

__all__ = [
    "dsp", "features", "ingest", "learner", "stats", "synth", "vitals",
    "GroundTruth", "PpgRecord", "r_from_spo2", "synthesize", "synthesize_cohort",
    "VitalsSeries", "compute_r", "extract_vitals", "spo2_from_r",
    "__version__",
]
