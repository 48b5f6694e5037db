import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from earox import features, ingest, synth, vitals


def extract_cohort(records, total_epochs, calibration_epochs=6):
    """Records -> feature dataset, the same way the CLI does it."""
    dataset = []
    for record in records:
        manifest = ingest.SessionManifest(
            subject_id=record.subject_id,
            nback_level=record.nback_level,
            sample_rate=record.sample_rate,
            total_epochs=total_epochs,
            calibration_epochs=calibration_epochs,
        )
        series = vitals.extract_vitals(record)
        slices = ingest.epoch_align(record, manifest)
        dataset.extend(features.extract_trial(series, slices, manifest))
    return dataset


@pytest.fixture(scope="session")
def clean_record():
    """One noiseless 60 s record with simple constant truth."""
    truth = synth.GroundTruth(
        spo2_trajectory=95.0, heart_rate=75.0, resp_rate=15.0,
        resp_mod_depth=0.2, noise_sd=0.0, seed=7,
    )
    return truth, synth.synthesize(truth, 60.0)


@pytest.fixture(scope="session")
def clean_vitals(clean_record):
    _, record = clean_record
    return vitals.extract_vitals(record)


@pytest.fixture(scope="session")
def shifted_cohort_dataset():
    """8 subjects x 4 levels with the reference SpO2 shifts, shortened trials
    (34 epochs) to keep the suite quick; shared by feature/statistics tests."""
    shifts = (0.0, -0.1, -0.2, -0.4)
    records = synth.synthesize_cohort(
        8, shifts, seed=42, n_epochs=34, noise_sd=1.0,
        shift_mode="post_calibration",
    )
    return extract_cohort(records, total_epochs=34)
