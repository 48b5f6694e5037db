"""Round trip with the browser N-back runner: its exported session fixtures
must parse cleanly in the ingest module and score to the scripted mistake
rate. Fixtures are committed under frontend/fixtures and regenerated by
`npm run fixture` (a frontend test pins them byte-for-byte)."""

import json
from pathlib import Path

import pytest

from earox import ingest

FIXTURES = Path(__file__).resolve().parent.parent / "frontend" / "fixtures"


@pytest.fixture(scope="module")
def manifest():
    return ingest.parse_manifest(FIXTURES / "manifest_3back.json")


class TestSecondaryRoundTrip:
    def test_manifest_parses_with_zero_schema_errors(self, manifest):
        manifest.validate()
        assert manifest.nback_level == 3
        assert manifest.total_epochs == 68
        assert manifest.calibration_epochs == 6
        assert len(manifest.truth_counts) == 68
        assert len(manifest.answers) == 68

    def test_scripted_3back_scores_29_7(self, manifest):
        pct = ingest.score_answers(manifest)
        assert pct == pytest.approx(29.7, abs=0.1)
        print(f"\nACCEPTANCE secondary round-trip: PASS (mistakes {pct:.4f}%)")

    def test_sync_log_has_68_monotonic_epochs(self):
        events = json.loads((FIXTURES / "sync_log_3back.json").read_text())
        assert len(events) == 68
        assert [e["epochIndex"] for e in events] == list(range(68))
        times = [e["atMs"] for e in events]
        spacings = [b - a for a, b in zip(times, times[1:])]
        assert all(abs(s - 5000.0) <= 50.0 for s in spacings)
