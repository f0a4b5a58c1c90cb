import pytest

from seqcast.synthetic import sample_trace_path
from seqcast.trajectory import IngestConfig, Trajectory, extract_trajectory, parse_records


@pytest.fixture(scope="session")
def sample_trace() -> Trajectory:
    """The bundled NGSIM-format trace, ingested with defaults (m/s)."""
    config = IngestConfig()
    records = parse_records(sample_trace_path().read_text(), config)
    runs = extract_trajectory(records, 2, config)
    assert len(runs) == 1
    return runs[0]


@pytest.fixture(scope="session")
def short_trace(sample_trace) -> Trajectory:
    """First 20 seconds of the bundled trace, for faster tests."""
    return Trajectory(
        vehicle_id=sample_trace.vehicle_id,
        sample_period=sample_trace.sample_period,
        samples=sample_trace.samples[:200],
    )
