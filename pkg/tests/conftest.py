import numpy as np
import pytest

from drawnet.ingest import DrawingRecord, StylusSample, validate_record
from drawnet.tensor.backend import _load, available_backends


@pytest.fixture(params=available_backends())
def kernel_backend(request):
    """Run kernel-level tests against every available backend."""
    return _load(request.param)


def make_record(x, y, t, pressure=None, altitude=None, azimuth=None, button=None,
                label="HC", subject_id="s0", task_id="ASD", source="Synthetic"):
    n = len(x)
    pressure = pressure if pressure is not None else [1.0] * n
    altitude = altitude if altitude is not None else [0.8] * n
    azimuth = azimuth if azimuth is not None else [1.0] * n
    samples = tuple(
        StylusSample(
            x=float(x[i]), y=float(y[i]), t=float(t[i]),
            pressure=float(pressure[i]), altitude=float(altitude[i]),
            azimuth=float(azimuth[i]),
            button=None if button is None else int(button[i]),
        )
        for i in range(n)
    )
    return validate_record(DrawingRecord(samples, label, subject_id, task_id, source))


@pytest.fixture
def zigzag_record():
    t = np.linspace(0.0, 1.0, 9)
    x = [0, 1, 2, 3, 4, 3, 2, 1, 0]
    y = [0, 2, 0, 2, 0, 2, 0, 2, 0]
    return make_record(x, y, t)
