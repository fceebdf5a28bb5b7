import numpy as np
import pytest

from drawnet.ingest import load_manifest, validate_record
from drawnet.preprocess import prepare_trace
from drawnet.synthetic import SpiralParams, gen_cohort, gen_spiral, write_cohort


def test_no_tremor_limit_lies_on_spiral():
    params = SpiralParams(tremor_amplitude=0.0, velocity_jerk=0.0, seed=1)
    rec = gen_spiral(params, "HC")
    x, y = rec.column("x"), rec.column("y")
    radius = np.hypot(x, y)
    theta = np.unwrap(np.arctan2(y, x))
    # arctan2 loses whole turns; recover the branch from the first radius
    turns = round((radius[0] / params.radius_growth - theta[0]) / (2 * np.pi))
    theta += 2 * np.pi * turns
    deviation = np.abs(radius - params.radius_growth * theta)
    assert deviation.max() < 1e-6 * params.radius_growth * theta.max()


def test_same_seed_identical_records():
    params = SpiralParams(seed=9)
    assert gen_spiral(params, "PD") == gen_spiral(params, "PD")


def test_tremor_spectral_peak():
    params = SpiralParams(tremor_amplitude=0.15, tremor_freq_hz=5.0, seed=3)
    rec = gen_spiral(params, "PD")
    x, y = rec.column("x"), rec.column("y")
    theta = np.unwrap(np.arctan2(y, x))
    residual = np.hypot(x, y) - params.radius_growth * theta
    freqs = np.fft.rfftfreq(len(residual), 1.0 / 150.0)
    power = np.abs(np.fft.rfft(residual - residual.mean())) ** 2
    peak = freqs[np.argmax(power)]
    assert abs(peak - 5.0) <= 0.5


def test_records_pass_ingest_validation():
    _, records = gen_cohort(5, 5, seed=4)
    for rec in records:
        validate_record(rec)


def test_cohort_counts_and_determinism():
    manifest, records = gen_cohort(40, 40, seed=7)
    assert len(records) == 80
    assert manifest.class_counts() == {"HC": 40, "PD": 40}
    manifest2, records2 = gen_cohort(40, 40, seed=7)
    assert manifest == manifest2
    assert records == records2
    assert len({r.subject_id for r in records}) == 80


def test_pd_velocity_variance_exceeds_hc():
    _, records = gen_cohort(12, 12, seed=5)
    variances = {"PD": [], "HC": []}
    for rec in records:
        trace = prepare_trace(rec, with_velocity=True, resample_to=128)
        variances[rec.label].append(float(np.var(trace.channels["velocity"])))
    assert np.mean(variances["PD"]) > np.mean(variances["HC"])


def _threshold_accuracy(values, labels):
    values, labels = np.asarray(values), np.asarray(labels)
    best = 0.0
    cuts = np.concatenate(([values.min() - 1], np.sort(values), [values.max() + 1]))
    for cut in cuts:
        pred = values > cut
        best = max(best, np.mean(pred == labels), np.mean(~pred == labels))
    return best


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_classes_separable_by_velocity_variance(seed):
    _, records = gen_cohort(40, 40, seed=seed)
    values, labels = [], []
    for rec in records:
        trace = prepare_trace(rec, with_velocity=True, resample_to=128)
        values.append(float(np.var(trace.channels["velocity"])))
        labels.append(rec.label == "PD")
    assert _threshold_accuracy(values, labels) > 0.85


def test_write_cohort_matches_ingest(tmp_path):
    manifest, records = gen_cohort(3, 3, seed=6)
    manifest_path = write_cohort(tmp_path, manifest, records)
    loaded_manifest, loaded = load_manifest(manifest_path)
    assert loaded_manifest == manifest
    assert loaded == records  # CSV round trip is exact


def test_param_validation():
    with pytest.raises(ValueError):
        SpiralParams(turns=0.5)
    with pytest.raises(ValueError):
        SpiralParams(tremor_amplitude=-0.1)
    with pytest.raises(ValueError):
        SpiralParams(n_samples=8)
