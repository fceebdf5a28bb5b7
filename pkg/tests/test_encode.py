import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drawnet.encode import (
    EncodeConfig,
    VoxelGrid3D,
    encode_1d,
    encode_2d,
    encode_3d,
    grid_index,
    supercover_line,
)
from drawnet.errors import MissingChannel, ShapeMismatch
from drawnet.ingest import FeatureSet
from drawnet.preprocess import NormalizedTrace, prepare_trace
from drawnet.synthetic import SpiralParams, gen_spiral
from tests.conftest import make_record


def make_trace(**channels):
    n = len(next(iter(channels.values())))
    chans = {k: np.asarray(v, dtype=np.float64) for k, v in channels.items()}
    return NormalizedTrace(channels=chans, t_grid=np.linspace(0, 1, n), label="HC")


def oracle_cells(p0, p1, per_axis=4096):
    """Independent traversal oracle: dense midpoint sampling of the segment.

    Cells touched with positive measure are found by sampling; cells the
    segment only grazes at a corner have measure zero and never appear.
    """
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    span = int(np.max(np.abs(p1 - p0)))
    n = per_axis * max(span, 1)
    ts = (np.arange(n) + 0.5) / n
    points = p0[None, :] + ts[:, None] * (p1 - p0)[None, :]
    cells = {tuple(int(v) for v in row) for row in np.rint(points)}
    cells.add(tuple(int(v) for v in p0))
    cells.add(tuple(int(v) for v in p1))
    return cells


@pytest.mark.parametrize(
    "p0,p1",
    [
        ((0, 0), (7, 3)), ((2, 5), (2, 5)), ((0, 0), (5, 5)), ((4, 1), (0, 6)),
        ((0, 0), (9, 0)), ((3, 7), (3, 0)), ((1, 2), (8, 6)), ((6, 2), (1, 3)),
    ],
)
def test_supercover_2d_matches_oracle(p0, p1):
    assert set(supercover_line(p0, p1)) == oracle_cells(p0, p1)


@pytest.mark.parametrize(
    "p0,p1",
    [
        ((0, 0, 0), (4, 7, 2)), ((1, 1, 1), (5, 5, 5)), ((3, 0, 2), (3, 6, 2)),
        ((0, 5, 1), (6, 0, 4)), ((2, 2, 2), (2, 2, 2)),
    ],
)
def test_supercover_3d_matches_oracle(p0, p1):
    assert set(supercover_line(p0, p1)) == oracle_cells(p0, p1)


def test_supercover_random_segments_match_oracle():
    rng = np.random.default_rng(0)
    for _ in range(40):
        p0 = tuple(int(v) for v in rng.integers(0, 12, 2))
        p1 = tuple(int(v) for v in rng.integers(0, 12, 2))
        assert set(supercover_line(p0, p1)) == oracle_cells(p0, p1), (p0, p1)
    for _ in range(25):
        p0 = tuple(int(v) for v in rng.integers(0, 9, 3))
        p1 = tuple(int(v) for v in rng.integers(0, 9, 3))
        assert set(supercover_line(p0, p1)) == oracle_cells(p0, p1), (p0, p1)


def test_exact_diagonal_has_no_antidiagonal_cells():
    cells = supercover_line((1, 1), (126, 126))
    assert cells == [(i, i) for i in range(1, 127)]


coordinate = st.integers(min_value=0, max_value=15)


@settings(max_examples=60, deadline=None)
@given(st.tuples(coordinate, coordinate), st.tuples(coordinate, coordinate))
def test_supercover_2d_property(p0, p1):
    cells = supercover_line(p0, p1)
    assert cells[0] == p0 and cells[-1] == p1
    assert len(set(cells)) == len(cells)  # no cell visited twice
    for a, b in zip(cells, cells[1:]):
        assert max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1  # 8-connected walk
    assert set(cells) == oracle_cells(p0, p1)


@settings(max_examples=40, deadline=None)
@given(
    st.tuples(coordinate, coordinate, coordinate),
    st.tuples(coordinate, coordinate, coordinate),
)
def test_supercover_3d_property(p0, p1):
    cells = supercover_line(p0, p1)
    assert cells[0] == p0 and cells[-1] == p1
    assert len(set(cells)) == len(cells)
    assert set(cells) == oracle_cells(p0, p1)
    # reversal symmetry: the same cells in the opposite order
    assert supercover_line(p1, p0) == cells[::-1]


def test_encode_1d_stacks_enabled_channels():
    cfg = EncodeConfig()
    x = np.linspace(0, 1, 128)
    trace = make_trace(x=x, y=1 - x, azimuth=x, altitude=x, pressure=x, velocity=x)
    fs = FeatureSet.from_letters("xy")
    series = encode_1d(trace, fs, cfg)
    assert series.values.shape == (2, 128)
    assert series.channel_names == ("x", "y")
    assert np.allclose(series.values[0], x)
    assert np.allclose(series.values[1], 1 - x)

    full = encode_1d(trace, FeatureSet.full(), cfg)
    assert full.values.shape == (6, 128)  # the 1D network input layout
    assert full.channel_names == FeatureSet.CANONICAL_ORDER


def test_encode_1d_requires_resampled_length():
    trace = make_trace(x=np.linspace(0, 1, 64), y=np.linspace(0, 1, 64))
    with pytest.raises(ShapeMismatch):
        encode_1d(trace, FeatureSet.from_letters("xy"), EncodeConfig())


def test_encode_1d_missing_velocity():
    trace = make_trace(x=np.linspace(0, 1, 128), y=np.linspace(0, 1, 128))
    with pytest.raises(MissingChannel):
        encode_1d(trace, FeatureSet.from_letters("xyv"), EncodeConfig())


def test_encode_1d_canonical_after_resort(zigzag_record):
    fs = FeatureSet.full()
    cfg = EncodeConfig()
    base = prepare_trace(zigzag_record, with_velocity=True, resample_to=128)
    perm = np.random.default_rng(1).permutation(len(zigzag_record.samples))
    shuffled = sorted((zigzag_record.samples[i] for i in perm), key=lambda s: s.t)
    rec2 = make_record(
        [s.x for s in shuffled], [s.y for s in shuffled], [s.t for s in shuffled],
        pressure=[s.pressure for s in shuffled],
    )
    again = prepare_trace(rec2, with_velocity=True, resample_to=128)
    assert np.array_equal(
        encode_1d(base, fs, cfg).values, encode_1d(again, fs, cfg).values
    )


def test_encode_2d_corner_to_corner_diagonal():
    cfg = EncodeConfig()
    trace = make_trace(x=[0.0, 1.0], y=[0.0, 1.0])
    img = encode_2d(trace, FeatureSet.from_letters("xy"), cfg)
    ys, xs = np.nonzero(img.pixels[0])
    assert set(zip(xs, ys)) == {(i, i) for i in range(1, 127)}
    on = img.pixels[:, ys, xs]
    assert np.all(on == 1.0)  # all three channels full intensity
    assert np.all((img.pixels == 0) | (img.pixels == 1))


def test_encode_2d_single_point_disc():
    cfg = EncodeConfig()
    trace = make_trace(x=[0.5, 0.5, 0.5], y=[0.5, 0.5, 0.5])
    img = encode_2d(trace, FeatureSet.from_letters("xy"), cfg)
    assert int((img.pixels.max(axis=0) > 0).sum()) == 1  # one w_min disc
    px = grid_index(np.array([0.5]), 128, 1)[0]
    assert img.pixels[0, px, px] == 1.0


def test_encode_2d_binary_for_positions_only():
    params = SpiralParams(seed=4)
    rec = gen_spiral(params, "HC")
    trace = prepare_trace(rec, with_velocity=False)
    img = encode_2d(trace, FeatureSet.from_letters("xy"), EncodeConfig())
    values = np.unique(img.pixels)
    assert set(values.tolist()) <= {0.0, 1.0}


def test_encode_2d_pressure_ramp_blue_channel():
    # monotone pressure: stamped blue values must be non-decreasing along
    # the stroke; oracle recomputes per-segment means from the channel
    n = 40
    theta = np.linspace(0, 3 * np.pi, n)
    trace = make_trace(
        x=(np.cos(theta) * np.linspace(0.1, 1, n) + 1) / 2,
        y=(np.sin(theta) * np.linspace(0.1, 1, n) + 1) / 2,
        azimuth=np.full(n, 0.3),
        altitude=np.full(n, 0.6),
        pressure=np.linspace(0, 1, n),
    )
    fs = FeatureSet.from_letters("xyalp")
    cfg = EncodeConfig()
    img = encode_2d(trace, fs, cfg)
    pressure = trace.channels["pressure"]
    seg_means = 0.5 * (pressure[:-1] + pressure[1:])
    assert np.all(np.diff(seg_means) >= 0)
    stroke = img.pixels[2][img.pixels.max(axis=0) > 0]
    observed = np.unique(stroke)
    expected = np.unique(seg_means.astype(np.float32))
    assert np.all(np.isin(observed, expected))
    # last segment's color survives overwrites at the stroke end
    px = grid_index(trace.channels["x"][-1:], cfg.width, cfg.margin)[0]
    py = grid_index(trace.channels["y"][-1:], cfg.height, cfg.margin)[0]
    assert img.pixels[2, py, px] == np.float32(seg_means[-1])


def test_encode_2d_width_follows_velocity():
    cfg = EncodeConfig()
    trace = make_trace(
        x=[0.2, 0.8], y=[0.5, 0.5], velocity=[1.0, 1.0],
    )
    img_fast = encode_2d(trace, FeatureSet.from_letters("xyv"), cfg)
    trace_slow = make_trace(x=[0.2, 0.8], y=[0.5, 0.5], velocity=[0.0, 0.0])
    img_slow = encode_2d(trace_slow, FeatureSet.from_letters("xyv"), cfg)
    assert (img_fast.pixels.max(axis=0) > 0).sum() > (img_slow.pixels.max(axis=0) > 0).sum()
    rows_fast = np.unique(np.nonzero(img_fast.pixels[0])[0])
    assert len(rows_fast) == 7  # w_max discs straddle the horizontal line
    rows_slow = np.unique(np.nonzero(img_slow.pixels[0])[0])
    assert len(rows_slow) == 1


def test_encode_2d_supercover_count_matches_oracle(zigzag_record):
    cfg = EncodeConfig(line_width_min=1, line_width_max=1)
    trace = prepare_trace(zigzag_record, with_velocity=True)
    img = encode_2d(trace, FeatureSet.from_letters("xyv"), cfg)
    px = grid_index(trace.channels["x"], cfg.width, cfg.margin)
    py = grid_index(trace.channels["y"], cfg.height, cfg.margin)
    want = set()
    for i in range(len(px) - 1):
        want |= oracle_cells((px[i], py[i]), (px[i + 1], py[i + 1]))
    got = {(x, y) for y, x in zip(*np.nonzero(img.pixels.max(axis=0)))}
    assert got == want


def test_encode_3d_requires_velocity():
    trace = make_trace(x=[0.1, 0.9], y=[0.1, 0.9])
    with pytest.raises(MissingChannel):
        encode_3d(trace, FeatureSet.from_letters("xy"), EncodeConfig())


def test_encode_3d_single_center_voxel():
    cfg = EncodeConfig()
    trace = make_trace(x=[0.5], y=[0.5], velocity=[0.5])
    grid = encode_3d(trace, FeatureSet.from_letters("xyv"), cfg)
    idx, colors = grid.to_sparse()
    assert idx.shape == (1, 3)
    assert tuple(idx[0]) == (63, 63, 63)
    assert np.all(colors == 1.0)


def test_encode_3d_velocity_column():
    cfg = EncodeConfig(resolution=16)
    trace = make_trace(x=[0.5, 0.5], y=[0.5, 0.5], velocity=[0.0, 1.0])
    grid = encode_3d(trace, FeatureSet.from_letters("xyv"), cfg)
    idx, _ = grid.to_sparse()
    assert len(idx) == 14 - 1 + 1  # z from margin to 14 inclusive
    assert set(idx[:, 0]) == {7} and set(idx[:, 1]) == {7}
    assert set(idx[:, 2]) == set(range(1, 15))


def test_encode_3d_sparse_dense_round_trip_and_oracle(zigzag_record):
    cfg = EncodeConfig(resolution=32)
    trace = prepare_trace(zigzag_record, with_velocity=True)
    grid = encode_3d(trace, FeatureSet.full(), cfg)
    idx, colors = grid.to_sparse()
    back = VoxelGrid3D.from_sparse(idx, colors, cfg.resolution)
    assert np.array_equal(back.voxels, grid.voxels)

    ix = grid_index(trace.channels["x"], cfg.resolution, cfg.margin)
    iy = grid_index(trace.channels["y"], cfg.resolution, cfg.margin)
    iz = grid_index(trace.channels["velocity"], cfg.resolution, cfg.margin)
    want = set()
    for i in range(len(ix) - 1):
        want |= oracle_cells((ix[i], iy[i], iz[i]), (ix[i + 1], iy[i + 1], iz[i + 1]))
    got = {
        (x, y, z)
        for z, y, x in zip(*np.nonzero(grid.voxels.max(axis=0)))
    }
    assert got == want


def test_encode_3d_projection_covers_2d_footprint():
    params = SpiralParams(tremor_amplitude=0.12, velocity_jerk=0.4, seed=9)
    rec = gen_spiral(params, "PD")
    trace = prepare_trace(rec, with_velocity=True)
    cfg = EncodeConfig(line_width_min=1, line_width_max=1, resolution=128)
    img = encode_2d(trace, FeatureSet.from_letters("xyv"), cfg)
    grid = encode_3d(trace, FeatureSet.from_letters("xyv"), cfg)
    mask2d = img.pixels.max(axis=0) > 0              # [iy, ix]
    footprint = grid.voxels.max(axis=0).max(axis=0) > 0  # [iy, ix] after z-max
    assert np.all(footprint[mask2d])


def test_encoders_nonzero_and_in_range(zigzag_record):
    cfg = EncodeConfig(resolution=16)
    fs = FeatureSet.full()
    t1 = prepare_trace(zigzag_record, with_velocity=True, resample_to=128)
    t23 = prepare_trace(zigzag_record, with_velocity=True)
    for arr in (
        encode_1d(t1, fs, cfg).values,
        encode_2d(t23, fs, cfg).pixels,
        encode_3d(t23, fs, cfg).voxels,
    ):
        assert arr.min() >= 0.0 and arr.max() <= 1.0
        assert np.any(arr > 0)


def test_encode_config_validation():
    with pytest.raises(ValueError):
        EncodeConfig(resolution=4)
    with pytest.raises(ValueError):
        EncodeConfig(line_width_min=0)
    with pytest.raises(ValueError):
        EncodeConfig(line_width_min=5, line_width_max=3)
    with pytest.raises(ValueError):
        EncodeConfig(overwrite="average")
