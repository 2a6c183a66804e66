import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from afdc import dataset, geometry
from afdc.errors import (AllSamplesFailed, ChecksumMismatch, CorruptFile, NonPositiveClearance,
                         NonPositiveStep, TooFewAirfoils, VersionMismatch)
from afdc.oracle import OracleConfig
from afdc.raster import GridSpec
from conftest import flat_plate

GRID = GridSpec(32, 32)
FAST = OracleConfig(panels=40)


def small_build(codes=("2412", "0012"), angles=(0.0, 2.0, 4.0), clearances=(0.5,), **kw):
    foils = [geometry.naca4(c, 30) for c in codes]
    return dataset.build(foils, angles, clearances, GRID, FAST, workers=1, **kw)


@pytest.fixture(scope="module")
def ten_foil_ds():
    codes = ["0012", "2412", "4412", "0015", "2415", "4415", "6409", "1408", "3310", "5512"]
    foils = [geometry.naca4(c, 30) for c in codes]
    return dataset.split(dataset.build(foils, [0.0, 5.0], [0.5], GRID, FAST, workers=1), seed=1)


# angle sweeps ---------------------------------------------------------------------------

def test_default_sweep():
    a = dataset.sweep_angles()
    assert len(a) == 81 and a[0] == 0.0 and a[-1] == 20.0


def test_half_degree_sweep():
    assert dataset.sweep_angles(0, 1, 0.5) == [0.0, 0.5, 1.0]


def test_end_not_hit_is_excluded():
    np.testing.assert_allclose(dataset.sweep_angles(0, 1, 0.3), [0, 0.3, 0.6, 0.9], atol=1e-15)


def test_bad_steps():
    with pytest.raises(NonPositiveStep):
        dataset.sweep_angles(0, 1, 0)
    with pytest.raises(NonPositiveStep):
        dataset.sweep_angles(0, 1, -0.5)
    with pytest.raises(ValueError):
        dataset.sweep_angles(2, 1, 0.5)


@given(st.floats(-10, 10), st.floats(0, 30), st.floats(0.01, 5))
def test_sweep_count_rule(start, span, step):
    a = dataset.sweep_angles(start, start + span, step)
    assert len(a) in (int(span / step) + 1, int(span / step) + 2)
    assert a[-1] <= start + span + 1e-9 * step + 1e-12
    assert a[-1] + step > start + span - 1e-9


# building -------------------------------------------------------------------------------

def test_cardinality():
    ds = small_build()
    assert len(ds) == 2 * 3 * 1 and not ds.skipped
    assert [s.key for s in ds.samples] == sorted(s.key for s in ds.samples)
    for s in ds.samples:
        assert (s.image.height, s.image.width) == (32, 32)


def test_duplicate_inputs_get_suffixed_ids():
    ds = small_build(codes=("2412", "2412", "2412"), angles=(1.0,))
    assert sorted(ds.airfoil_ids()) == ["NACA 2412", "NACA 2412#2", "NACA 2412#3"]
    labels = {s.label.cl for s in ds.samples}
    assert len(labels) == 1


def test_unique_ids_avoids_collisions():
    assert dataset.unique_ids(["a", "a#2", "a", "b"]) == ["a", "a#2", "a#3", "b"]


def test_flat_plate_zero_angle_has_zero_lift():
    ds = dataset.build([flat_plate(41)], [0.0], [0.5], GRID, FAST, target="cl", workers=1)
    assert len(ds) == 1
    assert abs(ds.samples[0].label.cl) < 1e-12
    assert ds.targets([0])[0, 0] == ds.samples[0].label.cl


def test_ratio_target_default():
    ds = small_build()
    s = ds.samples[0]
    assert ds.target == "clcd"
    assert ds.targets([0])[0, 0] == s.label.ratio == s.label.cl / s.label.cd


def test_failures_go_to_skip_report():
    # two chords above the ground is above the top of the window
    ds = small_build(codes=("2412",), angles=(0.0,), clearances=(0.5, 2.0))
    assert len(ds) + len(ds.skipped) == 2
    assert [k.ground_clearance for k in ds.skipped] == [2.0]
    assert ds.skipped[0].error == "PolygonOutOfWindow"


def test_all_failed():
    with pytest.raises(AllSamplesFailed):
        small_build(codes=("2412",), clearances=(2.0, 3.0))


def test_bad_clearance():
    with pytest.raises(NonPositiveClearance):
        small_build(clearances=(0.5, 0.0))


def test_worker_count_does_not_change_result():
    foils = [geometry.naca4(c, 30) for c in ("2412", "0012", "4415")]
    a = dataset.build(foils, [0.0, 3.0], [0.3], GRID, FAST, workers=1)
    b = dataset.build(foils, [0.0, 3.0], [0.3], GRID, FAST, workers=2)
    assert a.samples == b.samples


def test_worker_env(monkeypatch):
    monkeypatch.setenv("AFDC_THREADS", "3")
    assert dataset.worker_count() == 3
    monkeypatch.setenv("AFDC_THREADS", "0")
    with pytest.raises(ValueError):
        dataset.worker_count()


def test_dataset_tensors(ten_foil_ds):
    x = ten_foil_ds.images([0, 3])
    y = ten_foil_ds.targets([0, 3])
    assert x.shape == (2, 1, 32, 32) and y.shape == (2, 1)
    assert set(np.unique(x)) <= {0.0, 1.0}


# splitting ------------------------------------------------------------------------------

def test_ten_airfoils_split_7_2_1(ten_foil_ds):
    per = {"train": set(), "valid": set(), "test": set()}
    for s, k in zip(ten_foil_ds.samples, ten_foil_ds.splits):
        per[k].add(s.airfoil_id)
    assert [len(per[k]) for k in dataset.SPLITS] == [7, 2, 1]
    assert not (per["train"] & per["valid"] or per["train"] & per["test"] or per["valid"] & per["test"])


def test_split_counts():
    assert dataset.split_counts(10) == (7, 2, 1)
    assert dataset.split_counts(1000) == (700, 200, 100)
    assert dataset.split_counts(3) == (2, 0, 1)
    with pytest.raises(ValueError):
        dataset.split_counts(10, (0.5, 0.2, 0.2))


@given(st.integers(3, 400), st.integers(0, 2 ** 32 - 1))
def test_assignment_is_a_partition(n, seed):
    ids = [f"foil{i}" for i in range(n)]
    a = dataset.assign_ids(ids, seed=seed)
    assert set(a) == set(ids)
    counts = [sum(v == k for v in a.values()) for k in dataset.SPLITS]
    assert tuple(counts) == dataset.split_counts(n)
    assert a == dataset.assign_ids(list(reversed(ids)), seed=seed)


def test_same_seed_same_assignment(ten_foil_ds):
    again = dataset.split(ten_foil_ds, seed=1)
    assert again.splits == ten_foil_ds.splits
    other = [dataset.assign_ids([f"f{i}" for i in range(50)], seed=s) for s in (1, 2)]
    assert other[0] != other[1]


def test_too_few_airfoils():
    with pytest.raises(TooFewAirfoils):
        dataset.assign_ids(["a", "b", "a"])


def test_stats_use_train_split_only(ten_foil_ds):
    train = [dataset.target_value(s.label, "clcd")
             for s, k in zip(ten_foil_ds.samples, ten_foil_ds.splits) if k == "train"]
    assert ten_foil_ds.stats.mean == pytest.approx(np.mean(train), rel=1e-15)
    assert ten_foil_ds.stats.std == pytest.approx(np.std(train), rel=1e-15)


def _perturbed(ds, split_name):
    i = ds.splits.index(split_name)
    s = ds.samples[i]
    lab = type(s.label)(s.label.cl + 1.0, s.label.cd, s.label.ratio + 100.0)
    samples = list(ds.samples)
    samples[i] = dataset.Sample(s.airfoil_id, s.aoa_deg, s.ground_clearance, s.image, lab)
    return dataset.split(dataset.Dataset(ds.grid, ds.target, samples), seed=1)


def test_leakage_probe(ten_foil_ds):
    assert _perturbed(ten_foil_ds, "test").stats == ten_foil_ds.stats
    assert _perturbed(ten_foil_ds, "valid").stats == ten_foil_ds.stats
    assert _perturbed(ten_foil_ds, "train").stats != ten_foil_ds.stats


def test_degenerate_label_spread():
    assert dataset.label_stats([2.0, 2.0]).std == 1.0


# serialization --------------------------------------------------------------------------

def test_roundtrip_bitwise(tmp_path, ten_foil_ds):
    dataset.write(ten_foil_ds, tmp_path / "d")
    back = dataset.read(tmp_path / "d")
    assert back.samples == ten_foil_ds.samples
    assert back.splits == ten_foil_ds.splits
    assert back.stats == ten_foil_ds.stats
    assert back.grid == ten_foil_ds.grid and back.target == ten_foil_ds.target
    for a, b in zip(back.samples, ten_foil_ds.samples):
        assert a.image.pixels.tobytes() == b.image.pixels.tobytes()
        assert (a.label.cl, a.label.cd, a.label.ratio) == (b.label.cl, b.label.cd, b.label.ratio)
    dataset.write(back, tmp_path / "e")
    for name in (dataset.MANIFEST_NAME, dataset.IMAGES_NAME):
        assert (tmp_path / "d" / name).read_bytes() == (tmp_path / "e" / name).read_bytes()


def test_roundtrip_keeps_skips_and_unsplit(tmp_path):
    ds = small_build(codes=("2412",), angles=(0.0,), clearances=(0.5, 2.0))
    dataset.write(ds, tmp_path)
    back = dataset.read(tmp_path)
    assert back.splits is None and back.stats is None
    assert back.skipped == ds.skipped


def test_images_header(tmp_path, ten_foil_ds):
    dataset.write(ten_foil_ds, tmp_path)
    blob = (tmp_path / dataset.IMAGES_NAME).read_bytes()
    assert blob[:4] == b"AFDS"
    assert int.from_bytes(blob[4:8], "little") == 1
    assert int.from_bytes(blob[8:12], "little") == len(ten_foil_ds)
    assert len(blob) == 12 + len(ten_foil_ds) * (8 + 32 * 32)


def test_flipped_byte(tmp_path, ten_foil_ds):
    dataset.write(ten_foil_ds, tmp_path)
    p = tmp_path / dataset.IMAGES_NAME
    blob = bytearray(p.read_bytes())
    blob[100] ^= 0x01
    p.write_bytes(bytes(blob))
    with pytest.raises(ChecksumMismatch):
        dataset.read(tmp_path)


def test_missing_images_file(tmp_path, ten_foil_ds):
    dataset.write(ten_foil_ds, tmp_path)
    (tmp_path / dataset.IMAGES_NAME).unlink()
    with pytest.raises(CorruptFile):
        dataset.read(tmp_path)


def test_missing_manifest(tmp_path):
    with pytest.raises(CorruptFile):
        dataset.read(tmp_path)


def test_malformed_manifest(tmp_path, ten_foil_ds):
    dataset.write(ten_foil_ds, tmp_path)
    (tmp_path / dataset.MANIFEST_NAME).write_text("{not json", encoding="utf-8")
    with pytest.raises(CorruptFile):
        dataset.read(tmp_path)


def test_manifest_version(tmp_path, ten_foil_ds):
    dataset.write(ten_foil_ds, tmp_path)
    p = tmp_path / dataset.MANIFEST_NAME
    m = json.loads(p.read_text())
    m["format_version"] = 99
    p.write_text(json.dumps(m))
    with pytest.raises(VersionMismatch):
        dataset.read(tmp_path)


def test_row_count_mismatch(tmp_path, ten_foil_ds):
    dataset.write(ten_foil_ds, tmp_path)
    p = tmp_path / dataset.MANIFEST_NAME
    m = json.loads(p.read_text())
    m["samples"].pop()
    m["count"] -= 1
    p.write_text(json.dumps(m))
    with pytest.raises(CorruptFile):
        dataset.read(tmp_path)
