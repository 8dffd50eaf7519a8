import json

import numpy as np
import pytest

from coss.data import (
    SynthSensorSpec,
    SynthSpec,
    WindowedDataset,
    load_dataset,
    load_windows,
    normalize,
    prepare_branches,
    save_windows,
    synth_generate,
    windowize,
)
from coss.errors import ConfigError, DataError, InputError
from coss.model import ModelConfig, SensorConfig
from coss.train import split_dataset


def _simple_streams(seconds=10.0, rate=30.0, channels=2, label=1, seed=0):
    n = int(seconds * rate)
    rng = np.random.default_rng(seed)
    return {"S1": rng.normal(size=(n, channels))}, {"S1": rate}, np.full(n, label, dtype=np.int64)


class TestWindowize:
    def test_window_starts_at_50pct_overlap(self):
        streams, rates, labels = _simple_streams()
        ds = windowize(streams, rates, labels, 30.0, window_seconds=3.0, overlap_fraction=0.5)
        assert ds.num_windows == 5
        # starts at samples 0, 45, 90, 135, 180
        for w, start in enumerate([0, 45, 90, 135, 180]):
            np.testing.assert_array_equal(ds.sensors["S1"][w], streams["S1"][start : start + 90].T)

    def test_zero_overlap_exact_multiple(self):
        streams, rates, labels = _simple_streams(seconds=9.0)
        ds = windowize(streams, rates, labels, 30.0, window_seconds=3.0, overlap_fraction=0.0)
        assert ds.num_windows == 3

    def test_single_label_stream(self):
        streams, rates, labels = _simple_streams(label=2)
        ds = windowize(streams, rates, labels, 30.0, 3.0, 0.5)
        assert set(ds.labels.tolist()) == {2}

    def test_windows_without_majority_are_dropped(self):
        rate = 10.0
        n = 100
        labels = np.zeros(n, dtype=np.int64)
        labels[:34] = 0
        labels[34:66] = 1  # middle window (samples 25..75) has no >= 50% majority
        labels[66:] = 2
        streams = {"S1": np.arange(n, dtype=float).reshape(-1, 1)}
        ds = windowize(streams, {"S1": rate}, labels, rate, window_seconds=5.0, overlap_fraction=0.5)
        # candidate starts: 0, 25, 50, 75 samples
        assert ds.num_windows == 3
        assert ds.labels.tolist() == [0, 1, 2]

    def test_majority_exactly_half_is_kept(self):
        rate = 10.0
        labels = np.array([0] * 25 + [1] * 25, dtype=np.int64)
        streams = {"S1": np.zeros((50, 1))}
        ds = windowize(streams, {"S1": rate}, labels, rate, window_seconds=5.0, overlap_fraction=0.0)
        assert ds.num_windows == 1
        assert ds.labels.tolist() == [0]  # tie resolved to the smaller class index

    def test_stream_shorter_than_window(self):
        streams, rates, labels = _simple_streams(seconds=2.0)
        with pytest.raises(InputError):
            windowize(streams, rates, labels, 30.0, 3.0, 0.5)

    def test_misaligned_streams_error_names_offender(self):
        streams, rates, labels = _simple_streams()
        streams["S2"] = np.zeros((150, 1))  # 5 s instead of 10 s
        rates["S2"] = 30.0
        with pytest.raises(InputError, match="S2"):
            windowize(streams, rates, labels, 30.0, 3.0, 0.5)

    def test_multirate_sensors_share_time_axis(self):
        rng = np.random.default_rng(1)
        streams = {"A": rng.normal(size=(300, 1)), "B": rng.normal(size=(100, 1))}
        rates = {"A": 30.0, "B": 10.0}
        labels = np.zeros(300, dtype=np.int64)
        ds = windowize(streams, rates, labels, 30.0, window_seconds=3.0, overlap_fraction=0.0)
        assert ds.sensors["A"].shape == (3, 1, 90)
        assert ds.sensors["B"].shape == (3, 1, 30)


class TestNormalize:
    def _split_ds(self, seed=0):
        streams, rates, labels = _simple_streams(seconds=40.0)
        rng = np.random.default_rng(3)
        labels = rng.integers(0, 2, size=labels.shape)
        ds = windowize(streams, rates, labels, 30.0, 2.0, 0.0)
        split_dataset(ds, seed=seed)
        return ds

    def test_train_split_mean_zero(self):
        ds = normalize(self._split_ds())
        tr = ds.sensors["S1"][ds.indices("train")]
        np.testing.assert_allclose(tr.mean(axis=(0, 2)), 0.0, atol=1e-9)
        np.testing.assert_allclose(tr.std(axis=(0, 2)), 1.0, atol=1e-6)

    def test_requires_split(self):
        streams, rates, labels = _simple_streams()
        ds = windowize(streams, rates, labels, 30.0, 3.0, 0.5)
        with pytest.raises(InputError):
            normalize(ds)

    def test_stats_come_from_train_split_only(self):
        ds = self._split_ds()
        raw_train = ds.sensors["S1"][ds.indices("train")]
        expected_mean = raw_train.mean(axis=(0, 2))
        expected_std = raw_train.std(axis=(0, 2))
        normed = normalize(ds)
        np.testing.assert_allclose(normed.norm_stats["S1"][0], expected_mean)
        np.testing.assert_allclose(normed.norm_stats["S1"][1], expected_std)
        # validation windows keep a nonzero mean in general
        val = normed.sensors["S1"][normed.indices("val")]
        assert abs(val.mean()) > 0

    def test_constant_channel_maps_to_zero(self):
        n = 20
        ds = WindowedDataset(
            sensors={"S1": np.full((n, 1, 30), 7.5)},
            rates={"S1": 30.0},
            labels=np.zeros(n, dtype=np.int64),
            class_names=("a", "b"),
            window_seconds=1.0,
        )
        split_dataset(ds, seed=0)
        out = normalize(ds)
        np.testing.assert_array_equal(out.sensors["S1"], 0.0)


class TestSynthGenerate:
    def _spec(self, seed=0):
        return SynthSpec(
            sensors=(
                SynthSensorSpec("SI", "informative", 32.0, 2, (4.0, 12.0), 10.0),
                SynthSensorSpec("SR", "redundant", 32.0, 2, None, 10.0, source="SI", lowpass_hz=2.0),
                SynthSensorSpec("SN", "noise", 32.0, 1),
            ),
            num_classes=3,
            windows_per_class=10,
            window_seconds=1.0,
            seed=seed,
        )

    def test_shapes_and_labels(self):
        ds = synth_generate(self._spec())
        assert ds.num_windows == 30
        assert ds.sensors["SI"].shape == (30, 2, 32)
        assert np.bincount(ds.labels).tolist() == [10, 10, 10]

    def test_same_seed_bit_identical(self):
        a, b = synth_generate(self._spec()), synth_generate(self._spec())
        for sid in a.sensors:
            np.testing.assert_array_equal(a.sensors[sid], b.sensors[sid])

    def test_different_seed_differs(self):
        a, b = synth_generate(self._spec(0)), synth_generate(self._spec(1))
        assert not np.array_equal(a.sensors["SI"], b.sensors["SI"])

    def test_band_above_nyquist_rejected(self):
        with pytest.raises(ConfigError, match="Nyquist"):
            SynthSensorSpec("SI", "informative", 20.0, 1, (4.0, 11.0), 10.0)

    def test_needs_informative_sensor(self):
        with pytest.raises(ConfigError):
            SynthSpec(
                sensors=(SynthSensorSpec("SN", "noise", 32.0, 1),),
                num_classes=2, windows_per_class=5, window_seconds=1.0,
            )

    def test_redundant_source_must_be_informative(self):
        with pytest.raises(ConfigError):
            SynthSpec(
                sensors=(
                    SynthSensorSpec("SI", "informative", 32.0, 1, (4.0, 12.0), 10.0),
                    SynthSensorSpec("SR", "redundant", 32.0, 1, source="SN"),
                    SynthSensorSpec("SN", "noise", 32.0, 1),
                ),
                num_classes=2, windows_per_class=5, window_seconds=1.0,
            )

    def test_roundtrip_through_dict(self):
        spec = self._spec()
        again = SynthSpec.from_dict(spec.to_dict())
        np.testing.assert_array_equal(
            synth_generate(spec).sensors["SR"], synth_generate(again).sensors["SR"]
        )


class TestDatasetArtifact:
    def test_roundtrip(self, tmp_path):
        ds = synth_generate(
            SynthSpec(
                sensors=(SynthSensorSpec("SI", "informative", 16.0, 1, (2.0, 6.0), 5.0),),
                num_classes=2, windows_per_class=8, window_seconds=1.0, seed=4,
            )
        )
        split_dataset(ds, seed=1)
        ds = normalize(ds)
        path = tmp_path / "ds.bin"
        save_windows(path, ds)
        back = load_windows(path)
        np.testing.assert_array_equal(back.sensors["SI"], ds.sensors["SI"])
        np.testing.assert_array_equal(back.labels, ds.labels)
        np.testing.assert_array_equal(back.split, ds.split)
        assert back.class_names == ds.class_names
        np.testing.assert_array_equal(back.norm_stats["SI"][0], ds.norm_stats["SI"][0])

    def test_deterministic_bytes(self, tmp_path):
        spec = SynthSpec(
            sensors=(SynthSensorSpec("SI", "informative", 16.0, 1, (2.0, 6.0), 5.0),),
            num_classes=2, windows_per_class=8, window_seconds=1.0, seed=4,
        )
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_windows(p1, synth_generate(spec))
        save_windows(p2, synth_generate(spec))
        assert p1.read_bytes() == p2.read_bytes()


class TestManifestLoading:
    def _write_dataset(self, tmp_path, bad_line=None, ragged=False, short_sensor=False):
        n = 120
        rng = np.random.default_rng(0)
        s1 = rng.normal(size=(n, 2))
        lines = [f"{a:.6f},{b:.6f}" for a, b in s1]
        if bad_line is not None:
            lines[bad_line] = "0.5,oops"
        if ragged:
            lines[7] = "0.5"
        (tmp_path / "s1.csv").write_text("\n".join(lines) + "\n")
        m = n // 2 if short_sensor else n
        (tmp_path / "s2_x.csv").write_text("\n".join(f"{v:.6f}" for v in rng.normal(size=m)))
        (tmp_path / "s2_y.csv").write_text("\n".join(f"{v:.6f}" for v in rng.normal(size=n)))
        (tmp_path / "labels.csv").write_text("\n".join(["0"] * 60 + ["1"] * 60))
        manifest = {
            "schema_version": 1,
            "window_seconds": 2.0,
            "overlap_fraction": 0.5,
            "labels": {"file": "labels.csv", "rate_hz": 12.0},
            "class_names": ["rest", "move"],
            "sensors": [
                {"sensor_id": "S1", "rate_hz": 12.0, "channels": 2, "file": "s1.csv"},
                {"sensor_id": "S2", "rate_hz": 12.0, "files": ["s2_x.csv", "s2_y.csv"]},
            ],
        }
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(manifest))
        return path

    def test_happy_path_shapes(self, tmp_path):
        ds = load_dataset(self._write_dataset(tmp_path))
        assert ds.sensors["S1"].shape[1:] == (2, 24)
        assert ds.sensors["S2"].shape[1:] == (2, 24)
        assert ds.class_names == ("rest", "move")
        assert set(ds.labels.tolist()) <= {0, 1}

    def test_non_numeric_cell_reports_line(self, tmp_path):
        path = self._write_dataset(tmp_path, bad_line=41)
        with pytest.raises(DataError, match=r"s1\.csv:42"):
            load_dataset(path)

    def test_ragged_row_reports_line(self, tmp_path):
        path = self._write_dataset(tmp_path, ragged=True)
        with pytest.raises(DataError, match=r"s1\.csv:8"):
            load_dataset(path)

    def test_mismatched_channel_lengths_names_sensor(self, tmp_path):
        path = self._write_dataset(tmp_path, short_sensor=True)
        with pytest.raises(DataError, match="S2"):
            load_dataset(path)

    def test_missing_manifest_keys(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps({"schema_version": 1, "window_seconds": 1.0}))
        with pytest.raises(DataError, match="labels"):
            load_dataset(p)

    def test_unsupported_schema_version(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps({"schema_version": 99}))
        with pytest.raises(DataError, match="schema_version"):
            load_dataset(p)


class TestPrepareBranches:
    def _dataset_and_config(self):
        ds = synth_generate(
            SynthSpec(
                sensors=(SynthSensorSpec("SI", "informative", 32.0, 1, (2.0, 10.0), 8.0),),
                num_classes=2, windows_per_class=10, window_seconds=1.0, seed=0,
            )
        )
        split_dataset(ds, seed=0)
        cfg = ModelConfig(
            sensors=(SensorConfig("SI", 1, 32.0, (32.0, 16.0, 12.8)),),
            window_seconds=1.0, ks_original=4, num_classes=2, filters=3, classifier_hidden=4,
        )
        return ds, cfg

    def test_branch_shapes_follow_plans(self):
        ds, cfg = self._dataset_and_config()
        pd = prepare_branches(ds, cfg)
        assert pd.inputs["SI"][32.0].shape == (20, 1, 32)
        assert pd.inputs["SI"][16.0].shape == (20, 1, 16)
        # S = 2.5 -> floor(31/2.5)+1 = 13
        assert pd.inputs["SI"][12.8].shape == (20, 1, 13)

    def test_full_rate_branch_is_the_window_itself(self):
        ds, cfg = self._dataset_and_config()
        pd = prepare_branches(ds, cfg)
        np.testing.assert_array_equal(pd.inputs["SI"][32.0], ds.sensors["SI"])

    def test_rate_mismatch_rejected(self):
        ds, cfg = self._dataset_and_config()
        bad = ModelConfig(
            sensors=(SensorConfig("SI", 1, 64.0, (64.0,)),),
            window_seconds=1.0, ks_original=4, num_classes=2, filters=3, classifier_hidden=4,
        )
        with pytest.raises(ConfigError, match="rate"):
            prepare_branches(ds, bad)

    def test_needs_split(self):
        ds, cfg = self._dataset_and_config()
        ds.split = None
        with pytest.raises(InputError):
            prepare_branches(ds, cfg)
