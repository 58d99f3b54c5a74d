"""File IO: PGM/PPM round trips, label loading, heatmaps, CSV exports."""

import numpy as np
import numpy.testing as npt
import pytest

from rowgate.errors import DataError
from rowgate.rasters import (
    load_label_dir,
    read_label_map,
    read_pgm,
    read_ppm,
    unit_to_u8,
    write_attention_csv,
    write_attention_pgm,
    write_pgm,
    write_ppm,
)


class TestPGM:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        image = rng.integers(0, 256, size=(7, 5)).astype(np.uint8)
        path = tmp_path / "x.pgm"
        write_pgm(path, image)
        npt.assert_array_equal(read_pgm(path), image)

    def test_ascii_variant(self, tmp_path):
        path = tmp_path / "a.pgm"
        path.write_text("P2\n# comment\n3 2\n255\n0 1 2\n3 4 255\n")
        npt.assert_array_equal(read_pgm(path), [[0, 1, 2], [3, 4, 255]])

    def test_truncated_rejected(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n4 4\n255\n\x00\x01")
        with pytest.raises(DataError):
            read_pgm(path)

    def test_wrong_dtype_rejected(self, tmp_path):
        with pytest.raises(DataError):
            write_pgm(tmp_path / "b.pgm", np.zeros((2, 2), dtype=np.float64))


class TestPPM:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        image = rng.integers(0, 256, size=(3, 4, 6)).astype(np.uint8)
        path = tmp_path / "x.ppm"
        write_ppm(path, image)
        npt.assert_array_equal(read_ppm(path), image)


class TestLabelLoading:
    def test_pgm_label_map(self, tmp_path):
        ids = np.array([[0, 1], [255, 2]], dtype=np.uint8)
        write_pgm(tmp_path / "labels.pgm", ids)
        label_map = read_label_map(tmp_path / "labels.pgm")
        npt.assert_array_equal(label_map.ids, ids)
        assert label_map.name == "labels.pgm"

    def test_png_label_map(self, tmp_path):
        pil = pytest.importorskip("PIL.Image")
        ids = np.array([[0, 3], [255, 1]], dtype=np.uint8)
        pil.fromarray(ids, mode="L").save(tmp_path / "labels.png")
        npt.assert_array_equal(read_label_map(tmp_path / "labels.png").ids, ids)

    def test_directory_loading_is_sorted(self, tmp_path):
        for name in ("b.pgm", "a.pgm"):
            write_pgm(tmp_path / name, np.zeros((2, 2), dtype=np.uint8))
        maps = load_label_dir(tmp_path)
        assert [m.name for m in maps] == ["a.pgm", "b.pgm"]

    def test_empty_directory_rejected(self, tmp_path):
        with pytest.raises(DataError):
            load_label_dir(tmp_path)

    def test_unreadable_files_listed(self, tmp_path):
        write_pgm(tmp_path / "good.pgm", np.zeros((2, 2), dtype=np.uint8))
        (tmp_path / "bad.pgm").write_bytes(b"P5\n9 9\n255\nxx")
        with pytest.raises(DataError, match="bad.pgm"):
            load_label_dir(tmp_path)


class TestHeatmapAndCSV:
    def test_unit_scaling(self):
        npt.assert_array_equal(unit_to_u8(np.array([[0.0, 0.5, 1.0]])), [[0, 128, 255]])
        npt.assert_array_equal(unit_to_u8(np.array([[-0.2, 1.4]])), [[0, 255]])

    def test_attention_exports(self, tmp_path):
        rng = np.random.default_rng(2)
        attention = rng.uniform(0.01, 0.99, size=(4, 6))  # channels x height
        write_attention_csv(tmp_path / "a.csv", attention)
        write_attention_pgm(tmp_path / "a.pgm", attention)

        rows = (tmp_path / "a.csv").read_text().strip().splitlines()
        assert len(rows) == 6  # one row per image row
        parsed = np.array([[float(v) for v in row.split(",")] for row in rows])
        assert parsed.shape == (6, 4)
        npt.assert_allclose(parsed, attention.T, rtol=1e-5)  # 6 significant digits
        assert np.all((parsed > 0) & (parsed < 1))

        image = read_pgm(tmp_path / "a.pgm")
        assert image.shape == (6, 4)
        npt.assert_array_equal(image, unit_to_u8(attention.T))
