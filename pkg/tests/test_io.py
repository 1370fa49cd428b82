import csv
import json
import struct

import numpy as np
import pytest

from tomotile.errors import FormatError, ParameterError
from tomotile.grids import ImageGrid, Sinogram
from tomotile.io import (
    HEADER_SIZE,
    MAGIC,
    export_pgm,
    read_raster,
    write_raster,
    write_csv,
)


def test_image_roundtrip_exact_for_float32(tmp_path, rng):
    values = rng.normal(size=(17, 23)).astype(np.float32).astype(np.float64)
    path = tmp_path / "img.mtr"
    write_raster(path, ImageGrid(values))
    back, header = read_raster(path)
    assert isinstance(back, ImageGrid)
    assert np.array_equal(back.values, values)
    assert (header.version, header.rows, header.cols) == (1, 17, 23)
    assert not (tmp_path / "img.json").exists()


def test_file_layout_is_20_byte_header_plus_payload(tmp_path):
    path = tmp_path / "img.mtr"
    write_raster(path, ImageGrid(np.zeros((5, 7))))
    data = path.read_bytes()
    assert len(data) == HEADER_SIZE + 5 * 7 * 4
    assert data[:8] == MAGIC
    assert struct.unpack("<III", data[8:20]) == (1, 5, 7)


def test_sinogram_roundtrip_with_sidecar(tmp_path):
    sino = Sinogram(values=np.arange(12.0).reshape(3, 4),
                    angles=np.array([0.0, 0.1, 0.2]), c0=1.5, n_ph=500.0)
    path = tmp_path / "sino.mtr"
    write_raster(path, sino)
    meta = json.loads((tmp_path / "sino.json").read_text())
    assert meta["kind"] == "sinogram"
    back, _ = read_raster(path)
    assert isinstance(back, Sinogram)
    assert np.array_equal(back.values, sino.values)
    assert np.array_equal(back.angles, sino.angles)
    assert back.c0 == 1.5
    assert back.n_ph == 500.0


def test_pixel_size_sidecar_and_stale_cleanup(tmp_path):
    path = tmp_path / "grid.mtr"
    write_raster(path, ImageGrid(np.ones((2, 2)), pixel_size=0.5))
    back, _ = read_raster(path)
    assert back.pixel_size == 0.5
    # rewriting with default pixel size must remove the stale sidecar
    write_raster(path, ImageGrid(np.ones((2, 2))))
    assert not (tmp_path / "grid.json").exists()
    back, _ = read_raster(path)
    assert back.pixel_size == 1.0


def test_write_raster_rejects_other_types(tmp_path):
    with pytest.raises(ParameterError):
        write_raster(tmp_path / "x.mtr", np.zeros((2, 2)))


def _raster_bytes(shape=(2, 3)):
    rows, cols = shape
    payload = np.zeros(rows * cols, dtype="<f4").tobytes()
    return MAGIC + struct.pack("<III", 1, rows, cols) + payload


@pytest.mark.parametrize("mutate,offset", [
    (lambda d: d[:5], 5),                      # truncated magic
    (lambda d: b"NOTRASTR" + d[8:], 0),        # wrong magic
    (lambda d: d[:14], 14),                    # truncated header
    (lambda d: d[:8] + struct.pack("<III", 9, 2, 3) + d[20:], 8),
    (lambda d: d[:-4], 40),                    # truncated payload
    (lambda d: d + b"xx", 44),                 # trailing bytes
])
def test_read_raster_reports_fault_offsets(tmp_path, mutate, offset):
    path = tmp_path / "bad.mtr"
    path.write_bytes(mutate(_raster_bytes()))
    with pytest.raises(FormatError) as info:
        read_raster(path)
    assert info.value.offset == offset
    assert "byte %d" % offset in str(info.value)


def test_export_pgm_layout(tmp_path, rng):
    values = np.array([[0.0, 0.5], [0.75, 1.0]])
    path = tmp_path / "img.pgm"
    export_pgm(values, path, 0.0, 1.0)
    data = path.read_bytes()
    header = b"P5\n2 2\n65535\n"
    assert data.startswith(header)
    samples = np.frombuffer(data[len(header):], dtype=">u2").reshape(2, 2)
    assert samples[0, 0] == 0
    assert samples[0, 1] == round(0.5 * 65535)
    assert samples[1, 1] == 65535
    # out-of-range values clip instead of wrapping
    export_pgm(values * 10, path, 0.0, 1.0)
    data = path.read_bytes()
    top = np.frombuffer(data[len(header):], dtype=">u2")
    assert top.max() == 65535
    with pytest.raises(ParameterError):
        export_pgm(values, path, 1.0, 1.0)
    with pytest.raises(ParameterError):
        export_pgm(np.zeros(4), path, 0.0, 1.0)


def test_write_csv_roundtrip(tmp_path):
    rows = [{"a": 1, "b": "x"}, {"a": 2, "b": "y,z"}]
    path = tmp_path / "t.csv"
    write_csv(path, ["a", "b"], rows)
    with open(path, newline="") as fh:
        got = list(csv.reader(fh))
    assert got[0] == ["a", "b"]
    assert got[1] == ["1", "x"]
    assert got[2] == ["2", "y,z"]
    with pytest.raises(ParameterError):
        write_csv(path, [], rows)
