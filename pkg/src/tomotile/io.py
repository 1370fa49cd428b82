"""Persistence and export: binary rasters, JSON sidecars, CSV, PGM.

Raster layout (MTRASTER), fixed little-endian regardless of host:

    bytes 0..7    magic b"MTRASTER"
    bytes 8..11   version, u32 (currently 1)
    bytes 12..15  rows, u32
    bytes 16..19  cols, u32
    bytes 20..    rows*cols IEEE-754 binary32 values, row-major

Sinogram metadata (angles, c0, n_ph) travels in a same-stem .json
sidecar so the raster stays a plain numeric dump.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ParameterError
from .grids import ImageGrid, Sinogram

MAGIC = b"MTRASTER"
VERSION = 1
HEADER_SIZE = 20


@dataclass(frozen=True)
class RasterHeader:
    version: int
    rows: int
    cols: int


def _sidecar_path(path):
    return Path(path).with_suffix(".json")


def write_raster(path, obj):
    """Serialize an ImageGrid or Sinogram; lossless for float32 payloads."""
    if isinstance(obj, Sinogram):
        values = obj.values
        meta = {
            "kind": "sinogram",
            "angles": [float(a) for a in obj.angles],
            "c0": float(obj.c0),
            "n_ph": None if obj.n_ph is None else float(obj.n_ph),
        }
    elif isinstance(obj, ImageGrid):
        values = obj.values
        meta = None
        if obj.pixel_size != 1.0:
            meta = {"kind": "image", "pixel_size": float(obj.pixel_size)}
    else:
        raise ParameterError("write_raster takes an ImageGrid or Sinogram")
    rows, cols = values.shape
    payload = np.ascontiguousarray(values, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, rows, cols))
        fh.write(payload)
    side = _sidecar_path(path)
    if meta is not None:
        side.write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    elif side.exists():
        side.unlink()


def read_raster(path):
    """Parse a raster file back into its grid object plus header.

    Malformed input raises FormatError whose ``offset`` is the first
    byte position that is missing or wrong.
    """
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC):
        raise FormatError("truncated header", offset=len(data))
    if data[:len(MAGIC)] != MAGIC:
        raise FormatError("bad magic", offset=0)
    if len(data) < HEADER_SIZE:
        raise FormatError("truncated header", offset=len(data))
    version, rows, cols = struct.unpack("<III", data[len(MAGIC):HEADER_SIZE])
    if version != VERSION:
        raise FormatError("unsupported version %d" % version, offset=len(MAGIC))
    expected = rows * cols * 4
    if len(data) < HEADER_SIZE + expected:
        raise FormatError("truncated payload", offset=len(data))
    if len(data) > HEADER_SIZE + expected:
        raise FormatError("trailing bytes after payload",
                          offset=HEADER_SIZE + expected)
    values = np.frombuffer(data, dtype="<f4", count=rows * cols,
                           offset=HEADER_SIZE)
    values = values.reshape(rows, cols).astype(np.float64)
    header = RasterHeader(version=version, rows=rows, cols=cols)

    side = _sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
        if meta.get("kind") == "sinogram":
            sino = Sinogram(values=values,
                            angles=np.asarray(meta["angles"], dtype=np.float64),
                            c0=meta["c0"], n_ph=meta.get("n_ph"))
            return sino, header
        if meta.get("kind") == "image":
            return ImageGrid(values, pixel_size=meta.get("pixel_size", 1.0)), header
    return ImageGrid(values), header


def export_pgm(image, path, lo, hi):
    """16-bit binary PGM with linear [lo, hi] -> [0, 65535] scaling."""
    values = image.values if isinstance(image, ImageGrid) else np.asarray(image)
    if values.ndim != 2:
        raise ParameterError("PGM export needs a 2-D raster")
    if not hi > lo:
        raise ParameterError("max must exceed min")
    scaled = np.clip((values - lo) / (hi - lo), 0.0, 1.0)
    # PGM multi-byte samples are big-endian by specification
    samples = np.round(scaled * 65535.0).astype(">u2")
    h, w = values.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n65535\n" % (w, h))
        fh.write(samples.tobytes())


def write_csv(path, fieldnames, rows):
    """RFC-4180-style CSV with a mandatory header row."""
    if not fieldnames:
        raise ParameterError("fieldnames must be non-empty")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
