"""Raster file formats.

* PFM for float rasters (written little-endian, rows bottom-up).
* 16-bit grayscale PNG for depth: ``value = meters * 256``, 0 marks invalid.
* PNG (8 or 16 bit) for intensity images, normalized to ``[0, 1]`` on load.

Multi-plane float data (offset fields, volume dumps) is stored as a single
channel PFM whose planes are stacked vertically: plane ``k`` occupies rows
``k*H .. (k+1)*H - 1`` of the stored image.
"""

from __future__ import annotations

import os
import re

import numpy as np
from PIL import Image

from .grid import DepthMap, ImageGrid

DEPTH_PNG_SCALE = 256.0


class FormatError(ValueError):
    pass


def write_pfm(path, data: np.ndarray) -> None:
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[:, :, 0]
    if data.ndim == 2:
        tag = b"Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        tag = b"PF"
    else:
        raise FormatError(f"PFM holds 1 or 3 channels, got shape {data.shape}")
    h, w = data.shape[:2]
    body = np.flipud(data).astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(tag + b"\n")
        fh.write(f"{w} {h}\n".encode())
        fh.write(b"-1.0\n")
        fh.write(body)


def read_pfm(path) -> np.ndarray:
    """Return a float64 ``HxW`` (``Pf``) or ``HxWx3`` (``PF``) array, top row first."""
    with open(path, "rb") as fh:
        tag = fh.readline().strip()
        if tag not in (b"Pf", b"PF"):
            raise FormatError(f"{path}: not a PFM file (header {tag!r})")
        dims = fh.readline()
        while dims.startswith(b"#"):
            dims = fh.readline()
        m = re.match(rb"^\s*(\d+)\s+(\d+)\s*$", dims)
        if not m:
            raise FormatError(f"{path}: malformed PFM dimensions {dims!r}")
        w, h = int(m.group(1)), int(m.group(2))
        scale = float(fh.readline().strip())
        endian = "<" if scale < 0 else ">"
        nchan = 3 if tag == b"PF" else 1
        raw = fh.read()
    count = w * h * nchan
    if len(raw) < 4 * count:
        raise FormatError(f"{path}: truncated PFM ({len(raw)} bytes for {w}x{h}x{nchan})")
    data = np.frombuffer(raw[: 4 * count], dtype=endian + "f4").astype(np.float64)
    shape = (h, w, 3) if nchan == 3 else (h, w)
    return np.flipud(data.reshape(shape)).copy()


def write_pfm_stack(path, planes: np.ndarray) -> None:
    """Write ``(K, H, W)`` planes as one vertically stacked PFM."""
    planes = np.asarray(planes)
    k, h, w = planes.shape
    write_pfm(path, planes.reshape(k * h, w))


def read_pfm_stack(path, plane_height: int) -> np.ndarray:
    data = read_pfm(path)
    if data.ndim != 2 or data.shape[0] % plane_height:
        raise FormatError(
            f"{path}: {data.shape} is not a stack of planes of height {plane_height}"
        )
    return data.reshape(-1, plane_height, data.shape[1])


def write_depth_png(path, depth: DepthMap) -> None:
    scaled = np.rint(depth.depth * DEPTH_PNG_SCALE)
    scaled = np.where(depth.valid_mask, np.clip(scaled, 1, 65535), 0).astype(np.uint16)
    Image.fromarray(scaled).save(path)


def read_depth_png(path) -> DepthMap:
    with Image.open(path) as img:
        raw = np.array(img)
    if raw.ndim != 2:
        raise FormatError(f"{path}: depth PNG must be single channel")
    if raw.dtype == np.uint8:
        raise FormatError(f"{path}: depth PNG must be 16-bit")
    raw = raw.astype(np.float64)
    mask = raw > 0
    return DepthMap(raw / DEPTH_PNG_SCALE, mask)


def write_image_png(path, image: ImageGrid, bits: int = 16) -> None:
    data = np.clip(image.data, 0.0, 1.0)
    if bits == 16:
        if image.channels != 1:
            raise FormatError("16-bit image PNGs are single channel")
        Image.fromarray(np.rint(data[:, :, 0] * 65535).astype(np.uint16)).save(path)
    elif bits == 8:
        arr = np.rint(data * 255).astype(np.uint8)
        Image.fromarray(arr[:, :, 0] if image.channels == 1 else arr).save(path)
    else:
        raise FormatError("bits must be 8 or 16")


def read_image(path) -> ImageGrid:
    """Load an 8/16-bit gray or RGB image into ``[0, 1]``."""
    with Image.open(path) as img:
        if img.mode in ("RGBA", "P", "LA", "CMYK"):
            img = img.convert("RGB")
        raw = np.array(img)
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype in (np.uint16, np.int32) or img.mode.startswith("I"):
        scale = 65535.0
    else:
        raise FormatError(f"{path}: unsupported pixel type {raw.dtype}")
    return ImageGrid(raw.astype(np.float64) / scale)


def require_file(path) -> str:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    return path
