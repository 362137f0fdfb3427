import numpy as np
import pytest

from sdgfuse.grid import DepthMap, ImageGrid
from sdgfuse.io import (
    FormatError,
    read_depth_png,
    read_image,
    read_pfm,
    read_pfm_stack,
    write_depth_png,
    write_image_png,
    write_pfm,
    write_pfm_stack,
)


def test_pfm_round_trip(tmp_path, rng):
    a = rng.random((5, 7)).astype(np.float32)
    write_pfm(tmp_path / "a.pfm", a)
    assert np.array_equal(read_pfm(tmp_path / "a.pfm"), a.astype(np.float64))
    c = rng.random((3, 4, 3)).astype(np.float32)
    write_pfm(tmp_path / "c.pfm", c)
    assert np.array_equal(read_pfm(tmp_path / "c.pfm"), c)


def test_pfm_header_and_row_order(tmp_path):
    a = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    write_pfm(tmp_path / "a.pfm", a)
    raw = (tmp_path / "a.pfm").read_bytes()
    assert raw.startswith(b"Pf\n2 2\n-1")
    body = np.frombuffer(raw[-16:], "<f4")
    assert body.tolist() == [3.0, 4.0, 1.0, 2.0]  # bottom row first


def test_pfm_big_endian_read(tmp_path):
    a = np.array([[1.5, -2.0]], dtype=">f4")
    (tmp_path / "b.pfm").write_bytes(b"Pf\n2 1\n1.0\n" + a.tobytes())
    assert read_pfm(tmp_path / "b.pfm").tolist() == [[1.5, -2.0]]


def test_pfm_rejects_garbage(tmp_path):
    (tmp_path / "x.pfm").write_bytes(b"P6\n1 1\n255\n\0\0\0")
    with pytest.raises(FormatError):
        read_pfm(tmp_path / "x.pfm")
    (tmp_path / "t.pfm").write_bytes(b"Pf\n4 4\n-1\n\0\0")
    with pytest.raises(FormatError):
        read_pfm(tmp_path / "t.pfm")


def test_pfm_stack(tmp_path, rng):
    planes = rng.random((6, 3, 5)).astype(np.float32)
    write_pfm_stack(tmp_path / "s.pfm", planes)
    assert np.array_equal(read_pfm_stack(tmp_path / "s.pfm", 3), planes)
    with pytest.raises(FormatError):
        read_pfm_stack(tmp_path / "s.pfm", 4)


def test_depth_png(tmp_path):
    depth = DepthMap(np.array([[1.0, 0.0], [12.5, 255.0]]), np.array([[True, False], [True, True]]))
    write_depth_png(tmp_path / "d.png", depth)
    back = read_depth_png(tmp_path / "d.png")
    assert np.array_equal(back.valid_mask, depth.valid_mask)
    assert np.array_equal(back.depth, depth.depth)


def test_depth_png_rejects_8bit(tmp_path):
    write_image_png(tmp_path / "i.png", ImageGrid(np.zeros((2, 2))), bits=8)
    with pytest.raises(FormatError):
        read_depth_png(tmp_path / "i.png")


def test_image_png(tmp_path, rng):
    img = ImageGrid(rng.random((4, 6)))
    write_image_png(tmp_path / "g.png", img)
    assert np.abs(read_image(tmp_path / "g.png").data - img.data).max() <= 0.5 / 65535 + 1e-12
    rgb = ImageGrid(rng.random((4, 6, 3)))
    write_image_png(tmp_path / "c.png", rgb, bits=8)
    assert read_image(tmp_path / "c.png").channels == 3
