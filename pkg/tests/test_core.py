"""Core data model: RLE, instances, label maps, crop geometry."""

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from PIL import Image

from sketchtint.core import (
    DEFAULT_CATEGORIES,
    FormatError,
    InstanceRecord,
    LABEL_PALETTE,
    NUM_CLASSES,
    SketchImage,
    color_from_uint8,
    color_to_uint8,
    decode_mask_rle,
    encode_mask_rle,
    extract_crop,
    filled_interior,
    instances_from_json,
    instances_to_json,
    load_instances,
    load_label_map,
    paste_crop,
    resize_nearest,
    save_instances,
    save_label_map,
    square_crop_box,
)

import oracles


# ---------------------------------------------------------------------------
# category table

def test_category_table_contents():
    assert NUM_CLASSES == 20
    assert DEFAULT_CATEGORIES.by_id(2).noun == "sun"
    assert DEFAULT_CATEGORIES.by_form("buses").noun == "bus"
    assert DEFAULT_CATEGORIES.by_form("sheep").noun == "sheep"
    assert DEFAULT_CATEGORIES.by_form("pterodactyl") is None
    assert DEFAULT_CATEGORIES.group_ids("W") == [1, 2, 3]
    assert len(DEFAULT_CATEGORIES.group_ids("E")) == 4
    assert len(DEFAULT_CATEGORIES.group_ids("O")) == 13


# ---------------------------------------------------------------------------
# RLE strings; expected values worked out by hand in column-major order

def test_rle_frozen_examples():
    checker = np.array([[1, 0], [0, 1]], dtype=np.uint8)
    # column-major flat = 1,0,0,1 -> leading zero run 0, then 1,2,1
    assert encode_mask_rle(checker) == "0,1,2,1"
    assert encode_mask_rle(np.zeros((2, 2), dtype=np.uint8)) == "4"
    assert encode_mask_rle(np.ones((2, 2), dtype=np.uint8)) == "0,4"
    col = np.array([[0, 1], [0, 1], [0, 1]], dtype=np.uint8)
    # flat = 0,0,0,1,1,1
    assert encode_mask_rle(col) == "3,3"
    assert np.array_equal(decode_mask_rle("0,1,2,1", 2, 2), checker)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_rle_round_trip(h, w, seed):
    mask = (np.random.default_rng(seed).random((h, w)) < 0.4).astype(np.uint8)
    assert np.array_equal(decode_mask_rle(encode_mask_rle(mask), h, w), mask)


def test_rle_rejects_bad_strings():
    with pytest.raises(FormatError):
        decode_mask_rle("1,2,banana", 2, 2)
    with pytest.raises(FormatError):
        decode_mask_rle("0,1", 2, 2)  # sums to 1, grid has 4 pixels
    with pytest.raises(FormatError):
        decode_mask_rle("2,0,2", 2, 2)  # zero run after the first
    with pytest.raises(FormatError):
        encode_mask_rle(np.zeros((2, 2, 2), dtype=np.uint8))


# ---------------------------------------------------------------------------
# instances and filled interiors

def _rect_outline(h, w, y0, x0, y1, x1):
    g = np.zeros((h, w), dtype=np.uint8)
    g[y0, x0:x1 + 1] = 1
    g[y1, x0:x1 + 1] = 1
    g[y0:y1 + 1, x0] = 1
    g[y0:y1 + 1, x1] = 1
    return g


def _record(mask, label=2, score=1.0, rec_id=1):
    ys, xs = np.nonzero(mask)
    bbox = (int(xs.min()), int(ys.min()),
            int(ys.max() - ys.min() + 1), int(xs.max() - xs.min() + 1))
    return InstanceRecord(id=rec_id, label=label, score=score,
                          bbox=bbox, mask=mask)


def test_filled_interior_closes_loops():
    mask = _rect_outline(12, 12, 2, 3, 8, 9)
    fill = filled_interior(_record(mask))
    assert fill[5, 6] == 1, "pixel inside the loop must be filled"
    assert fill[0, 0] == 0 and fill[11, 11] == 0
    assert np.array_equal(fill & mask, mask), "strokes stay in the fill"
    # agreement with the reference flood fill
    sub = mask[2:9, 3:10]
    exterior = oracles.flood_exterior_oracle(sub)
    assert np.array_equal(fill[2:9, 3:10], 1 - exterior)


def test_filled_interior_open_stroke_stays_thin():
    mask = np.zeros((8, 8), dtype=np.uint8)
    mask[4, 1:7] = 1
    fill = filled_interior(_record(mask))
    assert np.array_equal(fill, mask)


def test_filled_interior_rejects_empty():
    rec = InstanceRecord(id=1, label=2, score=1.0, bbox=(0, 0, 2, 2),
                         mask=np.zeros((4, 4), dtype=np.uint8))
    with pytest.raises(ValueError):
        filled_interior(rec)


def test_instance_validate_catches_each_violation():
    mask = _rect_outline(10, 10, 2, 2, 6, 6)
    good = _record(mask)
    good.validate()

    bad = _record(mask)
    bad.bbox = (2, 2, 0, 5)
    with pytest.raises(ValueError, match="positive size"):
        bad.validate()

    bad = _record(mask)
    bad.bbox = (4, 4, 5, 5)  # inside the image but missing rows/cols 2..3
    with pytest.raises(ValueError, match="outside bbox"):
        bad.validate()

    bad = _record(mask)
    bad.bbox = (8, 8, 5, 5)  # runs past the 10x10 image
    with pytest.raises(ValueError, match="outside image"):
        bad.validate()

    bad = _record(mask, label=99)
    with pytest.raises(ValueError, match="unknown category"):
        bad.validate()

    bad = _record(mask, score=1.5)
    with pytest.raises(ValueError, match="score"):
        bad.validate()

    bad = _record(mask)
    with pytest.raises(ValueError, match="mask shape"):
        bad.validate(image_hw=(12, 12))


def test_instances_json_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    masks = [(rng.random((9, 11)) < 0.3).astype(np.uint8) for _ in range(3)]
    for m in masks:
        m[4, 5] = 1  # keep non-empty
    records = [_record(m, label=i + 1, score=0.25 * (i + 1), rec_id=i + 1)
               for i, m in enumerate(masks)]
    path = tmp_path / "instances.json"
    save_instances(path, (9, 11), records)
    (ih, iw), loaded = load_instances(path)
    assert (ih, iw) == (9, 11)
    assert len(loaded) == 3
    for a, b in zip(records, loaded):
        assert (a.id, a.label, a.bbox) == (b.id, b.label, b.bbox)
        assert a.score == pytest.approx(b.score)
        assert np.array_equal(a.mask, b.mask)


def test_instances_json_rejects_duplicates_and_garbage():
    mask = np.ones((2, 2), dtype=np.uint8)
    doc = instances_to_json((2, 2), [_record(mask, rec_id=7),
                                     _record(mask, rec_id=7)])
    with pytest.raises(FormatError, match="duplicate instance id"):
        instances_from_json(doc)
    with pytest.raises(FormatError):
        instances_from_json({"instances": []})  # missing image_size
    with pytest.raises(FormatError):
        instances_from_json({"image_size": [2, 2],
                             "instances": [{"id": 1}]})


# ---------------------------------------------------------------------------
# sketches and label maps

def test_sketch_image_rejects_nonbinary():
    with pytest.raises(ValueError):
        SketchImage(np.full((3, 3), 7, dtype=np.uint8))
    with pytest.raises(ValueError):
        SketchImage(np.zeros((3, 3, 3), dtype=np.uint8))


def test_sketch_png_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    pix = (rng.random((16, 20)) < 0.3).astype(np.uint8)
    sk = SketchImage(pix)
    sk.save(tmp_path / "s.png")
    again = SketchImage.load(tmp_path / "s.png")
    assert np.array_equal(again.pixels, pix)


def test_label_map_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    labels = rng.integers(0, NUM_CLASSES + 1, size=(14, 17))
    save_label_map(tmp_path / "l.png", labels)
    assert np.array_equal(load_label_map(tmp_path / "l.png"), labels)


def test_label_map_bounds_and_mode(tmp_path):
    with pytest.raises(ValueError):
        save_label_map(tmp_path / "x.png", np.full((2, 2), len(LABEL_PALETTE)))
    Image.new("RGB", (4, 4)).save(tmp_path / "rgb.png")
    with pytest.raises(FormatError):
        load_label_map(tmp_path / "rgb.png")


def test_color_round_trip_every_byte():
    arr = np.arange(256, dtype=np.uint8).reshape(16, 16)
    rgb = np.stack([arr] * 3, axis=-1)
    assert np.array_equal(color_to_uint8(color_from_uint8(rgb)), rgb)
    assert color_from_uint8(rgb).min() >= -1.0
    assert color_from_uint8(rgb).max() <= 1.0


# ---------------------------------------------------------------------------
# crop geometry

def test_square_crop_box_frozen_examples():
    # side = max(8, 4) = 8, pad = max(2, round(8 * .125)) = 2 -> side 12
    # top = (2*20 + 8 - 12) // 2 = 18, left = (2*10 + 4 - 12) // 2 = 6
    assert square_crop_box((10, 20, 8, 4)) == (18, 6, 12)
    # side = 40, pad = max(2, 5) = 5 -> side 50, window hangs off the canvas
    assert square_crop_box((0, 0, 40, 40)) == (-5, -5, 50)
    # side = 1, pad = 2 -> side 5; top = (2*3 + 1 - 5) // 2 = 1
    assert square_crop_box((3, 3, 1, 1)) == (1, 1, 5)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 50), st.integers(0, 50),
       st.integers(1, 60), st.integers(1, 60))
def test_square_crop_box_properties(x, y, bh, bw):
    top, left, side = square_crop_box((x, y, bh, bw))
    assert side >= max(bh, bw) + 4, "at least the minimum pad on both sides"
    assert top <= y and top + side >= y + bh, "window covers the bbox rows"
    assert left <= x and left + side >= x + bw, "window covers the bbox cols"
    # centering within integer truncation
    assert abs((2 * top + side) - (2 * y + bh)) <= 1
    assert abs((2 * left + side) - (2 * x + bw)) <= 1


def test_extract_crop_pads_past_edges():
    arr = np.arange(12, dtype=np.int32).reshape(3, 4)
    out = extract_crop(arr, -1, -1, 4, fill=9)
    assert out.shape == (4, 4)
    assert (out[0] == 9).all() and (out[:, 0] == 9).all()
    assert np.array_equal(out[1:4, 1:4], arr[0:3, 0:3])
    rgb = np.zeros((3, 3, 3), dtype=np.uint8)
    assert extract_crop(rgb, 1, 1, 4, fill=255).shape == (4, 4, 3)


def test_paste_crop_masked_and_clipped():
    dst = np.zeros((5, 5), dtype=np.int32)
    patch = np.full((3, 3), 7, dtype=np.int32)
    where = np.zeros((5, 5), dtype=np.uint8)
    where[1, 1] = 1
    paste_crop(dst, patch, 1, 1, where=where)
    assert dst[1, 1] == 7 and dst.sum() == 7
    # clipping: paste partially off-canvas without error
    dst2 = np.zeros((5, 5), dtype=np.int32)
    paste_crop(dst2, patch, -2, -2)
    assert dst2[0, 0] == 7 and dst2[1:, 1:].sum() == 0
    # fully off-canvas is a no-op
    dst3 = np.zeros((5, 5), dtype=np.int32)
    paste_crop(dst3, patch, 10, 10)
    assert dst3.sum() == 0


def test_resize_nearest_exactness():
    arr = np.arange(16, dtype=np.uint8).reshape(4, 4)
    assert np.array_equal(resize_nearest(arr, (4, 4)), arr)
    up = resize_nearest(arr, (8, 8))
    assert np.array_equal(up, np.repeat(np.repeat(arr, 2, 0), 2, 1))
    assert np.array_equal(resize_nearest(up, (4, 4)), arr), \
        "integer up then down restores the grid"
    flat = np.full((6, 6), 42, dtype=np.uint8)
    assert (resize_nearest(flat, (5, 7)) == 42).all()
    rgb = np.zeros((4, 4, 3), dtype=np.uint8)
    assert resize_nearest(rgb, (9, 2)).shape == (9, 2, 3)
