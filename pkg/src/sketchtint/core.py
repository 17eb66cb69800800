"""Shared data model and raster utilities.

Conventions used across the package:

* sketches are binary uint8 grids, 1 = stroke, 0 = background
* label maps are int grids of category ids, 0 = background
* color images are float arrays in [-1, 1], shape (H, W, 3)
* bounding boxes are [x, y, H, W]: column/row of the top-left corner,
  then height and width
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from PIL import Image

from . import kernels

BACKGROUND_ID = 0


class FormatError(ValueError):
    """Malformed serialized data (RLE strings, JSON documents, images)."""


# ---------------------------------------------------------------------------
# categories

@dataclass(frozen=True)
class Category:
    id: int
    noun: str
    plural: str
    group: str  # "W" weather, "E" environment, "O" object


class CategoryTable:
    """The colorizable categories and their W/E/O grouping."""

    def __init__(self, entries):
        self.entries = list(entries)
        self._by_id = {c.id: c for c in self.entries}
        self._by_form = {}
        for c in self.entries:
            for form in (c.noun, c.plural):
                self._by_form.setdefault(form, c)
        if len(self._by_id) != len(self.entries):
            raise ValueError("duplicate category ids")
        nouns = [c.noun for c in self.entries]
        if len(set(nouns)) != len(nouns):
            raise ValueError("duplicate category nouns")
        for c in self.entries:
            if c.group not in ("W", "E", "O"):
                raise ValueError(f"bad group {c.group!r} for {c.noun}")

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def by_id(self, cid: int) -> Category:
        return self._by_id[cid]

    def by_form(self, token: str):
        """Category for a surface token (singular or plural), else None."""
        return self._by_form.get(token)

    def ids(self):
        return [c.id for c in self.entries]

    def group_ids(self, group: str):
        return [c.id for c in self.entries if c.group == group]


DEFAULT_CATEGORIES = CategoryTable([
    Category(1, "moon", "moons", "W"),
    Category(2, "sun", "suns", "W"),
    Category(3, "cloud", "clouds", "W"),
    Category(4, "house", "houses", "E"),
    Category(5, "bench", "benches", "E"),
    Category(6, "road", "roads", "E"),
    Category(7, "bus", "buses", "E"),
    Category(8, "car", "cars", "O"),
    Category(9, "bird", "birds", "O"),
    Category(10, "person", "people", "O"),
    Category(11, "butterfly", "butterflies", "O"),
    Category(12, "cat", "cats", "O"),
    Category(13, "chicken", "chickens", "O"),
    Category(14, "cow", "cows", "O"),
    Category(15, "dog", "dogs", "O"),
    Category(16, "duck", "ducks", "O"),
    Category(17, "sheep", "sheep", "O"),
    Category(18, "tree", "trees", "O"),
    Category(19, "rabbit", "rabbits", "O"),
    Category(20, "pig", "pigs", "O"),
])

NUM_CLASSES = len(DEFAULT_CATEGORIES)


# ---------------------------------------------------------------------------
# sketches

@dataclass
class SketchImage:
    """Binary line drawing; 1 = stroke pixel."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2:
            raise ValueError(f"sketch must be 2-D, got shape {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("sketch pixels must be exactly 0 or 1")
        self.pixels = arr.astype(np.uint8)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def load(cls, path) -> "SketchImage":
        """Read a 1-bit or grayscale PNG; gray < 128 counts as stroke."""
        img = Image.open(path).convert("L")
        arr = np.asarray(img)
        return cls((arr < 128).astype(np.uint8))

    def save(self, path) -> None:
        arr = np.where(self.pixels > 0, 0, 255).astype(np.uint8)
        Image.fromarray(arr, mode="L").save(path)


def drawing_mask(sketch: SketchImage) -> np.ndarray:
    """Foreground indicator grid of the sketch."""
    return sketch.pixels.copy()


# ---------------------------------------------------------------------------
# run-length encoding (column-major, first run counts zeros)

def encode_mask_rle(mask: np.ndarray) -> str:
    """Serialize a binary mask to comma-separated run lengths.

    Runs are taken in column-major order and the first count is the
    leading zero run (possibly 0 when the mask starts with a 1).
    """
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise FormatError(f"mask must be 2-D, got shape {mask.shape}")
    counts = kernels.rle_encode(mask.astype(np.uint8))
    return ",".join(str(int(c)) for c in counts)


def decode_mask_rle(rle: str, height: int, width: int) -> np.ndarray:
    """Inverse of :func:`encode_mask_rle`; validates the total pixel count."""
    text = rle.strip()
    if text:
        try:
            counts = np.array([int(tok) for tok in text.split(",")], dtype=np.int64)
        except ValueError as exc:
            raise FormatError(f"bad RLE string: {exc}") from None
    else:
        counts = np.zeros(0, dtype=np.int64)
    try:
        return kernels.rle_decode(counts, height, width)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


# ---------------------------------------------------------------------------
# instances

@dataclass
class InstanceRecord:
    """One segmented instance: bbox [x, y, H, W], class label, binary mask."""

    id: int
    label: int
    score: float
    bbox: tuple
    mask: np.ndarray

    def __post_init__(self):
        self.bbox = tuple(int(v) for v in self.bbox)
        self.mask = np.asarray(self.mask, dtype=np.uint8)

    def validate(self, image_hw=None, categories: CategoryTable = DEFAULT_CATEGORIES):
        """Check the record invariants; raises ValueError on violation."""
        x, y, bh, bw = self.bbox
        ih, iw = self.mask.shape if image_hw is None else image_hw
        if self.mask.shape != (ih, iw):
            raise ValueError(
                f"mask shape {self.mask.shape} does not match image {ih}x{iw}"
            )
        if bh < 1 or bw < 1:
            raise ValueError(f"bbox must have positive size, got H={bh} W={bw}")
        if x < 0 or y < 0 or y + bh > ih or x + bw > iw:
            raise ValueError(f"bbox {self.bbox} outside image {ih}x{iw}")
        if self.label not in categories._by_id:
            raise ValueError(f"unknown category id {self.label}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        inside = np.zeros_like(self.mask, dtype=bool)
        inside[y:y + bh, x:x + bw] = True
        if np.any((self.mask > 0) & ~inside):
            raise ValueError("mask has pixels outside bbox")


def filled_interior(instance: InstanceRecord) -> np.ndarray:
    """Stroke mask plus its enclosed regions.

    The exterior is flood-filled 4-connectedly from the bbox border; the
    returned grid is everything inside the bbox that the flood cannot
    reach. Open strokes therefore stay thin while closed loops fill.
    """
    mask = instance.mask
    if not mask.any():
        raise ValueError("filled_interior needs a non-empty mask")
    x, y, bh, bw = instance.bbox
    sub = mask[y:y + bh, x:x + bw]
    exterior = kernels.flood_exterior(sub)
    out = np.zeros_like(mask, dtype=np.uint8)
    out[y:y + bh, x:x + bw] = 1 - exterior
    return out


def instances_to_json(image_hw, instances) -> dict:
    """The instance document: {image_size, instances:[{id, label, ...}]}."""
    ih, iw = int(image_hw[0]), int(image_hw[1])
    items = []
    for inst in instances:
        items.append({
            "id": int(inst.id),
            "label": int(inst.label),
            "score": float(inst.score),
            "bbox": [int(v) for v in inst.bbox],
            "mask_rle": encode_mask_rle(inst.mask),
        })
    return {"image_size": [ih, iw], "instances": items}


def instances_from_json(doc) -> tuple:
    """Parse the instance document; returns ((H, W), [InstanceRecord])."""
    try:
        ih, iw = (int(v) for v in doc["image_size"])
        raw = doc["instances"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad instance document: {exc}") from None
    instances = []
    seen = set()
    for item in raw:
        try:
            rec = InstanceRecord(
                id=int(item["id"]),
                label=int(item["label"]),
                score=float(item["score"]),
                bbox=item["bbox"],
                mask=decode_mask_rle(item["mask_rle"], ih, iw),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"bad instance entry: {exc}") from None
        if rec.id in seen:
            raise FormatError(f"duplicate instance id {rec.id}")
        seen.add(rec.id)
        instances.append(rec)
    return (ih, iw), instances


def load_instances(path):
    with open(path) as fh:
        return instances_from_json(json.load(fh))


def save_instances(path, image_hw, instances):
    with open(path, "w") as fh:
        json.dump(instances_to_json(image_hw, instances), fh, indent=1)


# ---------------------------------------------------------------------------
# label maps (paletted PNG round trip)

# index = class id; 0 is the white background, 1..20 follow the category
# table order
LABEL_PALETTE = [
    (255, 255, 255),
    (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40),
    (148, 103, 189), (140, 86, 75), (227, 119, 194), (127, 127, 127),
    (188, 189, 34), (23, 190, 207), (174, 199, 232), (255, 187, 120),
    (152, 223, 138), (255, 152, 150), (197, 176, 213), (196, 156, 148),
    (247, 182, 210), (199, 199, 199), (219, 219, 141), (158, 218, 229),
]


def save_label_map(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= len(LABEL_PALETTE):
        raise ValueError("label ids outside the palette range")
    img = Image.fromarray(labels.astype(np.uint8), mode="P")
    img.putpalette([v for rgb in LABEL_PALETTE for v in rgb])
    img.save(path)


def load_label_map(path) -> np.ndarray:
    img = Image.open(path)
    if img.mode != "P":
        raise FormatError(f"label map must be a paletted PNG, got mode {img.mode}")
    return np.asarray(img).astype(np.int64)


# ---------------------------------------------------------------------------
# color images

def color_to_uint8(img: np.ndarray) -> np.ndarray:
    """[-1, 1] float image to uint8 bytes, round-half-even."""
    return np.clip(np.rint((np.asarray(img) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def color_from_uint8(arr: np.ndarray) -> np.ndarray:
    return np.asarray(arr).astype(np.float64) / 127.5 - 1.0


def save_color_png(path, img: np.ndarray) -> None:
    Image.fromarray(color_to_uint8(img), mode="RGB").save(path)


def load_color_png(path) -> np.ndarray:
    return color_from_uint8(np.asarray(Image.open(path).convert("RGB")))


# ---------------------------------------------------------------------------
# crop geometry, shared by the corpus exporter and the scene pipeline

def square_crop_box(bbox, pad_frac: float = 0.125, min_pad: int = 2):
    """Square window centered on a bbox with proportional padding.

    Returns (top, left, side); the window may extend past the image,
    callers pad the overhang with a fill value.
    """
    x, y, bh, bw = bbox
    side = max(bh, bw)
    pad = max(min_pad, int(round(side * pad_frac)))
    side += 2 * pad
    top = (2 * y + bh - side) // 2
    left = (2 * x + bw - side) // 2
    return top, left, side


def extract_crop(arr: np.ndarray, top: int, left: int, side: int, fill=0):
    """Copy a square window out of a 2-D or 3-D array, fill past the edge."""
    shape = (side, side) + arr.shape[2:]
    out = np.full(shape, fill, dtype=arr.dtype)
    y0, y1 = max(top, 0), min(top + side, arr.shape[0])
    x0, x1 = max(left, 0), min(left + side, arr.shape[1])
    if y0 < y1 and x0 < x1:
        out[y0 - top:y1 - top, x0 - left:x1 - left] = arr[y0:y1, x0:x1]
    return out


def paste_crop(dst: np.ndarray, patch: np.ndarray, top: int, left: int,
               where: np.ndarray = None) -> None:
    """Write a crop back at its window, optionally masked, clipped in place."""
    side = patch.shape[0]
    y0, y1 = max(top, 0), min(top + side, dst.shape[0])
    x0, x1 = max(left, 0), min(left + side, dst.shape[1])
    if y0 >= y1 or x0 >= x1:
        return
    region = patch[y0 - top:y1 - top, x0 - left:x1 - left]
    if where is None:
        dst[y0:y1, x0:x1] = region
    else:
        sel = where[y0:y1, x0:x1] > 0
        dst[y0:y1, x0:x1][sel] = region[sel]


def resize_nearest(arr: np.ndarray, out_hw) -> np.ndarray:
    """Nearest-neighbor resize with half-pixel centers; exact on flat fills."""
    oh, ow = int(out_hw[0]), int(out_hw[1])
    h, w = arr.shape[:2]
    rows = np.minimum((np.arange(oh) + 0.5) * h / oh, h - 1).astype(np.int64)
    cols = np.minimum((np.arange(ow) + 0.5) * w / ow, w - 1).astype(np.int64)
    return arr[rows][:, cols]
