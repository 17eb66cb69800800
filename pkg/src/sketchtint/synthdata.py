"""Deterministic synthetic scene corpus.

Scenes are crude stroke drawings with exact ground truth: every shape
is rasterized at 2-px width with integer arithmetic and no
anti-aliasing, masks are the rasterized strokes themselves, captions
come from the captioner, and color edits are injected through the same
text machinery the pipeline parses. The target image is flat fills:
sky and land split at a fixed horizon, instance interiors in their
instructed colors, part regions painted over.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .captioner import Caption, generate_caption
from .core import (
    DEFAULT_CATEGORIES,
    InstanceRecord,
    SketchImage,
    color_to_uint8,
    filled_interior,
    instances_from_json,
    instances_to_json,
    load_color_png,
    save_color_png,
)
from .instructions import DEFAULT_LEXICON, compile_edit

HORIZON_FRAC = 0.62  # sky/land split, constant across a corpus

# free-coloring fallback per class, used when a scene leaves an
# instance uninstructed
CLASS_DEFAULT_COLORS = {
    "moon": "light gray", "sun": "yellow", "cloud": "white",
    "house": "beige", "bench": "brown", "road": "gray", "bus": "orange",
    "car": "red", "bird": "light blue", "person": "pink",
    "butterfly": "purple", "cat": "light gray", "chicken": "white",
    "cow": "white", "dog": "brown", "duck": "white", "sheep": "light gray",
    "tree": "green", "rabbit": "light gray", "pig": "pink",
}

SKY_COLORS = ("blue", "light blue", "light gray")
LAND_COLORS = ("green", "dark green", "beige")

PART_NAMES = {
    "house": ("roof", "door", "windows"),
    "bus": ("windows", "wheels"),
    "car": ("windows", "wheels"),
}


@dataclass
class SceneSpec:
    seed: int
    canvas: int = 128
    min_instances: int = 2
    max_instances: int = 6
    instruct_prob: float = 0.9
    part_prob: float = 0.5
    categories: tuple = (
        "sun", "moon", "cloud", "house", "bench", "road", "bus", "car",
        "bird", "person", "tree",
    )


@dataclass
class CorpusRecord:
    sketch: SketchImage
    instances: list
    caption: Caption
    edited_text: str
    target: np.ndarray            # uint8 RGB
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# raster primitives (integer, no anti-aliasing, 2-px strokes)

def _stamp(mask, rows, cols):
    h, w = mask.shape
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    keep = (rows >= 0) & (rows < h) & (cols >= 0) & (cols < w)
    mask[rows[keep], cols[keep]] = 1


def _thicken(rows, cols):
    """1-px path to 2-px strokes via a 2x2 structuring element."""
    rr, cc = [], []
    for dr, dc in ((0, 0), (0, 1), (1, 0), (1, 1)):
        rr.append(np.asarray(rows) + dr)
        cc.append(np.asarray(cols) + dc)
    return np.concatenate(rr), np.concatenate(cc)


def _line_points(r0, c0, r1, c1):
    """Bresenham, all octants."""
    rows, cols = [], []
    dc = abs(c1 - c0)
    dr = -abs(r1 - r0)
    sc = 1 if c1 >= c0 else -1
    sr = 1 if r1 >= r0 else -1
    err = dc + dr
    r, c = r0, c0
    while True:
        rows.append(r)
        cols.append(c)
        if r == r1 and c == c1:
            break
        e2 = 2 * err
        if e2 >= dr:
            err += dr
            c += sc
        if e2 <= dc:
            err += dc
            r += sr
    return np.array(rows), np.array(cols)


def _circle_points(cr, cc, radius):
    """Midpoint circle, all octants."""
    rows, cols = [], []
    x, y = radius, 0
    err = 1 - radius
    while x >= y:
        for dr, dc in ((y, x), (y, -x), (-y, x), (-y, -x),
                       (x, y), (x, -y), (-x, y), (-x, -y)):
            rows.append(cr + dr)
            cols.append(cc + dc)
        y += 1
        if err < 0:
            err += 2 * y + 1
        else:
            x -= 1
            err += 2 * (y - x) + 1
    return np.array(rows), np.array(cols)


def draw_line(mask, r0, c0, r1, c1):
    _stamp(mask, *_thicken(*_line_points(r0, c0, r1, c1)))


def draw_circle(mask, cr, cc, radius):
    _stamp(mask, *_thicken(*_circle_points(cr, cc, radius)))


def draw_rect(mask, y0, x0, h, w):
    draw_line(mask, y0, x0, y0, x0 + w - 1)
    draw_line(mask, y0 + h - 1, x0, y0 + h - 1, x0 + w - 1)
    draw_line(mask, y0, x0, y0 + h - 1, x0)
    draw_line(mask, y0, x0 + w - 1, y0 + h - 1, x0 + w - 1)


def _rect_region(shape, y0, x0, h, w):
    region = np.zeros(shape, dtype=np.uint8)
    y1 = max(y0, 0)
    x1 = max(x0, 0)
    region[y1:max(y0 + h, 0), x1:max(x0 + w, 0)] = 1
    return region


def _triangle_region(shape, apex, left, right):
    """Filled triangle via half-plane tests on pixel centers."""
    region = np.zeros(shape, dtype=np.uint8)
    ys, xs = np.mgrid[0:shape[0], 0:shape[1]]
    pts = [apex, left, right]

    def side(p, a, b):
        return (b[1] - a[1]) * (p[0] - a[0]) - (b[0] - a[0]) * (p[1] - a[1])

    d0 = side((ys, xs), pts[0], pts[1])
    d1 = side((ys, xs), pts[1], pts[2])
    d2 = side((ys, xs), pts[2], pts[0])
    neg = (d0 <= 0) & (d1 <= 0) & (d2 <= 0)
    pos = (d0 >= 0) & (d1 >= 0) & (d2 >= 0)
    region[neg | pos] = 1
    return region


# ---------------------------------------------------------------------------
# shape builders: mask strokes + named color regions for parts

def _shape_sun(shape, rng, cy, cx, r):
    mask = np.zeros(shape, dtype=np.uint8)
    draw_circle(mask, cy, cx, r)
    for k in range(8):
        ang = k * np.pi / 4
        r0 = cy + int(round((r + 3) * np.sin(ang)))
        c0 = cx + int(round((r + 3) * np.cos(ang)))
        r1 = cy + int(round((r + 6) * np.sin(ang)))
        c1 = cx + int(round((r + 6) * np.cos(ang)))
        draw_line(mask, r0, c0, r1, c1)
    return mask, {}


def _shape_moon(shape, rng, cy, cx, r):
    mask = np.zeros(shape, dtype=np.uint8)
    shift = max(2, r // 2)
    orows, ocols = _circle_points(cy, cx, r)
    irows, icols = _circle_points(cy, cx + shift, r)
    od = (orows - cy) ** 2 + (ocols - (cx + shift)) ** 2
    keep = od >= r * r
    _stamp(mask, *_thicken(orows[keep], ocols[keep]))
    idist = (irows - cy) ** 2 + (icols - cx) ** 2
    keep = idist <= r * r
    _stamp(mask, *_thicken(irows[keep], icols[keep]))
    return mask, {}


def _shape_cloud(shape, rng, cy, cx, r):
    mask = np.zeros(shape, dtype=np.uint8)
    lobes = [(cy, cx - r, max(3, r * 2 // 3)), (cy - r // 2, cx, r),
             (cy, cx + r, max(3, r * 2 // 3))]
    for lr, lc, rad in lobes:
        rows, cols = _circle_points(lr, lc, rad)
        keep = np.ones(len(rows), dtype=bool)
        for orr, occ, orad in lobes:
            if (orr, occ) == (lr, lc):
                continue
            keep &= ((rows - orr) ** 2 + (cols - occ) ** 2) >= orad * orad
        _stamp(mask, *_thicken(rows[keep], cols[keep]))
    base = cy + max(3, r * 2 // 3)
    draw_line(mask, base, cx - r - max(3, r * 2 // 3) // 2,
              base, cx + r + max(3, r * 2 // 3) // 2)
    return mask, {}


def _shape_house(shape, rng, y0, x0, h, w):
    mask = np.zeros(shape, dtype=np.uint8)
    roof_h = h * 2 // 5
    body_y = y0 + roof_h
    body_h = h - roof_h
    draw_rect(mask, body_y, x0, body_h, w)
    apex = (y0, x0 + w // 2)
    draw_line(mask, body_y, x0, *apex)
    draw_line(mask, body_y, x0 + w - 1, *apex)
    door_w = max(4, w // 5)
    door_h = max(5, body_h // 2)
    door_x = x0 + w // 2 - door_w // 2
    door_y = y0 + h - door_h - 1
    draw_rect(mask, door_y, door_x, door_h, door_w)
    win = max(4, w // 6)
    win_y = body_y + 3
    win_x = x0 + 3
    draw_rect(mask, win_y, win_x, win, win)
    parts = {
        "roof": _triangle_region(shape, apex, (body_y, x0), (body_y, x0 + w - 1)),
        "door": _rect_region(shape, door_y, door_x, door_h, door_w),
        "windows": _rect_region(shape, win_y, win_x, win, win),
    }
    return mask, parts


def _shape_tree(shape, rng, y0, x0, h, w):
    mask = np.zeros(shape, dtype=np.uint8)
    r = max(4, min(w // 2 - 1, h * 2 // 5))
    cy = y0 + r
    cx = x0 + w // 2
    draw_circle(mask, cy, cx, r)
    trunk_w = max(3, w // 5)
    draw_rect(mask, cy + r - 1, cx - trunk_w // 2, y0 + h - (cy + r) + 1, trunk_w)
    return mask, {}


def _shape_person(shape, rng, y0, x0, h, w):
    mask = np.zeros(shape, dtype=np.uint8)
    r = max(3, h // 6)
    cx = x0 + w // 2
    draw_circle(mask, y0 + r, cx, r)
    neck = y0 + 2 * r + 1
    hip = y0 + h * 3 // 5
    draw_line(mask, neck, cx, hip, cx)
    arm_y = neck + max(1, (hip - neck) // 3)
    draw_line(mask, arm_y, x0, arm_y, x0 + w - 1)
    draw_line(mask, hip, cx, y0 + h - 1, x0 + 1)
    draw_line(mask, hip, cx, y0 + h - 1, x0 + w - 2)
    return mask, {}


def _shape_car(shape, rng, y0, x0, h, w):
    mask = np.zeros(shape, dtype=np.uint8)
    wheel_r = max(2, h // 5)
    body_h = h - wheel_r - 1
    cab_h = body_h * 2 // 5
    draw_rect(mask, y0 + cab_h, x0, body_h - cab_h, w)
    cab_x = x0 + w // 4
    cab_w = w // 2
    draw_rect(mask, y0, cab_x, cab_h + 2, cab_w)
    wy = y0 + body_h
    for wx in (x0 + w // 4, x0 + w * 3 // 4):
        draw_circle(mask, wy, wx, wheel_r)
    parts = {
        "windows": _rect_region(shape, y0, cab_x, cab_h + 2, cab_w),
        "wheels": _wheel_region(shape, [(wy, x0 + w // 4), (wy, x0 + w * 3 // 4)],
                                wheel_r),
    }
    return mask, parts


def _wheel_region(shape, centers, r):
    region = np.zeros(shape, dtype=np.uint8)
    ys, xs = np.mgrid[0:shape[0], 0:shape[1]]
    for cy, cx in centers:
        region[(ys - cy) ** 2 + (xs - cx) ** 2 <= (r + 1) ** 2] = 1
    return region


def _shape_bus(shape, rng, y0, x0, h, w):
    mask = np.zeros(shape, dtype=np.uint8)
    wheel_r = max(2, h // 6)
    body_h = h - wheel_r - 1
    draw_rect(mask, y0, x0, body_h, w)
    win = max(3, body_h // 3)
    wins = np.zeros(shape, dtype=np.uint8)
    for k in range(3):
        wx = x0 + 3 + k * (w - 6) // 3
        draw_rect(mask, y0 + 3, wx, win, win)
        wins |= _rect_region(shape, y0 + 3, wx, win, win)
    wy = y0 + body_h
    centers = [(wy, x0 + w // 4), (wy, x0 + w * 3 // 4)]
    for cy, cx in centers:
        draw_circle(mask, cy, cx, wheel_r)
    parts = {"windows": wins, "wheels": _wheel_region(shape, centers, wheel_r)}
    return mask, parts


def _shape_bench(shape, rng, y0, x0, h, w):
    mask = np.zeros(shape, dtype=np.uint8)
    seat_y = y0 + h // 2
    draw_rect(mask, seat_y, x0, max(3, h // 5), w)
    draw_line(mask, y0, x0 + 1, seat_y, x0 + 1)
    draw_line(mask, y0, x0 + w - 2, seat_y, x0 + w - 2)
    draw_line(mask, y0, x0 + 1, y0, x0 + w - 2)
    for lx in (x0 + 2, x0 + w - 3):
        draw_line(mask, seat_y + max(3, h // 5), lx, y0 + h - 1, lx)
    return mask, {}


def _shape_road(shape, rng, y0, x0, h, w):
    mask = np.zeros(shape, dtype=np.uint8)
    draw_rect(mask, y0, x0, h, w)
    mid = y0 + h // 2
    seg = max(4, w // 10)
    x = x0 + seg
    while x + seg < x0 + w - seg:
        draw_line(mask, mid, x, mid, x + seg // 2)
        x += seg * 2
    return mask, {}


def _shape_bird(shape, rng, cy, cx, r):
    mask = np.zeros(shape, dtype=np.uint8)
    draw_line(mask, cy, cx - r, cy - r // 2, cx - r // 4)
    draw_line(mask, cy - r // 2, cx - r // 4, cy, cx)
    draw_line(mask, cy, cx, cy - r // 2, cx + r // 4)
    draw_line(mask, cy - r // 2, cx + r // 4, cy, cx + r)
    return mask, {}


def _shape_blob(shape, rng, y0, x0, h, w):
    """Fallback closed outline for categories without a dedicated shape."""
    mask = np.zeros(shape, dtype=np.uint8)
    ry = max(3, h // 2 - 1)
    rx = max(3, w // 2 - 1)
    cy, cx = y0 + h // 2, x0 + w // 2
    ts = np.linspace(0.0, 2 * np.pi, max(24, 4 * (rx + ry)), endpoint=False)
    rows = cy + np.round(ry * np.sin(ts)).astype(int)
    cols = cx + np.round(rx * np.cos(ts)).astype(int)
    _stamp(mask, *_thicken(rows, cols))
    return mask, {}


# ---------------------------------------------------------------------------
# scene assembly

def _tight_bbox(mask):
    rows, cols = np.nonzero(mask)
    y, x = int(rows.min()), int(cols.min())
    return (x, y, int(rows.max()) - y + 1, int(cols.max()) - x + 1)


def _make_instance(shape, rng, noun, canvas, horizon):
    """Rasterize one instance of the named category; returns (mask, parts)."""
    if noun == "sun" or noun == "moon":
        r = int(rng.integers(5, 9))
        cy = int(rng.integers(r + 8, max(r + 9, horizon // 2)))
        cx = int(rng.integers(r + 8, canvas - r - 8))
        return (_shape_sun if noun == "sun" else _shape_moon)(shape, rng, cy, cx, r)
    if noun == "cloud":
        r = int(rng.integers(4, 7))
        cy = int(rng.integers(r + 6, max(r + 7, horizon - r - 8)))
        cx = int(rng.integers(2 * r + 6, canvas - 2 * r - 6))
        return _shape_cloud(shape, rng, cy, cx, r)
    if noun == "bird":
        r = int(rng.integers(4, 7))
        cy = int(rng.integers(r + 4, max(r + 5, horizon - 6)))
        cx = int(rng.integers(r + 4, canvas - r - 4))
        return _shape_bird(shape, rng, cy, cx, r)
    if noun == "road":
        h = int(rng.integers(8, 12))
        y0 = int(rng.integers(horizon + 2, canvas - h - 2))
        return _shape_road(shape, rng, y0, 1, h, canvas - 2)
    sizes = {
        "house": (30, 44), "bench": (12, 18), "bus": (18, 26), "car": (14, 20),
        "person": (18, 26), "tree": (22, 34),
    }
    lo, hi = sizes.get(noun, (14, 22))
    h = int(rng.integers(lo, hi))
    w = int(round(h * {"house": 1.0, "bench": 1.8, "bus": 1.9, "car": 1.6,
                       "person": 0.45, "tree": 0.7}.get(noun, 1.2)))
    w = max(8, w)
    y0 = int(rng.integers(max(2, horizon - h // 3),
                          max(3, canvas - h - 2)))
    x0 = int(rng.integers(2, max(3, canvas - w - 2)))
    fn = {
        "house": _shape_house, "bench": _shape_bench, "bus": _shape_bus,
        "car": _shape_car, "person": _shape_person, "tree": _shape_tree,
    }.get(noun, _shape_blob)
    return fn(shape, rng, y0, x0, h, w)


def generate_scene(spec: SceneSpec, table=DEFAULT_CATEGORIES,
                   lexicon=DEFAULT_LEXICON) -> CorpusRecord:
    """One deterministic scene: sketch, instances, caption, edit, target."""
    rng = np.random.default_rng([2024, spec.seed])
    canvas = spec.canvas
    shape = (canvas, canvas)
    horizon = int(canvas * HORIZON_FRAC)

    wanted = []
    if "sun" in spec.categories or "moon" in spec.categories:
        wanted.append("sun" if rng.random() < 0.6 else "moon")
    if "cloud" in spec.categories and rng.random() < 0.6:
        wanted.append("cloud")
    ground = [c for c in spec.categories
              if c not in ("sun", "moon", "cloud", "bird")]
    n_ground = min(3, int(rng.integers(
        max(1, spec.min_instances - len(wanted)),
        spec.max_instances - len(wanted) + 1)))
    for _ in range(n_ground):
        wanted.append(ground[int(rng.integers(0, len(ground)))])
    if "bird" in spec.categories and rng.random() < 0.3:
        wanted.append("bird")
    # big shapes claim space first; at most one road fits a scene
    if wanted.count("road") > 1:
        first = wanted.index("road")
        wanted = [c for k, c in enumerate(wanted)
                  if c != "road" or k == first]
    rank = {"road": 0, "house": 1, "bus": 2, "tree": 3, "bench": 4,
            "car": 5, "person": 6}
    wanted.sort(key=lambda c: rank.get(c, 8))

    occupied = np.zeros(shape, dtype=np.uint8)
    instances = []
    part_regions = {}
    next_id = 1
    for noun in wanted:
        placed = False
        for _attempt in range(100):
            mask, parts = _make_instance(shape, rng, noun, canvas, horizon)
            grown = np.pad(mask, 2)
            grown = (grown[:-4, :-4] | grown[4:, 4:] | grown[:-4, 4:]
                     | grown[4:, :-4] | mask)
            if not (grown & occupied).any():
                placed = True
                break
        if not placed:
            raise RuntimeError(f"could not place a {noun} after 100 attempts")
        occupied |= grown
        cat = table.by_form(noun)
        inst = InstanceRecord(id=next_id, label=cat.id, score=1.0,
                              bbox=_tight_bbox(mask), mask=mask)
        instances.append(inst)
        part_regions[next_id] = parts
        next_id += 1

    sketch = SketchImage(np.clip(
        np.sum([i.mask for i in instances], axis=0), 0, 1).astype(np.uint8))
    caption = generate_caption(instances, table, image_size=shape)

    # inject colors sentence by sentence
    phrases = lexicon.phrases()
    edited_sents = []
    body_colors = {}       # sentence id -> phrase
    part_colors = {}       # sentence id -> [(part, phrase)]
    for sent in caption.sentences:
        text = sent.text
        if rng.random() < spec.instruct_prob:
            color = phrases[int(rng.integers(0, len(phrases)))]
            slot = next(sl for sl in sent.slots if sl.role == "category")
            text = text[:slot.start] + color + " " + text[slot.start:]
            body_colors[sent.id] = color
        names = _sentence_parts(sent, instances, table)
        chosen = []
        for name in names:
            if rng.random() < spec.part_prob:
                color = phrases[int(rng.integers(0, len(phrases)))]
                chosen.append((name, color))
        if chosen:
            extra = " ".join(f"with {c} {n}" for n, c in chosen)
            text = text[:-1] + " " + extra + "."
            part_colors[sent.id] = chosen
        edited_sents.append(text)

    sky = SKY_COLORS[int(rng.integers(0, len(SKY_COLORS)))]
    land = LAND_COLORS[int(rng.integers(0, len(LAND_COLORS)))]
    edited_sents.append(f"The sky is {sky} and the land is {land}.")
    edited_text = " ".join(edited_sents)

    # the corpus validates its own edits through the real compiler
    compile_edit(caption, edited_text, lexicon=lexicon, table=table)

    target = _render_target(shape, horizon, sky, land, instances,
                            part_regions, caption, body_colors, part_colors,
                            table, lexicon)

    meta = {
        "seed": spec.seed,
        "canvas": canvas,
        "horizon": horizon,
        "sky": sky,
        "land": land,
        "instances": [
            {
                "id": inst.id,
                "noun": table.by_id(inst.label).noun,
                "color": _instance_color(inst.id, caption, body_colors),
                "parts": {
                    name: color
                    for sid, pairs in part_colors.items()
                    for name, color in pairs
                    if inst.id in _sentence_ids(caption, sid)
                },
                "instructed": _instance_color(inst.id, caption, body_colors)
                is not None,
            }
            for inst in instances
        ],
        "foreground_ratio": float(sketch.pixels.mean()),
    }
    return CorpusRecord(sketch=sketch, instances=instances, caption=caption,
                        edited_text=edited_text, target=target, meta=meta)


def _sentence_ids(caption, sid):
    for s in caption.sentences:
        if s.id == sid:
            return s.instance_ids
    return []


def _sentence_parts(sent, instances, table):
    """Part names available on the instances a sentence describes."""
    by_id = {i.id: i for i in instances}
    nouns = {table.by_id(by_id[iid].label).noun for iid in sent.instance_ids}
    if len(nouns) != 1:
        return ()
    return PART_NAMES.get(nouns.pop(), ())


def _instance_color(iid, caption, body_colors):
    for sent in caption.sentences:
        if iid in sent.instance_ids:
            return body_colors.get(sent.id)
    return None


def _paint(img, region, rgb_uint8):
    img[region > 0] = rgb_uint8


def _ref_uint8(lexicon, phrase):
    return color_to_uint8(np.array(lexicon.reference(phrase))[None, None, :])[0, 0]


def _render_target(shape, horizon, sky, land, instances, part_regions,
                   caption, body_colors, part_colors, table, lexicon):
    img = np.zeros(shape + (3,), dtype=np.uint8)
    img[:horizon] = _ref_uint8(lexicon, sky)
    img[horizon:] = _ref_uint8(lexicon, land)
    order = sorted(instances, key=lambda i: (-int(i.mask.sum()), i.id))
    for inst in order:
        color = _instance_color(inst.id, caption, body_colors)
        if color is None:
            color = CLASS_DEFAULT_COLORS[table.by_id(inst.label).noun]
        fill = filled_interior(inst)
        _paint(img, fill, _ref_uint8(lexicon, color))
        for sid, pairs in part_colors.items():
            if inst.id not in _sentence_ids(caption, sid):
                continue
            for name, pcolor in pairs:
                region = part_regions[inst.id].get(name)
                if region is not None:
                    _paint(img, region & fill, _ref_uint8(lexicon, pcolor))
    return img


def object_target(inst, part_regions_for_inst, body_color, part_color_pairs,
                  shape, table, lexicon):
    """Instance colors on white, the object-stage supervision image."""
    img = np.full(shape + (3,), 255, dtype=np.uint8)
    color = body_color or CLASS_DEFAULT_COLORS[table.by_id(inst.label).noun]
    fill = filled_interior(inst)
    _paint(img, fill, _ref_uint8(lexicon, color))
    for name, pcolor in part_color_pairs:
        region = part_regions_for_inst.get(name)
        if region is not None:
            _paint(img, region & fill, _ref_uint8(lexicon, pcolor))
    return img


# ---------------------------------------------------------------------------
# training examples

def build_object_examples(records, crop_size: int, table=DEFAULT_CATEGORIES,
                          lexicon=DEFAULT_LEXICON):
    """Per-instance square crops with conditioning text and class label.

    Crops follow the same geometry the pipeline uses at inference:
    square window around the bbox, white past the edge, nearest resize.
    """
    from .core import extract_crop, resize_nearest, square_crop_box
    from .instructions import compile_edit, conditioning_for_instance

    examples = []
    for rec in records:
        compiled = compile_edit(rec.caption, rec.edited_text,
                                lexicon=lexicon, table=table)
        shape = rec.sketch.pixels.shape
        part_regions = _recover_part_regions(rec, table)
        for inst in rec.instances:
            meta = next(m for m in rec.meta["instances"] if m["id"] == inst.id)
            obj_img = object_target(inst, part_regions.get(inst.id, {}),
                                    meta["color"],
                                    list(meta["parts"].items()),
                                    shape, table, lexicon)
            top, left, side = square_crop_box(inst.bbox)
            sk = extract_crop(rec.sketch.pixels, top, left, side, fill=0)
            tg = extract_crop(obj_img, top, left, side, fill=255)
            examples.append({
                "sketch": resize_nearest(sk, (crop_size, crop_size)),
                "target": resize_nearest(tg, (crop_size, crop_size)),
                "text": conditioning_for_instance(inst.id, compiled),
                "label": inst.label,
            })
    return examples


def _recover_part_regions(rec, table):
    """Part regions for a loaded record, from the stored part colors.

    Regions are re-derived from the target image: part pixels are the
    interior pixels whose target color equals the recorded part color
    and differs from the body color.
    """
    regions = {}
    for meta in rec.meta["instances"]:
        if not meta["parts"]:
            continue
        inst = next(i for i in rec.instances if i.id == meta["id"])
        fill = filled_interior(inst)
        per = {}
        for name, phrase in meta["parts"].items():
            rgb = _ref_uint8(DEFAULT_LEXICON, phrase)
            hit = (rec.target == rgb).all(axis=2) & (fill > 0)
            per[name] = hit.astype(np.uint8)
        regions[meta["id"]] = per
    return regions


def build_background_examples(records, table=DEFAULT_CATEGORIES,
                              lexicon=DEFAULT_LEXICON):
    """Scene-level pairs: objects composited on white in, full scene out."""
    from .instructions import background_conditioning, compile_edit

    examples = []
    for rec in records:
        compiled = compile_edit(rec.caption, rec.edited_text,
                                lexicon=lexicon, table=table)
        canvas = np.full(rec.target.shape, 255, dtype=np.uint8)
        interiors = np.zeros(rec.sketch.pixels.shape, dtype=np.uint8)
        order = sorted(rec.instances, key=lambda i: (-int(i.mask.sum()), i.id))
        for inst in order:
            fill = filled_interior(inst)
            canvas[fill > 0] = rec.target[fill > 0]
            interiors |= fill
        examples.append({
            "canvas": canvas,
            "target": rec.target,
            "text": background_conditioning(compiled),
            "interiors": interiors,
        })
    return examples


# ---------------------------------------------------------------------------
# corpus on disk

def generate_corpus(out_dir, n: int, seed: int = 7, spec_kwargs: dict = None,
                    table=DEFAULT_CATEGORIES, lexicon=DEFAULT_LEXICON):
    """Write n scenes; placement failures retry on derived seeds."""
    os.makedirs(out_dir, exist_ok=True)
    spec_kwargs = spec_kwargs or {}
    records = []
    manifest = {"n": n, "seed": seed, "records": []}
    for i in range(n):
        rec = None
        for retry in range(10):
            try:
                rec = generate_scene(
                    SceneSpec(seed=seed * 1_000_003 + i * 1000 + retry,
                              **spec_kwargs),
                    table=table, lexicon=lexicon)
                break
            except RuntimeError:
                continue
        if rec is None:
            raise RuntimeError(f"scene {i} failed to place after 10 retries")
        stem = f"{i:04d}"
        rec.sketch.save(os.path.join(out_dir, f"{stem}_sketch.png"))
        save_color_png(os.path.join(out_dir, f"{stem}_target.png"),
                       rec.target.astype(np.float64) / 127.5 - 1.0)
        with open(os.path.join(out_dir, f"{stem}_instances.json"), "w") as fh:
            json.dump(instances_to_json(rec.sketch.pixels.shape, rec.instances), fh)
        from .captioner import caption_to_json
        with open(os.path.join(out_dir, f"{stem}_caption.json"), "w") as fh:
            json.dump(caption_to_json(rec.caption), fh)
        with open(os.path.join(out_dir, f"{stem}_edit.txt"), "w") as fh:
            fh.write(rec.edited_text)
        with open(os.path.join(out_dir, f"{stem}_meta.json"), "w") as fh:
            json.dump(rec.meta, fh, indent=1)
        manifest["records"].append(stem)
        records.append(rec)
    manifest["mean_foreground_ratio"] = float(
        np.mean([r.meta["foreground_ratio"] for r in records]))
    manifest["digest"] = corpus_digest(records)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)
    return records


def corpus_digest(records) -> str:
    h = hashlib.sha256()
    for rec in records:
        h.update(rec.sketch.pixels.tobytes())
        h.update(rec.target.tobytes())
        h.update(rec.edited_text.encode())
    return h.hexdigest()


def load_corpus(corpus_dir):
    """Read back a generated corpus directory."""
    from .captioner import caption_from_json

    with open(os.path.join(corpus_dir, "manifest.json")) as fh:
        manifest = json.load(fh)
    records = []
    for stem in manifest["records"]:
        sketch = SketchImage.load(os.path.join(corpus_dir, f"{stem}_sketch.png"))
        target = color_to_uint8(
            load_color_png(os.path.join(corpus_dir, f"{stem}_target.png")))
        with open(os.path.join(corpus_dir, f"{stem}_instances.json")) as fh:
            _, instances = instances_from_json(json.load(fh))
        with open(os.path.join(corpus_dir, f"{stem}_caption.json")) as fh:
            caption = caption_from_json(json.load(fh))
        with open(os.path.join(corpus_dir, f"{stem}_edit.txt")) as fh:
            edited = fh.read()
        with open(os.path.join(corpus_dir, f"{stem}_meta.json")) as fh:
            meta = json.load(fh)
        records.append(CorpusRecord(sketch=sketch, instances=instances,
                                    caption=caption, edited_text=edited,
                                    target=target, meta=meta))
    return records


def load_external(instances_path, images_dir, splits=None):
    """Validated corpus from user-supplied files in the core JSON format."""
    with open(instances_path) as fh:
        docs = json.load(fh)
    if not isinstance(docs, list):
        docs = [docs]
    scenes = []
    for k, doc in enumerate(docs):
        try:
            (ih, iw), instances = instances_from_json(doc)
            for inst in instances:
                inst.validate((ih, iw))
        except Exception as exc:
            raise ValueError(f"scene {k}: {exc}") from exc
        name = doc.get("sketch")
        sketch = None
        if name:
            sketch = SketchImage.load(os.path.join(images_dir, name))
            if sketch.pixels.shape != (ih, iw):
                raise ValueError(f"scene {k}: sketch size mismatch")
        scenes.append({"image_size": (ih, iw), "instances": instances,
                       "sketch": sketch})
    if splits is not None:
        total = sum(splits.values())
        if total != len(scenes):
            raise ValueError(
                f"split sizes sum to {total}, corpus has {len(scenes)}")
        out = {}
        start = 0
        for name, count in splits.items():
            out[name] = scenes[start:start + count]
            start += count
        return out
    return scenes
