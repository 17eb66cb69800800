"""End-to-end scene colorization: segment, caption, compile, colorize.

The colorize step is the two-stage scheme: each instance is cropped to
a padded square, colorized at the object net's resolution under its
conditioning clause, resized back, and composited inside its filled
interior onto a white canvas — larger footprints first so smaller
objects end up on top — then the background net paints around the
composite and the object pixels are re-imposed on its output.
"""

from __future__ import annotations

import io
import uuid
from dataclasses import dataclass, field

import numpy as np
import torch

from .captioner import Caption, generate_caption
from .core import (
    BACKGROUND_ID,
    DEFAULT_CATEGORIES,
    InstanceRecord,
    SketchImage,
    color_to_uint8,
    extract_crop,
    filled_interior,
    paste_crop,
    resize_nearest,
    square_crop_box,
)
from .edgelist import cluster_pixels, extract_skeleton, majority_relabel
from .instructions import (
    CompileError,
    CompileResult,
    background_conditioning,
    compile_edit,
    conditioning_for_instance,
)
from .nets import Generator, NetConfig, Vocabulary, load_checkpoint

STAGES = ("new", "segment", "caption", "compile", "colorize")


class StageError(Exception):
    """A pipeline failure tagged with the stage that produced it."""

    def __init__(self, stage: str, code: str, message: str, detail: dict = None):
        super().__init__(message)
        self.stage = stage
        self.code = code
        self.message = message
        self.detail = detail or {}

    def to_json(self):
        out = {"stage": self.stage, "code": self.code,
               "message": self.message}
        for key, value in self.detail.items():
            out.setdefault(key, value)
        return out


@dataclass
class SceneSession:
    """One sketch's working state; the stage tag only moves forward."""

    sketch: SketchImage
    session_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    stage: str = "new"
    instances: list = field(default_factory=list)
    caption: Caption = None
    edited_text: str = None
    compiled: CompileResult = None
    partial_canvas: np.ndarray = None
    final_image: np.ndarray = None
    skip_log: list = field(default_factory=list)

    def reach(self, stage: str):
        """Move the stage tag forward; re-running a stage keeps the tag."""
        if STAGES.index(stage) > STAGES.index(self.stage):
            self.stage = stage


# ---------------------------------------------------------------------------
# segmenter plug-ins

def gt_plugin(instances):
    """Ground-truth plug-in: echoes known instances, no semantic logits."""
    def plugin(sketch):
        return [InstanceRecord(id=i.id, label=i.label, score=i.score,
                               bbox=i.bbox, mask=i.mask.copy())
                for i in instances], None
    return plugin


def toy_plugin(checkpoint_path, num_classes: int = None):
    """Instance proposals from the toy per-pixel classifier.

    Argmax on stroke pixels, then each 8-connected same-class component
    becomes an instance scored by its mean class probability.
    """
    from scipy import ndimage

    from .segmetrics import ToySegmenter, toy_segmenter_infer

    payload = load_checkpoint(checkpoint_path)
    model = ToySegmenter(num_classes=num_classes
                         or len(DEFAULT_CATEGORIES.ids()))
    model.load_state_dict(payload["models"]["segmenter"])
    model.eval()

    def plugin(sketch):
        pred = toy_segmenter_infer(model, sketch)
        logits = pred.logits
        probs = np.exp(logits - logits.max(axis=2, keepdims=True))
        probs /= probs.sum(axis=2, keepdims=True)
        labels = np.argmax(logits, axis=2)
        labels[sketch.pixels == 0] = BACKGROUND_ID
        instances = []
        next_id = 1
        eight = np.ones((3, 3), dtype=int)
        for cls in np.unique(labels):
            if cls == BACKGROUND_ID:
                continue
            comp, n = ndimage.label(labels == cls, structure=eight)
            for k in range(1, n + 1):
                mask = (comp == k).astype(np.uint8)
                rows, cols = np.nonzero(mask)
                score = float(probs[rows, cols, cls].mean())
                bbox = (int(cols.min()), int(rows.min()),
                        int(rows.max() - rows.min() + 1),
                        int(cols.max() - cols.min() + 1))
                instances.append(InstanceRecord(
                    id=next_id, label=int(cls), score=score, bbox=bbox,
                    mask=mask))
                next_id += 1
        return instances, logits
    return plugin


# ---------------------------------------------------------------------------
# stage: segment

def segment(sketch: SketchImage, plugin, *, refine: bool = True,
            combine: bool = False, skip_log: list = None):
    """Run the plug-in, keep masks on strokes, vote per stroke cluster.

    Optionally intersects masks with the semantic argmax map when the
    plug-in supplies logits.
    """
    try:
        instances, logits = plugin(sketch)
    except Exception as exc:
        raise StageError("segment", "plugin_failure", str(exc)) from exc

    drawing = sketch.pixels
    for inst in instances:
        inst.mask = (inst.mask & (drawing > 0)).astype(np.uint8)

    if refine and instances:
        id_map = np.zeros(drawing.shape, dtype=np.int64)
        for inst in sorted(instances, key=lambda i: i.id):
            id_map[inst.mask > 0] = inst.id
        skeleton = extract_skeleton(sketch)
        if skeleton.segments:
            clusters = cluster_pixels(sketch, skeleton)
            id_map = majority_relabel(id_map, clusters)
        for inst in instances:
            inst.mask = ((id_map == inst.id) & (drawing > 0)).astype(np.uint8)

    if combine and logits is not None:
        from .segmetrics import combine_semantic_instance

        semantic = np.argmax(logits, axis=2)
        semantic[drawing == 0] = BACKGROUND_ID
        instances = combine_semantic_instance(instances, semantic)

    kept = []
    for inst in instances:
        rows, cols = np.nonzero(inst.mask)
        if rows.size == 0:
            if skip_log is not None:
                skip_log.append({"stage": "segment", "instance_id": inst.id,
                                 "reason": "mask emptied by refinement"})
            continue
        inst.bbox = (int(cols.min()), int(rows.min()),
                     int(rows.max() - rows.min() + 1),
                     int(cols.max() - cols.min() + 1))
        kept.append(inst)
    return kept


# ---------------------------------------------------------------------------
# model bundles

class GeneratorBundle:
    """A trained generator checkpoint ready for inference."""

    def __init__(self, checkpoint_path, use_noise: bool):
        try:
            payload = load_checkpoint(checkpoint_path)
        except FileNotFoundError as exc:
            raise StageError("colorize", "missing_checkpoint",
                             f"checkpoint not found: {checkpoint_path}") from exc
        meta = payload.get("meta") or {}
        if "net" not in meta or payload.get("vocab") is None:
            raise StageError("colorize", "bad_checkpoint",
                             f"{checkpoint_path} lacks net config or vocab")
        net = meta["net"]
        for key in ("encoder_units", "decoder_units", "betas"):
            if key in net and isinstance(net[key], list):
                net[key] = tuple(net[key])
        self.config = NetConfig(**net)
        self.vocab = Vocabulary.from_json(payload["vocab"])
        self.generator = Generator(self.config, use_noise=use_noise)
        self.generator.load_state_dict(payload["models"]["generator"])
        self.generator.eval()

    def run(self, image: np.ndarray, text: str, noise=None) -> np.ndarray:
        """float image (C,H,W in [-1,1]) + clause -> uint8 HWC output."""
        tokens = torch.from_numpy(
            np.asarray([self.vocab.encode(text, self.config.lstm_steps)]))
        x = torch.from_numpy(image[None].astype(np.float32))
        with torch.no_grad():
            if noise is not None:
                out = self.generator(x, tokens,
                                     noise=torch.from_numpy(
                                         noise.astype(np.float32)))
            else:
                out = self.generator(x, tokens)
        return color_to_uint8(out[0].permute(1, 2, 0).numpy())


@dataclass
class PipelineModels:
    object_bundle: GeneratorBundle
    background_bundle: GeneratorBundle

    @classmethod
    def load(cls, object_checkpoint, background_checkpoint):
        return cls(GeneratorBundle(object_checkpoint, use_noise=True),
                   GeneratorBundle(background_checkpoint, use_noise=False))


# ---------------------------------------------------------------------------
# stage: colorize

def _instance_noise(seed: int, instance_id: int, dim: int) -> np.ndarray:
    rng = np.random.default_rng([seed, instance_id])
    return rng.standard_normal((1, dim)).astype(np.float32)


def colorize_scene(session: SceneSession, models: PipelineModels,
                   seed: int = 0) -> np.ndarray:
    """Two-stage colorization of a compiled session; returns uint8 RGB."""
    if session.compiled is None:
        raise StageError("colorize", "not_compiled",
                         "session has no compiled instructions")
    sketch = session.sketch.pixels
    h, w = sketch.shape
    if h != w:
        raise StageError("colorize", "bad_canvas",
                         f"sketch must be square, got {h}x{w}")
    obj = models.object_bundle
    crop_size = obj.config.image_size

    canvas = np.full((h, w, 3), 255, dtype=np.uint8)
    union = np.zeros((h, w), dtype=np.uint8)
    # larger footprints first so smaller objects paint on top
    order = sorted(session.instances,
                   key=lambda i: (-int(filled_interior(i).sum()), i.id))
    for inst in order:
        x, y, bh, bw = inst.bbox
        if bh < 2 or bw < 2:
            session.skip_log.append({
                "stage": "colorize", "instance_id": inst.id,
                "reason": f"degenerate bbox {bh}x{bw}"})
            continue
        fill = filled_interior(inst)
        if not fill.any():
            session.skip_log.append({
                "stage": "colorize", "instance_id": inst.id,
                "reason": "empty filled interior"})
            continue
        try:
            text = conditioning_for_instance(inst.id, session.compiled)
        except ValueError:
            text = ""
        top, left, side = square_crop_box(inst.bbox)
        sk_crop = extract_crop(sketch, top, left, side, fill=0)
        sk_small = resize_nearest(sk_crop, (crop_size, crop_size))
        x_in = (1.0 - 2.0 * sk_small.astype(np.float32))[None]
        out_small = obj.run(x_in, text,
                            noise=_instance_noise(seed, inst.id,
                                                  obj.config.noise_dim))
        out_patch = resize_nearest(out_small, (side, side))
        paste_crop(canvas, out_patch, top, left, where=fill)
        union |= fill

    session.partial_canvas = canvas.copy()
    bg = models.background_bundle
    bg_in = np.transpose(canvas.astype(np.float32) / 127.5 - 1.0, (2, 0, 1))
    final = bg.run(bg_in, background_conditioning(session.compiled))
    final[union > 0] = canvas[union > 0]
    session.final_image = final
    session.reach("colorize")
    return final


# ---------------------------------------------------------------------------
# full session

def run_session(sketch: SketchImage, edited_text: str = None, *, plugin,
                models: PipelineModels, table=DEFAULT_CATEGORIES,
                refine: bool = True, combine: bool = False,
                seed: int = 0) -> SceneSession:
    """segment -> caption -> compile -> colorize, artifacts retained."""
    session = SceneSession(sketch=sketch)
    session.instances = segment(sketch, plugin, refine=refine,
                                combine=combine, skip_log=session.skip_log)
    session.reach("segment")

    try:
        session.caption = generate_caption(session.instances, table,
                                           image_size=sketch.pixels.shape)
    except Exception as exc:
        raise StageError("caption", "caption_failure", str(exc)) from exc
    session.reach("caption")

    compile_session(session, edited_text, table=table)
    colorize_scene(session, models, seed=seed)
    return session


def compile_session(session: SceneSession, edited_text: str = None,
                    table=DEFAULT_CATEGORIES) -> CompileResult:
    """Align and compile an edit against the session caption."""
    if session.caption is None:
        raise StageError("compile", "no_caption",
                         "session has no caption to align against")
    session.edited_text = (edited_text if edited_text is not None
                           else session.caption.text)
    try:
        session.compiled = compile_edit(session.caption, session.edited_text,
                                        table=table)
    except CompileError as exc:
        raise StageError("compile", exc.code, str(exc),
                         detail=exc.to_json()) from exc
    session.reach("compile")
    return session.compiled


def result_png_bytes(session: SceneSession) -> bytes:
    from PIL import Image

    if session.final_image is None:
        raise StageError("colorize", "no_result",
                         "session has no colorization result")
    buf = io.BytesIO()
    Image.fromarray(session.final_image, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def overlay_png_bytes(session: SceneSession, instance_id: int) -> bytes:
    """RGBA highlight of one instance's filled interior, for the UI."""
    from PIL import Image

    from .core import LABEL_PALETTE

    matches = [i for i in session.instances if i.id == instance_id]
    if not matches:
        raise StageError("segment", "unknown_instance",
                         f"no instance with id {instance_id}")
    inst = matches[0]
    fill = filled_interior(inst)
    rgba = np.zeros(fill.shape + (4,), dtype=np.uint8)
    color = LABEL_PALETTE[inst.label % len(LABEL_PALETTE)]
    rgba[fill > 0, 0] = color[0]
    rgba[fill > 0, 1] = color[1]
    rgba[fill > 0, 2] = color[2]
    rgba[fill > 0, 3] = 150
    rgba[inst.mask > 0, 3] = 230
    buf = io.BytesIO()
    Image.fromarray(rgba, mode="RGBA").save(buf, format="PNG")
    return buf.getvalue()
