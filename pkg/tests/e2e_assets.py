"""Shared end-to-end fixtures: corpora and trained desk-scale checkpoints.

Building these takes real wall-clock time (CPU training), so artifacts
are cached under .cache/ (override with SKETCHTINT_CACHE) keyed by the
corpus digest and net config digest; reruns are instant.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
CACHE = Path(os.environ.get("SKETCHTINT_CACHE", REPO / ".cache"))

TRAIN_SCENES = 500
HOLDOUT_SCENES = 50
CANVAS = 128
CROP = 64

OBJECT_ITERS = 16000
BACKGROUND_ITERS = 8000


def desk_object_net():
    from sketchtint.nets import NetConfig

    return NetConfig(image_size=CROP, base_channels=16, mlstm_cell=192,
                     lstm_steps=16, embed_dim=32, text_hidden=96,
                     noise_dim=8)


def desk_background_net():
    from sketchtint.nets import NetConfig

    return NetConfig(image_size=CANVAS, in_channels=3, backbone="residual",
                     base_channels=16, mlstm_cell=48, lstm_steps=8,
                     embed_dim=24, text_hidden=64,
                     encoder_units=(1, 1, 2, 2, 1),
                     decoder_units=(1, 2, 2, 1, 1))


def ensure_corpus(name: str, n: int, seed: int) -> Path:
    from sketchtint.synthdata import generate_corpus

    out = CACHE / name
    manifest = out / "manifest.json"
    if manifest.exists():
        with open(manifest) as fh:
            doc = json.load(fh)
        if doc.get("n") == n and doc.get("seed") == seed:
            return out
    generate_corpus(str(out), n, seed=seed, spec_kwargs={"canvas": CANVAS})
    return out


def ensure_object_checkpoint(corpus_dir: Path) -> Path:
    from sketchtint.nets import LossWeights
    from sketchtint.synthdata import build_object_examples, load_corpus
    from sketchtint.trainer import TrainConfig, train_object_colorizer

    out_dir = CACHE / f"object_{OBJECT_ITERS}"
    ckpt = out_dir / "object.pt"
    if ckpt.exists():
        return ckpt
    examples = build_object_examples(load_corpus(str(corpus_dir)), CROP)
    cfg = TrainConfig(out_dir=str(out_dir), batch_size=8,
                      max_iterations=OBJECT_ITERS, lr_g=2e-4, lr_d=1e-4,
                      seed=11, log_every=100, checkpoint_every=2000,
                      crop_size=CROP, net=desk_object_net(),
                      loss=LossWeights(div=0.1))
    train_object_colorizer(cfg, examples=examples)
    return ckpt


def ensure_background_checkpoint(corpus_dir: Path) -> Path:
    from sketchtint.nets import LossWeights
    from sketchtint.synthdata import build_background_examples, load_corpus
    from sketchtint.trainer import TrainConfig, train_background_colorizer

    out_dir = CACHE / f"background_{BACKGROUND_ITERS}"
    ckpt = out_dir / "background.pt"
    if ckpt.exists():
        return ckpt
    examples = build_background_examples(load_corpus(str(corpus_dir)))
    cfg = TrainConfig(out_dir=str(out_dir), batch_size=2,
                      max_iterations=BACKGROUND_ITERS, lr_g=2e-4, lr_d=2e-4,
                      seed=12, log_every=100, checkpoint_every=1000,
                      net=desk_background_net(),
                      loss=LossWeights.background(gan=0.3))
    train_background_colorizer(cfg, examples=examples)
    return ckpt


def ensure_segmenter_checkpoint(corpus_dir: Path) -> Path:
    from sketchtint.nets import NetConfig
    from sketchtint.synthdata import load_corpus
    from sketchtint.trainer import TrainConfig, train_toy_segmenter

    out_dir = CACHE / "segmenter_1500"
    ckpt = out_dir / "segmenter.pt"
    if ckpt.exists():
        return ckpt
    records = load_corpus(str(corpus_dir))[:200]
    scenes = []
    for rec in records:
        labels = np.zeros(rec.sketch.pixels.shape, dtype=np.int64)
        for inst in rec.instances:
            labels[inst.mask > 0] = inst.label
        scenes.append((rec.sketch.pixels, labels))
    cfg = TrainConfig(out_dir=str(out_dir), batch_size=2,
                      max_iterations=1500, lr_g=1e-4,
                      seed=13, log_every=100, checkpoint_every=500,
                      net=NetConfig())
    train_toy_segmenter(cfg, scenes=scenes)
    return ckpt


def build_all() -> dict:
    """Everything the acceptance tests need; cached after the first call."""
    CACHE.mkdir(parents=True, exist_ok=True)
    train_dir = ensure_corpus("corpus_train", TRAIN_SCENES, seed=7)
    holdout_dir = ensure_corpus("corpus_holdout", HOLDOUT_SCENES, seed=7001)
    return {
        "train_corpus": train_dir,
        "holdout_corpus": holdout_dir,
        "object_ckpt": ensure_object_checkpoint(train_dir),
        "background_ckpt": ensure_background_checkpoint(train_dir),
        "segmenter_ckpt": ensure_segmenter_checkpoint(train_dir),
    }


# ---------------------------------------------------------------------------
# dominance metric (the acceptance faithfulness surrogate)

DOMINANCE_DIST = 0.25   # max-channel distance in [-1, 1] color space
DOMINANCE_FRAC = 0.60   # fraction of region pixels that must be within


def region_dominance(image_uint8: np.ndarray, region: np.ndarray,
                     ref_color) -> float:
    """Fraction of region pixels within DOMINANCE_DIST of the reference."""
    pred = image_uint8[region > 0].astype(np.float64) / 127.5 - 1.0
    if pred.size == 0:
        return 0.0
    dist = np.abs(pred - np.asarray(ref_color)[None, :]).max(axis=1)
    return float((dist <= DOMINANCE_DIST).mean())


def evaluate_holdout(assets: dict, seed: int = 99) -> dict:
    """Dominance statistics over the held-out corpus."""
    from sketchtint.core import filled_interior
    from sketchtint.instructions import DEFAULT_LEXICON
    from sketchtint.pipeline import PipelineModels, gt_plugin, run_session
    from sketchtint.synthdata import HORIZON_FRAC, load_corpus

    models = PipelineModels.load(str(assets["object_ckpt"]),
                                 str(assets["background_ckpt"]))
    records = load_corpus(str(assets["holdout_corpus"]))
    inst_pass = inst_total = 0
    sky_pass = land_pass = 0
    details = []
    for rec in records:
        session = run_session(rec.sketch, rec.edited_text,
                              plugin=gt_plugin(rec.instances), models=models,
                              seed=seed)
        final = session.final_image
        union = np.zeros(rec.sketch.pixels.shape, dtype=np.uint8)
        for inst in rec.instances:
            union |= filled_interior(inst)
        for meta in rec.meta["instances"]:
            if not meta["instructed"]:
                continue
            inst = next(i for i in rec.instances if i.id == meta["id"])
            frac = region_dominance(
                final, filled_interior(inst),
                DEFAULT_LEXICON.reference(meta["color"]))
            inst_total += 1
            ok = frac >= DOMINANCE_FRAC
            inst_pass += ok
            details.append({"scene": rec.meta["seed"], "id": meta["id"],
                            "noun": meta["noun"], "color": meta["color"],
                            "frac": round(frac, 3), "ok": bool(ok)})
        horizon = rec.meta["horizon"]
        sky = np.zeros_like(union)
        sky[:horizon] = 1
        sky &= 1 - union
        land = np.zeros_like(union)
        land[horizon:] = 1
        land &= 1 - union
        sky_frac = region_dominance(
            final, sky, DEFAULT_LEXICON.reference(rec.meta["sky"]))
        land_frac = region_dominance(
            final, land, DEFAULT_LEXICON.reference(rec.meta["land"]))
        sky_pass += sky_frac >= DOMINANCE_FRAC
        land_pass += land_frac >= DOMINANCE_FRAC
    return {
        "instance_rate": inst_pass / max(1, inst_total),
        "instances": inst_total,
        "sky_rate": sky_pass / len(records),
        "land_rate": land_pass / len(records),
        "scenes": len(records),
        "details": details,
    }


if __name__ == "__main__":
    assets = build_all()
    for key, value in assets.items():
        print(f"{key}: {value}")
