"""Command-line entry points mirroring the library operations."""

from __future__ import annotations

import json
import sys

import click

from .core import (
    DEFAULT_CATEGORIES,
    SketchImage,
    load_instances,
    load_label_map,
    save_instances,
    save_label_map,
)


@click.group()
def main():
    """Language-guided scene-sketch colorization toolkit."""


@main.command()
@click.option("--n", type=int, required=True, help="number of scenes")
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--canvas", type=int, default=128, show_default=True)
def synth(n, seed, out_dir, canvas):
    """Generate a synthetic corpus with exact ground truth."""
    from .synthdata import generate_corpus

    records = generate_corpus(out_dir, n, seed=seed,
                              spec_kwargs={"canvas": canvas})
    click.echo(f"wrote {len(records)} scenes to {out_dir}")


@main.command()
@click.option("--sketch", "sketch_path", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def refine(sketch_path, labels_path, out_path):
    """Re-label stroke clusters by majority vote over a label map."""
    from .edgelist import refine_labels

    sketch = SketchImage.load(sketch_path)
    labels = load_label_map(labels_path)
    diagnostics = []
    refined = refine_labels(sketch, labels, diagnostics=diagnostics)
    save_label_map(out_path, refined)
    click.echo(f"refined label map written to {out_path}")
    if diagnostics:
        click.echo(f"abstained clusters (all-background): {diagnostics}")


@main.command("eval-ap")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), default=None)
def eval_ap(pred_path, gt_path, out_path):
    """Mask AP of predicted instances against ground truth."""
    from .segmetrics import mask_ap

    _, preds = load_instances(pred_path)
    _, gts = load_instances(gt_path)
    report = mask_ap(preds, gts)
    doc = {"ap": report.ap, "ap50": report.ap50, "ap75": report.ap75,
           "per_class": report.per_class}
    if out_path:
        with open(out_path, "w") as fh:
            json.dump(doc, fh, indent=1)
    click.echo(json.dumps({k: doc[k] for k in ("ap", "ap50", "ap75")}))


@main.command()
@click.option("--instances", "instances_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def caption(instances_path, out_path):
    """Template caption for a segmented scene."""
    from .captioner import caption_to_json, generate_caption

    image_size, instances = load_instances(instances_path)
    cap = generate_caption(instances, DEFAULT_CATEGORIES,
                           image_size=image_size)
    with open(out_path, "w") as fh:
        json.dump(caption_to_json(cap), fh, indent=1)
    click.echo(cap.text)


@main.command()
@click.option("--caption", "caption_path", required=True,
              type=click.Path(exists=True))
@click.option("--edited", "edited_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def compile(caption_path, edited_path, out_path):
    """Compile an edited caption into color instructions."""
    from .captioner import caption_from_json
    from .instructions import CompileError, compile_edit

    with open(caption_path) as fh:
        cap = caption_from_json(json.load(fh))
    with open(edited_path) as fh:
        edited = fh.read().strip()
    try:
        result = compile_edit(cap, edited)
    except CompileError as exc:
        click.echo(json.dumps(exc.to_json()), err=True)
        sys.exit(1)
    with open(out_path, "w") as fh:
        json.dump(result.to_json(), fh, indent=1)
    click.echo(f"{len(result.instructions)} instructions written to {out_path}")


@main.command()
@click.option("--sketch", "sketch_path", required=True, type=click.Path(exists=True))
@click.option("--segmenter", "segmenter_path", required=True,
              type=click.Path(exists=True), help="toy segmenter checkpoint")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--combine/--no-combine", default=False, show_default=True,
              help="intersect masks with the semantic argmax map")
def segment(sketch_path, segmenter_path, out_path, combine):
    """Segment a sketch into instances with the toy segmenter."""
    from .pipeline import segment as run_segment
    from .pipeline import toy_plugin

    sketch = SketchImage.load(sketch_path)
    instances = run_segment(sketch, toy_plugin(segmenter_path),
                            combine=combine)
    save_instances(out_path, sketch.pixels.shape, instances)
    click.echo(f"{len(instances)} instances written to {out_path}")


@main.command()
@click.option("--sketch", "sketch_path", required=True, type=click.Path(exists=True))
@click.option("--instances", "instances_path", required=True,
              type=click.Path(exists=True))
@click.option("--edited", "edited_path", type=click.Path(exists=True),
              default=None, help="edited caption text; omit for free coloring")
@click.option("--object-ckpt", required=True, type=click.Path(exists=True))
@click.option("--background-ckpt", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=0, show_default=True)
def colorize(sketch_path, instances_path, edited_path, object_ckpt,
             background_ckpt, out_path, seed):
    """Colorize a sketch with known instances and an optional edit."""
    from PIL import Image

    from .pipeline import PipelineModels, gt_plugin, run_session

    sketch = SketchImage.load(sketch_path)
    _, instances = load_instances(instances_path)
    edited = None
    if edited_path:
        with open(edited_path) as fh:
            edited = fh.read().strip()
    models = PipelineModels.load(object_ckpt, background_ckpt)
    session = run_session(sketch, edited, plugin=gt_plugin(instances),
                          models=models, seed=seed)
    Image.fromarray(session.final_image, mode="RGB").save(out_path)
    click.echo(f"result written to {out_path}")
    for entry in session.skip_log:
        click.echo(f"skipped: {entry}", err=True)


@main.command()
@click.option("--sketch", "sketch_path", required=True, type=click.Path(exists=True))
@click.option("--segmenter", "segmenter_path", required=True,
              type=click.Path(exists=True))
@click.option("--edited", "edited_path", type=click.Path(exists=True),
              default=None)
@click.option("--object-ckpt", required=True, type=click.Path(exists=True))
@click.option("--background-ckpt", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=0, show_default=True)
def run(sketch_path, segmenter_path, edited_path, object_ckpt,
        background_ckpt, out_dir, seed):
    """Full pipeline from a raw sketch; writes all session artifacts."""
    import os

    from PIL import Image

    from .captioner import caption_to_json
    from .pipeline import PipelineModels, run_session, toy_plugin

    sketch = SketchImage.load(sketch_path)
    edited = None
    if edited_path:
        with open(edited_path) as fh:
            edited = fh.read().strip()
    models = PipelineModels.load(object_ckpt, background_ckpt)
    session = run_session(sketch, edited, plugin=toy_plugin(segmenter_path),
                          models=models, seed=seed)
    os.makedirs(out_dir, exist_ok=True)
    save_instances(os.path.join(out_dir, "instances.json"),
                   sketch.pixels.shape, session.instances)
    with open(os.path.join(out_dir, "caption.json"), "w") as fh:
        json.dump(caption_to_json(session.caption), fh, indent=1)
    with open(os.path.join(out_dir, "instructions.json"), "w") as fh:
        json.dump(session.compiled.to_json(), fh, indent=1)
    Image.fromarray(session.final_image, mode="RGB").save(
        os.path.join(out_dir, "result.png"))
    click.echo(f"session artifacts written to {out_dir}")


def _train_command(name, fn):
    stage = name.split("-", 1)[1]

    @main.command(name, help=f"Train the {stage} model from a TOML config.")
    @click.option("--config", "config_path", required=True,
                  type=click.Path(exists=True))
    @click.option("--resume", "resume_path", type=click.Path(exists=True),
                  default=None)
    def command(config_path, resume_path):
        from .trainer import load_train_config

        cfg = load_train_config(config_path)
        result = fn(cfg, resume_from=resume_path)
        click.echo(json.dumps({"checkpoint": result["checkpoint"],
                               "metrics": result["metrics"],
                               "iterations": result["iterations"]}))
    return command


def _train_object(cfg, resume_from=None):
    from .trainer import train_object_colorizer

    return train_object_colorizer(cfg, resume_from=resume_from)


def _train_background(cfg, resume_from=None):
    from .trainer import train_background_colorizer

    return train_background_colorizer(cfg, resume_from=resume_from)


def _train_segmenter(cfg, resume_from=None):
    from .trainer import train_toy_segmenter

    return train_toy_segmenter(cfg, resume_from=resume_from)


_train_command("train-object", _train_object)
_train_command("train-background", _train_background)
_train_command("train-segmenter", _train_segmenter)


@main.command()
@click.option("--object-ckpt", required=True, type=click.Path(exists=True))
@click.option("--background-ckpt", required=True, type=click.Path(exists=True))
@click.option("--segmenter", "segmenter_path", type=click.Path(exists=True),
              default=None, help="toy segmenter checkpoint")
@click.option("--fixture-corpus", type=click.Path(exists=True), default=None,
              help="corpus dir for exact-match ground-truth segmentation")
@click.option("--frontend", "frontend_dir", type=click.Path(), default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8008, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def serve(object_ckpt, background_ckpt, segmenter_path, fixture_corpus,
          frontend_dir, host, port, seed):
    """Serve the HTTP API (and the UI when a frontend build is given)."""
    import uvicorn

    from .pipeline import PipelineModels, toy_plugin
    from .service import corpus_plugin, create_app

    if fixture_corpus:
        plugin = corpus_plugin(fixture_corpus)
    elif segmenter_path:
        plugin = toy_plugin(segmenter_path)
    else:
        raise click.UsageError("provide --segmenter or --fixture-corpus")
    app = create_app(models=PipelineModels.load(object_ckpt, background_ckpt),
                     plugin=plugin, seed=seed, frontend_dir=frontend_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
