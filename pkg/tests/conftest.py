import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

import _verdicts


def pytest_terminal_summary(terminalreporter):
    if _verdicts.LINES:
        terminalreporter.section("acceptance criteria")
        for line in _verdicts.LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_scenes():
    """A handful of deterministic synthetic scenes for module tests."""
    from sketchtint.synthdata import SceneSpec, generate_scene

    records = []
    seed = 0
    while len(records) < 8:
        try:
            records.append(generate_scene(SceneSpec(seed=seed)))
        except RuntimeError:
            pass
        seed += 1
    return records


@pytest.fixture(scope="session")
def tiny_checkpoints(tmp_path_factory, small_scenes):
    """Checkpoints trained for a few iterations: mechanics, not quality."""
    from sketchtint.nets import LossWeights, NetConfig
    from sketchtint.synthdata import (
        build_background_examples,
        build_object_examples,
    )
    from sketchtint.trainer import (
        TrainConfig,
        train_background_colorizer,
        train_object_colorizer,
        train_toy_segmenter,
    )

    root = tmp_path_factory.mktemp("tiny_ckpts")
    obj_net = NetConfig(image_size=64, base_channels=8, mlstm_cell=16,
                        lstm_steps=8, embed_dim=8, text_hidden=8, noise_dim=4)
    obj = train_object_colorizer(
        TrainConfig(out_dir=str(root / "obj"), batch_size=2,
                    max_iterations=4, seed=3, log_every=2,
                    checkpoint_every=4, crop_size=64, net=obj_net),
        examples=build_object_examples(small_scenes, 64))
    bg_net = NetConfig(image_size=128, in_channels=3, base_channels=8,
                       mlstm_cell=16, lstm_steps=8, embed_dim=8,
                       text_hidden=8, backbone="residual",
                       encoder_units=(1, 1, 1, 1, 1),
                       decoder_units=(1, 1, 1, 1, 1))
    bg = train_background_colorizer(
        TrainConfig(out_dir=str(root / "bg"), batch_size=1,
                    max_iterations=3, seed=5, log_every=1,
                    checkpoint_every=3, lr_d=2e-4, net=bg_net,
                    loss=LossWeights.background()),
        examples=build_background_examples(small_scenes))
    scenes = []
    for rec in small_scenes:
        labels = np.zeros(rec.sketch.pixels.shape, dtype=np.int64)
        for inst in rec.instances:
            labels[inst.mask > 0] = inst.label
        scenes.append((rec.sketch.pixels, labels))
    seg = train_toy_segmenter(
        TrainConfig(out_dir=str(root / "seg"), batch_size=2,
                    max_iterations=4, lr_g=1e-4, seed=1, log_every=2,
                    checkpoint_every=4),
        scenes=scenes)
    return {"object": obj["checkpoint"], "background": bg["checkpoint"],
            "segmenter": seg["checkpoint"]}


@pytest.fixture(scope="session")
def e2e(tmp_path_factory):
    """Full desk-scale assets; built once and cached under .cache/."""
    import e2e_assets

    return e2e_assets.build_all()
