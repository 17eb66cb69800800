"""Training loops for the colorization networks and the toy segmenter.

Every run is deterministic on a single device: model init is seeded
once, and each iteration draws its batch indices and noise from an RNG
keyed by (seed, iteration), so a run resumed from a checkpoint replays
exactly the iterations an uninterrupted run would have executed.
"""

from __future__ import annotations

import csv
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import torch

from .nets import (
    BackgroundDiscriminator,
    Generator,
    LossWeights,
    NetConfig,
    ObjectDiscriminator,
    Vocabulary,
    config_digest,
    discriminator_loss,
    generator_loss,
    load_checkpoint,
    save_checkpoint,
)


# ---------------------------------------------------------------------------
# schedules and configuration

def lr_at(base: float, iteration: int, events=(), decay_every: int = 0,
          decay_factor: float = 1.0) -> float:
    """Pure learning-rate schedule.

    Step events (iteration, lr) override the base once reached;
    multiplicative decay applies decay_factor every decay_every
    iterations, counting from iteration 1.
    """
    lr = base
    for start, value in events:
        if iteration >= start:
            lr = value
    if decay_every > 0:
        lr *= decay_factor ** ((iteration - 1) // decay_every)
    return lr


@dataclass
class TrainConfig:
    corpus_dir: str = ""
    out_dir: str = "train_out"
    batch_size: int = 2
    max_iterations: int = 1000
    lr_g: float = 2e-4
    lr_d: float = 1e-4
    lr_events_g: tuple = ()
    lr_events_d: tuple = ()
    decay_every: int = 0
    decay_factor: float = 1.0
    seed: int = 0
    log_every: int = 50
    checkpoint_every: int = 1000
    crop_size: int = 192
    betas: tuple = (0.5, 0.999)
    net: NetConfig = field(default_factory=NetConfig)
    loss: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if self.lr_g <= 0 or self.lr_d <= 0:
            raise ValueError("learning rates must be positive")
        if self.batch_size < 1 or self.max_iterations < 1:
            raise ValueError("batch size and iteration count must be positive")
        for events in (self.lr_events_g, self.lr_events_d):
            its = [e[0] for e in events]
            if its != sorted(its) or len(set(its)) != len(its):
                raise ValueError("schedule iterations must be increasing")
            if any(e[1] <= 0 for e in events):
                raise ValueError("scheduled learning rates must be positive")
        if self.decay_every < 0 or self.decay_factor <= 0:
            raise ValueError("invalid decay schedule")


def paper_object_train_config() -> TrainConfig:
    """The published object-stage recipe at full scale."""
    return TrainConfig(batch_size=2, max_iterations=100_000, lr_g=2e-4,
                       lr_d=1e-4, lr_events_d=((50_001, 2e-4),),
                       crop_size=192, net=NetConfig(),
                       loss=LossWeights())


def paper_background_train_config() -> TrainConfig:
    """The published background-stage recipe at full scale."""
    return TrainConfig(batch_size=1, max_iterations=100_000, lr_g=2e-4,
                       lr_d=2e-4, decay_every=20_000, decay_factor=0.25,
                       net=NetConfig(image_size=768, in_channels=3,
                                     backbone="residual"),
                       loss=LossWeights.background())


def load_train_config(path) -> TrainConfig:
    """Read a TOML config: [train] scalars, [net] and [loss] overrides."""
    import tomli

    with open(path, "rb") as fh:
        doc = tomli.load(fh)
    train = dict(doc.get("train", {}))
    for key in ("lr_events_g", "lr_events_d"):
        if key in train:
            train[key] = tuple((int(a), float(b)) for a, b in train[key])
    if "betas" in train:
        train["betas"] = tuple(float(v) for v in train["betas"])
    net = NetConfig(**{k: tuple(v) if isinstance(v, list) else v
                       for k, v in doc.get("net", {}).items()})
    loss = LossWeights(**doc.get("loss", {}))
    return TrainConfig(net=net, loss=loss, **train)


def _batch_rng(seed: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng([seed, iteration])


# ---------------------------------------------------------------------------
# tensors from corpus examples

def _sketch_tensor(batch_uint8: np.ndarray) -> torch.Tensor:
    """Strokes to [-1, 1]: background +1, stroke -1; adds the channel dim."""
    x = 1.0 - 2.0 * batch_uint8.astype(np.float32)
    return torch.from_numpy(x)[:, None]


def _image_tensor(batch_uint8: np.ndarray) -> torch.Tensor:
    x = batch_uint8.astype(np.float32) / 127.5 - 1.0
    return torch.from_numpy(x).permute(0, 3, 1, 2).contiguous()


class _ObjectData:
    """Stacked object-crop examples ready for index batching."""

    def __init__(self, examples, steps: int):
        if not examples:
            raise ValueError("object dataset is empty")
        self.vocab = Vocabulary.from_texts([e["text"] for e in examples])
        self.sketches = np.stack([e["sketch"] for e in examples])
        self.targets = np.stack([e["target"] for e in examples])
        self.tokens = np.stack(
            [self.vocab.encode(e["text"], steps) for e in examples])
        self.labels = np.array([e["label"] - 1 for e in examples],
                               dtype=np.int64)

    def __len__(self):
        return len(self.labels)

    def batch(self, idx):
        return (
            _sketch_tensor(self.sketches[idx]),
            _image_tensor(self.targets[idx]),
            torch.from_numpy(self.tokens[idx]),
            torch.from_numpy(self.labels[idx]),
        )


class _BackgroundData:
    def __init__(self, examples, steps: int):
        if not examples:
            raise ValueError("background dataset is empty")
        self.vocab = Vocabulary.from_texts([e["text"] for e in examples])
        self.canvases = np.stack([e["canvas"] for e in examples])
        self.targets = np.stack([e["target"] for e in examples])
        self.tokens = np.stack(
            [self.vocab.encode(e["text"], steps) for e in examples])

    def __len__(self):
        return len(self.canvases)

    def batch(self, idx):
        return (
            _image_tensor(self.canvases[idx]),
            _image_tensor(self.targets[idx]),
            torch.from_numpy(self.tokens[idx]),
        )


def _load_records(cfg: TrainConfig):
    from .synthdata import load_corpus

    if not cfg.corpus_dir:
        raise ValueError("config has no corpus_dir and no examples were given")
    return load_corpus(cfg.corpus_dir)


# ---------------------------------------------------------------------------
# shared loop plumbing

class _MetricsLog:
    def __init__(self, path, resume: bool):
        fresh = not (resume and os.path.exists(path))
        self._fh = open(path, "w" if fresh else "a", newline="")
        self._w = csv.writer(self._fh)
        if fresh:
            self._w.writerow(["iteration", "term", "value"])

    def write(self, iteration: int, terms: dict):
        for name, value in terms.items():
            self._w.writerow([iteration, name, f"{value:.6g}"])
        self._fh.flush()

    def close(self):
        self._fh.close()


def _abort_on_nan(values: dict, iteration: int, out_dir, models, digest,
                  vocab):
    bad = [k for k, v in values.items() if not np.isfinite(v)]
    if not bad:
        return
    diag = os.path.join(out_dir, "nan_diagnostic.pt")
    save_checkpoint(diag, models=models, digest=digest, iteration=iteration,
                    vocab=vocab, meta={"non_finite_terms": bad})
    raise RuntimeError(
        f"non-finite loss {bad} at iteration {iteration}; "
        f"diagnostic checkpoint written to {diag}")


def _set_lr(optimizer, lr: float):
    for group in optimizer.param_groups:
        group["lr"] = lr


def _maybe_resume(path, digest, models, optimizers):
    payload = load_checkpoint(path, digest=digest)
    for name, model in models.items():
        model.load_state_dict(payload["models"][name])
    for name, opt in optimizers.items():
        opt.load_state_dict(payload["optimizers"][name])
    return payload["iteration"]


# ---------------------------------------------------------------------------
# training entry points

def train_object_colorizer(cfg: TrainConfig, examples=None, resume_from=None):
    """Alternating D/G training of the object-stage cGAN.

    Returns {"checkpoint", "metrics", "iterations", "digest"}.
    """
    if examples is None:
        from .synthdata import build_object_examples

        examples = build_object_examples(_load_records(cfg), cfg.crop_size)
    net_cfg = replace(cfg.net, image_size=cfg.crop_size)
    data = _ObjectData(examples, net_cfg.lstm_steps)
    net_cfg = replace(net_cfg, vocab_size=len(data.vocab))
    digest = config_digest(net_cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)

    torch.manual_seed(cfg.seed)
    gen = Generator(net_cfg, use_noise=True)
    disc = ObjectDiscriminator(net_cfg)
    opt_g = torch.optim.Adam(gen.parameters(), lr=cfg.lr_g, betas=cfg.betas)
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.lr_d, betas=cfg.betas)
    models = {"generator": gen, "discriminator": disc}
    optimizers = {"generator": opt_g, "discriminator": opt_d}

    start = 0
    if resume_from:
        start = _maybe_resume(resume_from, digest, models, optimizers)
    log = _MetricsLog(os.path.join(cfg.out_dir, "metrics.csv"),
                      resume=start > 0)
    ckpt_path = os.path.join(cfg.out_dir, "object.pt")
    meta = {"net": asdict(net_cfg), "loss": asdict(cfg.loss),
            "stage": "object"}

    def save(iteration):
        save_checkpoint(ckpt_path, models=models, digest=digest,
                        optimizers=optimizers, iteration=iteration,
                        vocab=data.vocab, meta=meta)

    gen.train()
    disc.train()
    for it in range(start + 1, cfg.max_iterations + 1):
        _set_lr(opt_g, lr_at(cfg.lr_g, it, cfg.lr_events_g,
                             cfg.decay_every, cfg.decay_factor))
        _set_lr(opt_d, lr_at(cfg.lr_d, it, cfg.lr_events_d,
                             cfg.decay_every, cfg.decay_factor))
        rng = _batch_rng(cfg.seed, it)
        idx = rng.integers(0, len(data), cfg.batch_size)
        sketch, target, tokens, labels = data.batch(idx)
        z1 = torch.from_numpy(
            rng.standard_normal((cfg.batch_size, net_cfg.noise_dim),
                                dtype=np.float64).astype(np.float32))
        z2 = torch.from_numpy(
            rng.standard_normal((cfg.batch_size, net_cfg.noise_dim),
                                dtype=np.float64).astype(np.float32))

        with torch.no_grad():
            fake_d = gen(sketch, tokens, noise=z1)
        real_logit, real_cls = disc(target, sketch)
        fake_logit, _ = disc(fake_d, sketch)
        d_total, d_terms = discriminator_loss(
            cfg.loss, real_logits=real_logit, fake_logits=fake_logit,
            class_logits_real=real_cls, labels=labels)
        opt_d.zero_grad()
        d_total.backward()
        opt_d.step()

        fake = gen(sketch, tokens, noise=z1)
        fake_b = gen(sketch, tokens, noise=z2)
        g_logit, g_cls, g_feats = disc(fake, sketch, return_features=True)
        with torch.no_grad():
            _, _, r_feats = disc(target, sketch, return_features=True)
        g_total, g_terms = generator_loss(
            cfg.loss, fake_logits=g_logit, class_logits=g_cls, labels=labels,
            generated=fake, target=target, perc_fake=g_feats[2],
            perc_real=r_feats[2], pair=(fake, fake_b), noise_pair=(z1, z2))
        opt_g.zero_grad()
        g_total.backward()
        opt_g.step()

        terms = {f"d_{k}": v for k, v in d_terms.items()}
        terms.update({f"g_{k}": v for k, v in g_terms.items()})
        _abort_on_nan(terms, it, cfg.out_dir, models, digest, data.vocab)
        if it % cfg.log_every == 0 or it == cfg.max_iterations:
            log.write(it, terms)
        if it % cfg.checkpoint_every == 0 or it == cfg.max_iterations:
            save(it)
    log.close()
    return {"checkpoint": ckpt_path,
            "metrics": os.path.join(cfg.out_dir, "metrics.csv"),
            "iterations": cfg.max_iterations, "digest": digest}


def train_background_colorizer(cfg: TrainConfig, examples=None,
                               resume_from=None):
    """Alternating D/G training of the background cGAN (GAN + L1 only)."""
    if examples is None:
        from .synthdata import build_background_examples

        examples = build_background_examples(_load_records(cfg))
    weights = cfg.loss
    if weights.ac or weights.perc or weights.div:
        weights = LossWeights.background()
    net_cfg = cfg.net
    if net_cfg.in_channels != 3:
        net_cfg = replace(net_cfg, in_channels=3)
    data = _BackgroundData(examples, net_cfg.lstm_steps)
    net_cfg = replace(net_cfg,
                      image_size=int(data.canvases.shape[1]),
                      vocab_size=len(data.vocab))
    digest = config_digest(net_cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)

    torch.manual_seed(cfg.seed)
    gen = Generator(net_cfg, use_noise=False)
    disc = BackgroundDiscriminator(net_cfg)
    opt_g = torch.optim.Adam(gen.parameters(), lr=cfg.lr_g, betas=cfg.betas)
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.lr_d, betas=cfg.betas)
    models = {"generator": gen, "discriminator": disc}
    optimizers = {"generator": opt_g, "discriminator": opt_d}

    start = 0
    if resume_from:
        start = _maybe_resume(resume_from, digest, models, optimizers)
    log = _MetricsLog(os.path.join(cfg.out_dir, "metrics.csv"),
                      resume=start > 0)
    ckpt_path = os.path.join(cfg.out_dir, "background.pt")
    meta = {"net": asdict(net_cfg), "loss": asdict(weights),
            "stage": "background"}

    def save(iteration):
        save_checkpoint(ckpt_path, models=models, digest=digest,
                        optimizers=optimizers, iteration=iteration,
                        vocab=data.vocab, meta=meta)

    gen.train()
    disc.train()
    for it in range(start + 1, cfg.max_iterations + 1):
        _set_lr(opt_g, lr_at(cfg.lr_g, it, cfg.lr_events_g,
                             cfg.decay_every, cfg.decay_factor))
        _set_lr(opt_d, lr_at(cfg.lr_d, it, cfg.lr_events_d,
                             cfg.decay_every, cfg.decay_factor))
        rng = _batch_rng(cfg.seed, it)
        idx = rng.integers(0, len(data), cfg.batch_size)
        canvas, target, tokens = data.batch(idx)

        with torch.no_grad():
            fake_d = gen(canvas, tokens)
        d_total, d_terms = discriminator_loss(
            weights, real_logits=disc(target, tokens),
            fake_logits=disc(fake_d, tokens))
        opt_d.zero_grad()
        d_total.backward()
        opt_d.step()

        fake = gen(canvas, tokens)
        g_total, g_terms = generator_loss(
            weights, fake_logits=disc(fake, tokens), generated=fake,
            target=target)
        opt_g.zero_grad()
        g_total.backward()
        opt_g.step()

        terms = {f"d_{k}": v for k, v in d_terms.items()}
        terms.update({f"g_{k}": v for k, v in g_terms.items()})
        _abort_on_nan(terms, it, cfg.out_dir, models, digest, data.vocab)
        if it % cfg.log_every == 0 or it == cfg.max_iterations:
            log.write(it, terms)
        if it % cfg.checkpoint_every == 0 or it == cfg.max_iterations:
            save(it)
    log.close()
    return {"checkpoint": ckpt_path,
            "metrics": os.path.join(cfg.out_dir, "metrics.csv"),
            "iterations": cfg.max_iterations, "digest": digest}


def train_toy_segmenter(cfg: TrainConfig, scenes=None, resume_from=None,
                        mask_ablation: bool = False):
    """Per-pixel classifier trained with the masked objective only.

    ``scenes`` is a list of (sketch uint8 HW, labels int HW); the mask
    is the drawing itself, so background pixels never contribute
    gradient. ``mask_ablation`` trades the mask for all-ones, for
    measuring what the mask excludes.
    """
    from .segmetrics import ToySegmenter, masked_cross_entropy

    if scenes is None:
        records = _load_records(cfg)
        scenes = []
        for rec in records:
            labels = np.zeros(rec.sketch.pixels.shape, dtype=np.int64)
            for inst in rec.instances:
                labels[inst.mask > 0] = inst.label
            scenes.append((rec.sketch.pixels, labels))
    if not scenes:
        raise ValueError("segmenter dataset is empty")
    sketches = np.stack([s for s, _ in scenes])
    labels = np.stack([l for _, l in scenes])

    os.makedirs(cfg.out_dir, exist_ok=True)
    torch.manual_seed(cfg.seed)
    model = ToySegmenter(num_classes=cfg.net.num_classes)
    digest = config_digest(cfg.net)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr_g, betas=cfg.betas)

    start = 0
    if resume_from:
        start = _maybe_resume(resume_from, digest, {"segmenter": model},
                              {"segmenter": opt})
    log = _MetricsLog(os.path.join(cfg.out_dir, "metrics.csv"),
                      resume=start > 0)
    ckpt_path = os.path.join(cfg.out_dir, "segmenter.pt")

    model.train()
    for it in range(start + 1, cfg.max_iterations + 1):
        _set_lr(opt, lr_at(cfg.lr_g, it, cfg.lr_events_g,
                           cfg.decay_every, cfg.decay_factor))
        rng = _batch_rng(cfg.seed, it)
        idx = rng.integers(0, len(sketches), cfg.batch_size)
        x = _sketch_tensor(sketches[idx])
        y = torch.from_numpy(labels[idx])
        mask = np.ones_like(sketches[idx]) if mask_ablation else sketches[idx]

        logits = model(x)
        b, k, h, w = logits.shape
        flat = logits.permute(0, 2, 3, 1).reshape(b * h, w, k)
        loss = masked_cross_entropy(flat, y.reshape(b * h, w),
                                    mask.reshape(b * h, w))
        opt.zero_grad()
        loss.backward()
        opt.step()

        terms = {"ce": float(loss.detach())}
        _abort_on_nan(terms, it, cfg.out_dir, {"segmenter": model}, digest,
                      None)
        if it % cfg.log_every == 0 or it == cfg.max_iterations:
            log.write(it, terms)
        if it % cfg.checkpoint_every == 0 or it == cfg.max_iterations:
            save_checkpoint(ckpt_path, models={"segmenter": model},
                            digest=digest, optimizers={"segmenter": opt},
                            iteration=it,
                            meta={"net": asdict(cfg.net), "stage": "segmenter"})
    log.close()
    return {"checkpoint": ckpt_path,
            "metrics": os.path.join(cfg.out_dir, "metrics.csv"),
            "iterations": cfg.max_iterations, "digest": digest}
