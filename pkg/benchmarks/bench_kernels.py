"""Timing comparison of the compiled raster kernels against the numpy lane.

Run from the repository root:

    python3 benchmarks/bench_kernels.py

Each kernel is checked for bit-identical agreement on the benchmark
inputs first, then timed on both lanes.
"""

import timeit

import numpy as np

from sketchtint.kernels import backend_name, fallback

try:
    from sketchtint.kernels import _native as native
except ImportError:
    native = None


def _scene_sketch(canvas=128):
    from sketchtint.synthdata import SceneSpec, generate_scene

    seed = 0
    while True:
        try:
            return generate_scene(SceneSpec(seed=seed, canvas=canvas))
        except RuntimeError:
            seed += 1


def _ring_grid(size=320):
    rr, cc = np.mgrid[:size, :size]
    grid = np.zeros((size, size), dtype=np.uint8)
    for k in range(3, size // 2 - 4, 14):
        d = np.sqrt((rr - size / 2) ** 2 + (cc - size / 2) ** 2)
        grid |= ((d >= k) & (d < k + 2)).astype(np.uint8)
    return grid


def _nearest_inputs(sketch):
    strokes = sketch.pixels
    skeleton = fallback.thin(strokes)
    fr, fc = np.nonzero(strokes)
    sr, sc = np.nonzero(skeleton)
    rng = np.random.default_rng(5)
    ids = rng.integers(1, 40, size=sr.size, dtype=np.int64)
    return (fr.astype(np.int64), fc.astype(np.int64),
            sr.astype(np.int64), sc.astype(np.int64), ids)


def _time(fn, args, repeat=5, number=3):
    return min(timeit.repeat(lambda: fn(*args), repeat=repeat,
                             number=number)) / number


def main():
    print(f"active backend: {backend_name()}")
    if native is None:
        print("compiled extension not built; nothing to compare")
        return

    rec = _scene_sketch()
    ring = _ring_grid()
    rng = np.random.default_rng(11)
    noise = (rng.random((512, 512)) < 0.35).astype(np.uint8)
    counts = fallback.rle_encode(noise)

    cases = [
        ("thin / 128 scene", "thin", (rec.sketch.pixels,)),
        ("thin / 320 rings", "thin", (ring,)),
        ("flood_exterior / 128 scene", "flood_exterior",
         (rec.sketch.pixels,)),
        ("flood_exterior / 320 rings", "flood_exterior", (ring,)),
        ("nearest_assign / 128 scene", "nearest_assign",
         _nearest_inputs(rec.sketch)),
        ("rle_encode / 512 noise", "rle_encode", (noise,)),
        ("rle_decode / 512 noise", "rle_decode", (counts, 512, 512)),
    ]

    header = f"{'kernel':34} {'numpy':>10} {'native':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, name, args in cases:
        got_fb = getattr(fallback, name)(*args)
        got_nat = getattr(native, name)(*args)
        assert np.array_equal(got_fb, got_nat), f"{label}: lanes disagree"
        t_fb = _time(getattr(fallback, name), args)
        t_nat = _time(getattr(native, name), args)
        print(f"{label:34} {t_fb * 1e3:9.2f}ms {t_nat * 1e3:9.2f}ms "
              f"{t_fb / t_nat:7.1f}x")


if __name__ == "__main__":
    main()
