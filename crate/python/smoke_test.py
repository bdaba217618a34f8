"""Smoke test for the lidegrade extension module.

Build first with `pip install --no-build-isolation -e crates/python`, then run
`python python/smoke_test.py` (or `pytest python/smoke_test.py`).
"""

import math
import os
import random
import struct
import tempfile

import lidegrade


def f32(v):
    return struct.unpack("f", struct.pack("f", v))[0]


def ring_frame(n=2000, seed=7, frame_index=3):
    rng = random.Random(seed)
    xyz, times = [], []
    for i in range(n):
        az = -math.pi + 2 * math.pi * i / n
        el = math.radians(rng.uniform(-15, 15))
        r = rng.uniform(2, 40)
        xyz.append(tuple(f32(c) for c in (r * math.cos(el) * math.cos(az), r * math.cos(el) * math.sin(az), r * math.sin(el))))
        times.append(f32(0.1 * i / n))
    return lidegrade.Frame(xyz, times, frame_index=frame_index, sensor_id="lidar0", t0=12.5)


def test_frame_roundtrip_pcd():
    f = ring_frame()
    with tempfile.TemporaryDirectory() as d:
        for enc in ("binary", "ascii"):
            path = os.path.join(d, f"f_{enc}.pcd")
            lidegrade.write_pcd(f, path, enc)
            g = lidegrade.read_pcd(path)
            assert g.bitwise_eq(f), enc
            assert g.frame_index == 3 and g.sensor_id == "lidar0"


def test_operators():
    f = ring_frame()
    assert len(lidegrade.apply_sparsification(f, 3)) == math.ceil(len(f) / 3)
    kept = lidegrade.apply_dropout(f, 0.5, 11)
    assert 0.4 * len(f) < len(kept) < 0.6 * len(f)
    assert lidegrade.apply_dropout(f, 0.5, 11).bitwise_eq(kept)
    assert len(lidegrade.apply_dropout(f, 0.0, 11)) == len(f)
    assert len(lidegrade.apply_dropout(f, 1.0, 11)) == 0

    half = lidegrade.apply_structured_dropout(f, 0.0, math.pi)
    assert all(math.atan2(y, x) < 0 for x, y, _ in half.xyz())

    narrow = lidegrade.apply_fov_reduction(f, math.radians(30), math.pi / 2)
    assert all(abs(math.atan2(y, x)) <= math.radians(30) for x, y, _ in narrow.xyz())

    noisy = lidegrade.apply_noise(f, 0.02, 5)
    assert len(noisy) == len(f) and noisy.time_offsets() == f.time_offsets()

    warped = lidegrade.apply_motion_distortion(f, [1.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    (x0, _, _), (w0, _, _) = f.xyz()[-1], warped.xyz()[-1]
    assert abs((w0 - x0) - 1.0 * f.time_offsets()[-1]) < 1e-9

    occluded = lidegrade.apply_occlusion(f, 4, 1.5, 9)
    assert len(occluded) <= len(f)
    with_zero = lidegrade.apply_motion_distortion(f, [0, 0, 0], [0, 0, 0])
    assert with_zero.xyz() == f.xyz()


def test_chain_and_config():
    f = ring_frame()
    cfg = lidegrade.Config(seed=2024)
    assert cfg.seed == 2024
    out, stats = lidegrade.apply_chain(f, cfg, "heavy")
    again, _ = lidegrade.apply_chain(f, cfg, "heavy")
    assert out.bitwise_eq(again)
    assert stats["input_count"] == len(f) and stats["output_count"] == len(out)
    assert [m["module"] for m in stats["modules"]] == cfg.module_chain

    cfg2 = lidegrade.Config.from_yaml("pipeline:\n  seed: 1\n", ["pipeline.order=[]"])
    same, s2 = lidegrade.apply_chain(f, cfg2, "extreme")
    assert same.bitwise_eq(f) and s2["modules"] == []

    try:
        lidegrade.Config.from_yaml("pipeline:\n  sed: 1\n")
    except ValueError as e:
        assert "sed" in str(e)
    else:
        raise AssertionError("typo accepted")

    assert lidegrade.derive_seed(1, 2, 3) == lidegrade.derive_seed(1, 2, 3)
    assert lidegrade.derive_seed(1, 2, 3) != lidegrade.derive_seed(1, 2, 4)


def test_detect_and_ape():
    p = lidegrade.detect_profile(ring_frame())
    assert p["profile_class"] == "generic"

    ref = [(0.1 * i, float(i), math.sin(i), 0.1 * i * i, 0.0, 0.0, 0.0, 1.0) for i in range(20)]
    est = [(t, x + 0.25, y, z, qx, qy, qz, qw) for t, x, y, z, qx, qy, qz, qw in ref]
    r = lidegrade.compute_ape(ref, est)
    assert abs(r["mean"] - 0.25) < 1e-12 and abs(r["std"]) < 1e-12
    assert lidegrade.compute_ape(ref, est, align=True)["max"] < 1e-9


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok {name}")
