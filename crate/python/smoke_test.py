#!/usr/bin/env python3
"""Smoke test for the mmvae_py extension module.

Builds the cdylib if needed, loads it, and exercises the main surface:
babbling, dataset construction, a short training run, reconstruction under
masking, prediction, rollout, imitation, and checkpoint round-trip.

Run from the repository root:  python3 python/smoke_test.py
"""

import importlib.util
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_module():
    lib = ROOT / "target" / "release" / "libmmvae_py.so"
    if not lib.exists():
        subprocess.run(
            ["cargo", "build", "-p", "mmvae-py", "--release"],
            cwd=ROOT,
            check=True,
        )
    staging = pathlib.Path(tempfile.mkdtemp(prefix="mmvae_py_"))
    target = staging / "mmvae_py.so"
    shutil.copyfile(lib, target)
    spec = importlib.util.spec_from_file_location("mmvae_py", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    m = load_module()

    rows = m.babble(240, seed=5)
    assert len(rows) == 240 and len(rows[0]) == 14
    assert all(math.isfinite(v) for v in rows[0])
    print(f"babble: {len(rows)} rows x {len(rows[0])} cols")

    ds = m.Dataset(rows=240, seed=5)
    assert ds.train_rows > 0 and ds.test_rows > 0
    print(f"dataset: {ds.train_rows} train rows, {ds.test_rows} test rows")

    inputs, targets = ds.test_matrices("vision")
    assert len(inputs) == len(targets)
    assert any(v == m.MASK_VALUE for v in inputs[0])
    print(f"test matrices: {len(inputs)} held-out samples of width {m.SAMPLE_DIMS}")

    model = m.MmVae(seed=1)
    print(f"model: {model.param_count} parameters")
    history = model.train(ds, steps=80, batch_size=32, seed=1)
    assert len(history) == 80
    assert history[-1] < history[0], "training loss should decrease"
    print(f"train: loss {history[0]:.3f} -> {history[-1]:.3f} over {len(history)} steps")

    mean, variance = model.reconstruct(inputs[:4])
    assert len(mean) == 4 and len(mean[0]) == m.SAMPLE_DIMS
    assert all(v > 0 for row in variance for v in row)
    scores = model.evaluate(ds, "complete")
    print(f"evaluate(complete): overall {scores['overall']:.3f}% MSE")

    prev = ds.normalize_row(rows[10])
    pred_mean, pred_var = model.predict_next(prev)
    assert len(pred_mean) == 14 and len(pred_var) == 14
    print(f"predict_next: first joint mean {pred_mean[0]:+.3f}")

    steps = model.rollout(prev, 5)
    assert len(steps) == 5
    print(f"rollout: {len(steps)} steps, all finite: "
          f"{all(math.isfinite(v) for s in steps for v in s)}")

    reference = [ds.normalize_row(r)[4:8] for r in rows[10:30]]
    start_q = rows[9][0:4]
    tracking = model.imitate(ds, reference, start_q)
    assert math.isfinite(tracking)
    print(f"imitate: tracking MSE {tracking:.3f}%")

    with tempfile.TemporaryDirectory() as tmp:
        path = str(pathlib.Path(tmp) / "model.mmvc")
        model.save(path)
        back = m.MmVae.load(path)
        mean2, _ = back.reconstruct(inputs[:4])
        assert mean == mean2, "checkpoint round-trip must be bit-exact"
    print("checkpoint: save/load round-trip bit-exact")

    print("OK")


if __name__ == "__main__":
    sys.exit(main())
