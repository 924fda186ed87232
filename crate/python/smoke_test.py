"""Smoke test for the flowfactor_py extension.

Builds the extension with cargo (unless --lib points at a built one),
loads it under its module name and exercises each exported type once.

    python3 python/smoke_test.py [--lib PATH] [--codec PATH]
"""

import argparse
import importlib.util
import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent


def load_extension(lib):
    if lib is None:
        subprocess.run(["cargo", "build", "-p", "flowfactor-py"], cwd=ROOT, check=True)
        lib = ROOT / "target" / "debug" / "libflowfactor_py.so"
    tmp = Path(tempfile.mkdtemp())
    target = tmp / "flowfactor_py.so"
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("flowfactor_py", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def check_tensor(ff):
    rng = np.random.default_rng(0)
    a = rng.uniform(-1, 1, (3, 4))
    b = rng.uniform(-1, 1, (4, 2))
    ta = ff.Tensor([3, 4], a.ravel().tolist())
    tb = ff.Tensor([4, 2], b.ravel().tolist())
    out = ta.apply("matmul", tb)
    assert out.shape == [3, 2]
    assert np.allclose(np.array(out.tolist()).reshape(3, 2), a @ b, atol=1e-14)

    # Gradient of <softmax(x), w> against central differences.
    x = rng.uniform(-1, 1, (2, 5))
    w = rng.uniform(0.5, 1.5, (2, 5))
    (g,) = ff.vjp("softmax", [ff.Tensor([2, 5], x.ravel().tolist())], ff.Tensor([2, 5], w.ravel().tolist()))

    def f(x):
        e = np.exp(x - x.max(axis=1, keepdims=True))
        return float(((e / e.sum(axis=1, keepdims=True)) * w).sum())

    h = 1e-6
    fd = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        up, down = x.copy(), x.copy()
        up[idx] += h
        down[idx] -= h
        fd[idx] = (f(up) - f(down)) / (2 * h)
    assert np.allclose(np.array(g.tolist()).reshape(2, 5), fd, atol=1e-8)

    try:
        ff.Tensor([2, 2], [1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("shape mismatch accepted")


def check_rng(ff):
    assert ff.splitmix64(0) == (0x9E3779B97F4A7C15, 0xE220A8397B1DCDAF)
    r1, r2 = ff.Rng(5), ff.Rng(5)
    assert [r1.next_u64() for _ in range(3)] == [r2.next_u64() for _ in range(3)]
    u = [r1.uniform() for _ in range(1000)]
    assert 0.0 <= min(u) and max(u) < 1.0


def check_data(ff):
    assert ff.NUM_SCENES == 18432
    assert list(ff.FACTOR_NAMES) == ["shape", "scale", "x", "y", "hue", "bg"]
    for index in (0, 777, 18431):
        factors = ff.scene_factors(index)
        image = ff.render(factors)
        assert len(image) == 32 * 32 * 3
        assert list(ff.extract_attributes(image)) == list(factors)
    try:
        ff.extract_attributes([0.5] * 3072)
    except ValueError:
        pass
    else:
        raise AssertionError("blank image read as an object")


def check_losses(ff):
    zt, u = ff.make_bridge([1.0, -2.0], [3.0, 5.0], 0.25)
    assert zt == [1.5, -0.25] and u == [2.0, 7.0]
    assert abs(ff.orth_loss([[1.0, 2.0], [1.0, 2.0]]) - 1.0) < 1e-6
    assert abs(ff.orth_loss([[1.0, 0.0], [0.0, 3.0]])) < 1e-12


def check_integrate(ff):
    z, nfe = ff.integrate(lambda t, z: z, [1.0], solver="dopri5", rtol=1e-8, atol=1e-8)
    assert abs(z[0] - math.e) / math.e < 1e-6
    z, nfe = ff.integrate(lambda t, z: z, [1.0], solver="rk4", steps=50)
    assert abs(z[0] - math.e) < 1e-8 and nfe == 200


def check_model(ff, codec_path):
    model = ff.Model(seed=1, encoder_hidden=32, hidden=16, blocks=1)
    clone = ff.Model.from_bytes(model.to_bytes())
    assert clone.to_bytes() == model.to_bytes()
    assert model.parameter_count() > 0 and "routing.key" in model.names()
    image = ff.render(ff.scene_factors(123))
    tokens = model.factor_tokens(image)
    assert len(tokens) == 10 * 16
    z = list(np.random.default_rng(1).standard_normal(64))
    v = model.velocity(z, 0.3, image)
    attn, parts = model.route(z, 0.3, image)
    rows = np.array(attn).reshape(16, 10)
    assert np.allclose(rows.sum(axis=1), 1.0, atol=1e-12)
    assert np.allclose(np.sum(parts, axis=0), v, atol=1e-12)
    if codec_path:
        codec = ff.Codec.load(codec_path)
        assert codec.dims == 64
        out = model.sample(codec, image, seed=3)
        assert out == model.sample(codec, image, seed=3) and len(out) == 3072


def check_metrics(ff):
    scores = ff.evaluate_planted(seed=0, samples=2000)
    assert scores["factorvae_score"] == 1.0
    assert scores["dci_disentanglement"] >= 0.95 and scores["mig"] >= 0.9


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--lib", type=Path, help="built libflowfactor_py.so")
    parser.add_argument("--codec", help="codec.bin from `flowfactor generate-data`")
    args = parser.parse_args()
    ff = load_extension(args.lib)
    for check in (check_tensor, check_rng, check_data, check_losses, check_integrate, check_metrics):
        check(ff)
        print(f"ok  {check.__name__}")
    check_model(ff, args.codec)
    print("ok  check_model")
    return 0


if __name__ == "__main__":
    sys.exit(main())
