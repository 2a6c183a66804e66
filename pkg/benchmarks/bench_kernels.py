"""Time each hot kernel under the numba and numpy backends.

Run as ``python3 benchmarks/bench_kernels.py [--repeats N]``. Both backends
are imported side by side, so the ``AFDC_NUMBA`` flag does not matter here;
the end-to-end rows spawn a subprocess per backend with the flag set.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from afdc import kernels

END_TO_END = r"""
import time, numpy as np
from afdc import model, kernels
m = model.build_model(model.ModelConfig(), 0)
rng = np.random.default_rng(0)
x = np.zeros((64, 1, 128, 128)); x[:, :, 96:] = 1
for k in range(64):
    r, c = rng.integers(20, 70, 2); x[k, 0, r:r + 12, c:c + 50] = 1
m.predict(x[:4]); m.forward(x[:4], train=True)
t0 = time.perf_counter(); m.predict(x); t_inf = (time.perf_counter() - t0) / len(x)
t0 = time.perf_counter(); m.backward(m.forward(x[:50], train=True)); t_step = time.perf_counter() - t0
print(kernels.BACKEND, t_inf, t_step)
"""


def best_of(fn, repeats):
    fn()  # warm-up, includes JIT compilation
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng):
    x = rng.standard_normal((50, 8, 64, 64))
    w = rng.standard_normal((16, 8, 3, 3))
    b = rng.standard_normal(16)
    dy = rng.standard_normal((50, 16, 64, 64))
    z = rng.standard_normal((50, 16, 64, 64))
    binary = np.zeros((64, 1, 128, 128))
    binary[:, :, 96:] = 1.0
    binary[:, :, 40:52, 30:90] = 1.0
    w1 = rng.standard_normal((8, 1, 3, 3))
    b1 = rng.standard_normal(8)
    cls = binary[:, 0].astype(np.int8)
    vals = np.maximum(b1[None] + np.array([[0.0], [1.0]]) @ w1.sum(axis=(2, 3)).T, 0.0)
    gamma, beta = rng.standard_normal(16), rng.standard_normal(16)
    angle = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    poly = np.c_[0.5 + 0.4 * np.cos(angle), 0.5 + 0.1 * np.sin(angle)]
    pts = rng.uniform(0, 1, (128 * 128, 2))
    vort = rng.uniform(0, 1, (200, 2))
    col = rng.uniform(0, 1, (200, 2))
    nrm = rng.standard_normal((200, 2))
    return [
        ("conv3x3_fwd 50x8x64x64->16", lambda k: k.conv3x3_fwd(x, w, b)),
        ("conv3x3_bwd_input", lambda k: k.conv3x3_bwd_input(dy, w)),
        ("conv3x3_bwd_weight", lambda k: k.conv3x3_bwd_weight(dy, x)),
        ("batchnorm_train_fwd", lambda k: k.batchnorm_train_fwd(z, gamma, beta, 1e-5)),
        ("relu_maxpool2x2_fwd", lambda k: k.relu_maxpool2x2_fwd(z)),
        ("conv3x3_maxpool_relu 64x1x128x128", lambda k: k.conv3x3_maxpool_relu(binary, w1, b1)),
        ("conv3x3_maxpool_relu_masked", lambda k: k.conv3x3_maxpool_relu_masked(
            binary, w1, b1, k.uniform_pool_classes(cls), vals)),
        ("points_in_polygon 16384 pts, 400 edges",
         lambda k: k.points_in_polygon(pts[:, 0].copy(), pts[:, 1].copy(), poly, 1e-12)),
        ("vortex_influence 200 panels, images", lambda k: k.vortex_influence(
            col[:, 0].copy(), col[:, 1].copy(), nrm[:, 0].copy(), nrm[:, 1].copy(),
            vort[:, 0].copy(), vort[:, 1].copy(), True)),
    ]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--skip-end-to-end", action="store_true")
    args = p.parse_args(argv)
    if kernels.numba_backend is None:
        sys.exit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':42s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, fn in cases(rng):
        t_np = best_of(lambda: fn(kernels.numpy_backend), args.repeats)
        t_nb = best_of(lambda: fn(kernels.numba_backend), args.repeats)
        print(f"{name:42s} {1e3 * t_np:10.2f} {1e3 * t_nb:10.2f} {t_np / t_nb:8.2f}")
    if args.skip_end_to_end:
        return
    print()
    print(f"{'end to end (default model)':42s} {'infer ms/sample':>16s} {'train step s':>13s}")
    for flag in ("0", "1"):
        env = {**os.environ, "AFDC_NUMBA": flag}
        out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, check=True,
                             capture_output=True, text=True).stdout.split()
        print(f"{out[0]:42s} {1e3 * float(out[1]):16.3f} {float(out[2]):13.3f}")


if __name__ == "__main__":
    main()
