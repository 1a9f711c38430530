"""Benchmark the compiled kernels against the pure-numpy fallback.

Run after building the extension:

    python benchmarks/bench_backends.py

Times each hot kernel on training-shaped inputs, then a full optimizer step
under each backend (the step benchmark re-executes this script in a
subprocess so the import-time backend selection applies).
"""

import os
import subprocess
import sys
import time

import numpy as np


def timeit(fn, repeat=20):
    fn()  # warm
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def bench_kernels():
    from fndiff import _kernels_np as knp

    try:
        from fndiff import _fastops as kc
    except ImportError:
        print("compiled extension not built; kernel comparison skipped")
        return

    rng = np.random.default_rng(0)
    x_rows = rng.standard_normal((4096, 136))
    gelu_in = rng.standard_normal((16, 64, 128)).ravel()
    ln_in = rng.standard_normal((4096, 64))
    gain, bias = np.ones(64), np.zeros(64)
    grid_vals = rng.standard_normal((32 * 32, 1))
    res = np.array([32, 32], dtype=np.int64)
    lo, hi = np.array([-1.0, -1.0]), np.array([1.0, 1.0])
    pts = rng.uniform(-1, 1, (4096, 2))
    a_set = rng.standard_normal((2048, 2))
    b_set = rng.standard_normal((2048, 2))

    cases = [
        ("softmax_fwd (4096x136)", lambda k: k.softmax_fwd(x_rows)),
        ("gelu_fwd (131k)", lambda k: k.gelu_fwd(gelu_in)),
        ("layernorm_fwd (4096x64)", lambda k: k.layernorm_fwd(ln_in, gain, bias, 1e-5)),
        ("interp 2d (4096 pts)", lambda k: k.interp_multilinear(grid_vals, res, lo, hi, pts)),
        ("nn_min_dists (2048x2048)", lambda k: k.nn_min_dists(a_set, b_set)),
    ]
    print(f"{'kernel':<28} {'numpy':>10} {'compiled':>10} {'speedup':>8}")
    for name, call in cases:
        t_np = timeit(lambda: call(knp))
        t_cy = timeit(lambda: call(kc))
        print(f"{name:<28} {t_np * 1e3:>8.2f}ms {t_cy * 1e3:>8.2f}ms {t_np / t_cy:>7.2f}x")


def bench_train_step():
    from fndiff import dataset, denoiser, diffusion
    from fndiff._backend import backend_name

    params = denoiser.init_params(denoiser.ModelConfig(), seed=0)
    cfg = diffusion.TrainConfig(steps=100, batch_size=8, context_size=256, query_size=64, seed=0)
    trainer = diffusion.Trainer(params, dataset.generate_sdf_family(16, seed=1), cfg)
    trainer.step()
    dt = timeit(trainer.step, repeat=10)
    print(f"train step ({backend_name()} backend, batch 8): {dt * 1e3:.1f} ms")


if __name__ == "__main__":
    if len(sys.argv) > 1 and sys.argv[1] == "--step-only":
        bench_train_step()
    else:
        bench_kernels()
        for backend in ("compiled", "python"):
            env = dict(os.environ, FNDIFF_BACKEND=backend)
            try:
                subprocess.run([sys.executable, __file__, "--step-only"], env=env, check=True)
            except subprocess.CalledProcessError:
                print(f"{backend} backend unavailable")
