"""Compiled vs pure-numpy kernel backends: same semantics, close numerics."""

import os
import subprocess
import sys

import numpy as np
import pytest

from fndiff import _kernels_np as knp
from fndiff._backend import backend_name

try:
    from fndiff import _fastops as kc
except ImportError:
    kc = None

needs_compiled = pytest.mark.skipif(kc is None, reason="compiled extension not built")


def test_backend_name_valid():
    assert backend_name() in ("compiled", "python")


@needs_compiled
def test_gelu_agreement(rng):
    x = rng.standard_normal((64, 32))
    assert np.abs(knp.gelu_fwd(x) - kc.gelu_fwd(x)).max() < 1e-14
    dy = rng.standard_normal((64, 32))
    assert np.abs(knp.gelu_bwd(x, dy) - kc.gelu_bwd(x, dy)).max() < 1e-14


@needs_compiled
def test_softmax_agreement(rng):
    x = rng.standard_normal((50, 17)) * 5
    a, b = knp.softmax_fwd(x), kc.softmax_fwd(x)
    assert np.abs(a - b).max() < 1e-14
    dy = rng.standard_normal((50, 17))
    assert np.abs(knp.softmax_bwd(a, dy) - kc.softmax_bwd(b, dy)).max() < 1e-13


@needs_compiled
def test_layernorm_agreement(rng):
    x = rng.standard_normal((40, 24))
    g, b = rng.standard_normal(24), rng.standard_normal(24)
    ya, xa, ra = knp.layernorm_fwd(x, g, b, 1e-5)
    yb, xb, rb = kc.layernorm_fwd(x, g, b, 1e-5)
    assert np.abs(ya - yb).max() < 1e-12
    dy = rng.standard_normal((40, 24))
    da = knp.layernorm_bwd(dy, xa, ra, g)
    db = kc.layernorm_bwd(dy, xb, rb, g)
    for u, v in zip(da, db):
        assert np.abs(u - v).max() < 1e-12


@needs_compiled
def test_interp_agreement_and_node_exactness(rng):
    res = np.array([5, 7], dtype=np.int64)
    lo = np.array([-1.0, -1.0])
    hi = np.array([1.0, 1.0])
    values = rng.standard_normal((35, 2))
    pts = rng.uniform(-1, 1, (200, 2))
    a = knp.interp_multilinear(values, res, lo, hi, pts)
    b = kc.interp_multilinear(values, res, lo, hi, pts)
    assert np.abs(a - b).max() < 1e-14
    # node snap: both backends reproduce node values exactly
    xs = np.linspace(-1, 1, 5)
    ys = np.linspace(-1, 1, 7)
    nodes = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    assert np.array_equal(knp.interp_multilinear(values, res, lo, hi, nodes), values)
    assert np.array_equal(kc.interp_multilinear(values, res, lo, hi, nodes), values)


@needs_compiled
def test_nn_dists_agreement(rng):
    a = rng.standard_normal((33, 3))
    b = rng.standard_normal((47, 3))
    assert np.abs(knp.nn_min_dists(a, b) - kc.nn_min_dists(a, b)).max() < 1e-14


@needs_compiled
def test_full_forward_close_across_backends(tmp_path):
    """The denoiser forward agrees across backends to reassociation error."""
    script = r"""
import json, sys
import numpy as np
from fndiff import denoiser as dn
cfg = dn.ModelConfig(domain_dim=2, range_dim=1, latents=8, width=16, stages=2,
                     heads=2, freqs=3, mlp_ratio=2)
params = dn.init_params(cfg, seed=3)
rng = np.random.default_rng(7)
out = dn.forward_batch(
    params,
    rng.uniform(-1, 1, (2, 12, 2)), rng.standard_normal((2, 12, 1)),
    rng.uniform(-1, 1, (2, 3, 2)), np.zeros((2, 3, 1)),
    rng.uniform(0.1, 0.9, 2), rng.uniform(-1, 1, (2, 5, 2)),
)
np.save(sys.argv[1], out.data)
"""
    outs = {}
    for backend in ("compiled", "python"):
        path = tmp_path / f"{backend}.npy"
        env = dict(os.environ, FNDIFF_BACKEND=backend)
        subprocess.run([sys.executable, "-c", script, str(path)], env=env, check=True)
        outs[backend] = np.load(path)
    assert np.abs(outs["compiled"] - outs["python"]).max() < 1e-10


def test_python_backend_forced(tmp_path):
    env = dict(os.environ, FNDIFF_BACKEND="python")
    got = subprocess.run(
        [sys.executable, "-c", "import fndiff; print(fndiff.backend_name())"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert got.stdout.strip() == "python"
