"""Denoiser network: embeddings, forward contracts, checkpoints."""

import numpy as np
import pytest

import fndiff.adcore as ad
from fndiff import denoiser as dn
from fndiff.adcore import Tape
from fndiff.dataset import ContextSet, QuerySet

from conftest import gradcheck

MICRO = dn.ModelConfig(domain_dim=2, range_dim=1, latents=4, width=8, stages=2,
                       heads=2, freqs=3, mlp_ratio=2)


@pytest.fixture
def micro_params():
    return dn.init_params(MICRO, seed=0)


def _random_inputs(rng, batch=1, n_ctx=6, n_cond=2, n_query=3, dim=2, dy=1):
    return dict(
        ctx_coords=rng.uniform(-1, 1, (batch, n_ctx, dim)),
        ctx_values=rng.standard_normal((batch, n_ctx, dy)),
        cond_coords=rng.uniform(-1, 1, (batch, n_cond, dim)),
        cond_values=np.zeros((batch, n_cond, dy)),
        t=rng.uniform(0.1, 0.9, batch),
        query_coords=rng.uniform(-1, 1, (batch, n_query, dim)),
    )


# --- embeddings ------------------------------------------------------------------

def test_embed_coords_at_origin():
    emb = dn.embed_coords(np.zeros((1, 2)), freqs=4)
    assert emb.shape == (1, 2 * (2 * 4 + 1))
    assert np.array_equal(emb[0, :2], [0.0, 0.0])
    assert np.array_equal(emb[0, 2 : 2 + 8], np.zeros(8))      # sin block
    assert np.array_equal(emb[0, 2 + 8 :], np.ones(8))          # cos block


def test_embed_coords_width():
    emb = dn.embed_coords(np.zeros((5, 3)), freqs=6)
    assert emb.shape == (5, 3 * 13)


def test_embed_coords_injective_on_grid():
    axes = np.linspace(-1, 1, 64)
    grid = np.stack(np.meshgrid(axes, axes, indexing="ij"), axis=-1).reshape(-1, 2)
    emb = dn.embed_coords(grid, freqs=6)
    assert len(np.unique(emb, axis=0)) == len(grid)


def test_embed_time_deterministic(micro_params):
    a, _ = dn.embed_time(micro_params, 0.3)
    b, _ = dn.embed_time(micro_params, 0.3)
    assert np.array_equal(a.data, b.data)


def test_embed_time_distinguishes_endpoints(micro_params):
    a, _ = dn.embed_time(micro_params, 0.0)
    b, _ = dn.embed_time(micro_params, 1.0)
    assert np.linalg.norm(a.data - b.data) > 0.0


def test_adaln_identity_at_init(micro_params):
    _, mods = dn.embed_time(micro_params, 0.42)
    for stage_mods in mods:
        for piece in stage_mods:
            assert np.array_equal(piece.data, np.zeros_like(piece.data))


def test_embed_time_range_guard(micro_params):
    with pytest.raises(ValueError):
        dn.embed_time(micro_params, 1.5)


# --- forward contracts -------------------------------------------------------------

def test_forward_output_shape(micro_params, rng):
    inp = _random_inputs(rng)
    out = dn.forward_batch(micro_params, **inp)
    assert out.shape == (1, 3, 1)


def test_chunk_permutation_invariance(rng):
    cfg = dn.ModelConfig(domain_dim=2, range_dim=1, latents=4, width=8, stages=2,
                         heads=2, freqs=3, mlp_ratio=2)
    params = dn.init_params(cfg, seed=1)
    _randomize(params, rng)
    inp = _random_inputs(rng, n_ctx=8)  # divisible into 2 chunks of 4
    base = dn.forward_batch(params, **inp).data

    perm = np.arange(8)
    perm[:4] = perm[:4][[2, 0, 3, 1]]  # permute inside the first chunk only
    shuffled = dict(inp)
    shuffled["ctx_coords"] = inp["ctx_coords"][:, perm]
    shuffled["ctx_values"] = inp["ctx_values"][:, perm]
    out = dn.forward_batch(params, **shuffled).data
    assert np.abs(out - base).max() < 1e-10


def test_duplicate_query_row_duplicates_output(micro_params, rng):
    inp = _random_inputs(rng, n_query=4)
    inp["query_coords"][0, 2] = inp["query_coords"][0, 0]
    out = dn.forward_batch(micro_params, **inp).data
    assert np.array_equal(out[0, 2], out[0, 0])


def test_query_independence(rng):
    params = dn.init_params(MICRO, seed=2)
    _randomize(params, rng)
    inp = _random_inputs(rng, n_query=5)
    full = dn.forward_batch(params, **inp).data
    for q in range(5):
        single = dict(inp)
        single["query_coords"] = inp["query_coords"][:, q : q + 1]
        got = dn.forward_batch(params, **single).data
        assert np.abs(got[0, 0] - full[0, q]).max() < 1e-10


def test_condition_sensitivity(rng):
    params = dn.init_params(MICRO, seed=3)
    _randomize(params, rng)
    inp = _random_inputs(rng)
    base = dn.forward_batch(params, **inp).data
    zeroed = dict(inp)
    zeroed["cond_coords"] = np.zeros_like(inp["cond_coords"])
    out = dn.forward_batch(params, **zeroed).data
    assert np.abs(out - base).max() > 0.0


def test_unconditional_mode(micro_params, rng):
    inp = _random_inputs(rng, n_cond=0)
    out = dn.forward_batch(micro_params, **inp)
    assert out.shape == (1, 3, 1)


def test_missing_context_values_rejected(micro_params, rng):
    inp = _random_inputs(rng)
    with pytest.raises(ValueError, match="context values"):
        dn.forward_batch(micro_params, inp["ctx_coords"], None, inp["cond_coords"],
                         inp["cond_values"], inp["t"], inp["query_coords"])
    ctx = ContextSet(inp["ctx_coords"][0])
    with pytest.raises(ValueError, match="context values"):
        dn.forward(micro_params, ctx, None, 0.5, QuerySet(inp["query_coords"][0]))


def test_t_out_of_range_rejected(micro_params, rng):
    inp = _random_inputs(rng)
    inp["t"] = np.array([1.3])
    with pytest.raises(ValueError):
        dn.forward_batch(micro_params, **inp)


def test_context_smaller_than_stages_rejected(micro_params, rng):
    inp = _random_inputs(rng, n_ctx=1)
    with pytest.raises(ValueError, match="stage"):
        dn.forward_batch(micro_params, **inp)


def test_forward_wrapper_matches_batch(micro_params, rng):
    inp = _random_inputs(rng)
    batch = dn.forward_batch(micro_params, **inp).data[0]
    single = dn.forward(
        micro_params,
        ContextSet(inp["ctx_coords"][0], inp["ctx_values"][0]),
        (inp["cond_coords"][0], inp["cond_values"][0]),
        float(inp["t"][0]),
        QuerySet(inp["query_coords"][0]),
    )
    assert np.array_equal(single, batch)


def _randomize(params, rng, scale=0.2):
    for _, p in params.items():
        p.data = p.data + rng.standard_normal(p.data.shape) * scale


def test_full_micro_gradient_check(rng):
    params = dn.init_params(MICRO, seed=4)
    _randomize(params, rng)
    inp = _random_inputs(rng)
    target = rng.standard_normal((1, 3, 1))

    def loss():
        out = dn.forward_batch(params, **inp)
        diff = ad.sub(out, ad.tensor(target))
        return ad.reduce_mean(ad.mul(diff, diff))

    worst = gradcheck(loss, dict(params.items()), tol=1e-4, max_coords=3)
    assert worst < 1e-4


# --- checkpoints --------------------------------------------------------------------

def test_checkpoint_roundtrip_idempotent(tmp_path, micro_params):
    p1 = tmp_path / "a.fndf"
    p2 = tmp_path / "b.fndf"
    dn.save_checkpoint(micro_params, str(p1), config_hash="abc123")
    loaded, header = dn.load_checkpoint(str(p1))
    assert header["config_hash"] == "abc123"
    dn.save_checkpoint(loaded, str(p2), config_hash=header["config_hash"], meta=header["meta"])
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_forward_within_float32_quantization(tmp_path, rng):
    params = dn.init_params(MICRO, seed=5)
    _randomize(params, rng)
    inp = _random_inputs(rng)
    before = dn.forward_batch(params, **inp).data
    path = tmp_path / "m.fndf"
    dn.save_checkpoint(params, str(path))
    loaded, _ = dn.load_checkpoint(str(path))
    after = dn.forward_batch(loaded, **inp).data
    scale = max(1.0, np.abs(before).max())
    assert np.abs(after - before).max() / scale < 1e-6


def test_checkpoint_width_mismatch(tmp_path, micro_params):
    path = tmp_path / "m.fndf"
    dn.save_checkpoint(micro_params, str(path))
    wider = dn.ModelConfig(domain_dim=2, range_dim=1, latents=4, width=16, stages=2,
                           heads=2, freqs=3, mlp_ratio=2)
    with pytest.raises(dn.CheckpointMismatch):
        dn.load_checkpoint(str(path), expected_config=wider)


def test_checkpoint_hash_mismatch(tmp_path, micro_params):
    path = tmp_path / "m.fndf"
    dn.save_checkpoint(micro_params, str(path), config_hash="right")
    with pytest.raises(dn.CheckpointMismatch):
        dn.load_checkpoint(str(path), expected_hash="wrong")


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "m.fndf"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
    with pytest.raises(dn.CheckpointMismatch, match="magic"):
        dn.load_checkpoint(str(path))


def test_checkpoint_truncated(tmp_path, micro_params):
    path = tmp_path / "m.fndf"
    dn.save_checkpoint(micro_params, str(path))
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) - 10])
    with pytest.raises(dn.CheckpointMismatch, match="truncated"):
        dn.load_checkpoint(str(path))
