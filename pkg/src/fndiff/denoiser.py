"""The denoising network: a learnable latent vector set refined by stages of
(context-chunk cross-attention -> time-modulated self-attention), then read
out by query cross-attention.

The context set is split into `stages` contiguous chunks; each stage's
cross-attention keys/values are one chunk's tokens concatenated with the
condition tokens, so every stage sees the condition. Time enters through
adaptive layer normalization: a sinusoidal embedding of t is projected to
per-stage scale/shift pairs (zero-initialized, so stages start as identity
modulation). Each query token attends into the final latent set
independently of all other queries, which is what lets a fixed latent state
act as a continuous, resolution-free function.

Parameters are immutable during inference and shareable across threads;
training mutates them between steps on a single writer thread.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import adcore as ad
from . import rng
from .adcore import Tensor
from .dataset import ContextSet, QuerySet

__all__ = [
    "ModelConfig", "DenoiserParams", "CheckpointMismatch",
    "init_params", "embed_coords", "embed_time", "forward", "forward_batch",
    "save_checkpoint", "load_checkpoint", "CHECKPOINT_MAGIC",
]

CHECKPOINT_MAGIC = b"FNDF0001"


class CheckpointMismatch(ValueError):
    """Checkpoint does not match the expected model configuration/hash."""


@dataclass(frozen=True)
class ModelConfig:
    domain_dim: int = 2
    range_dim: int = 1
    latents: int = 64
    width: int = 64
    stages: int = 2
    heads: int = 4
    freqs: int = 6
    mlp_ratio: int = 4
    head_mlp_ratio: int = 8
    value_tile: int = 16

    def __post_init__(self):
        if self.width % self.heads != 0:
            raise ValueError(f"width {self.width} not divisible by heads {self.heads}")
        if self.width % 2 != 0:
            raise ValueError(f"width must be even for the time embedding, got {self.width}")
        if min(self.latents, self.width, self.stages, self.heads, self.freqs,
               self.mlp_ratio, self.head_mlp_ratio, self.value_tile) < 1:
            raise ValueError("all model dimensions must be positive")

    @property
    def coord_width(self) -> int:
        return self.domain_dim * (2 * self.freqs + 1)

    @property
    def token_width(self) -> int:
        # function values are tiled so their variance share survives the
        # shared projection next to the much wider coordinate embedding
        return self.coord_width + self.range_dim * self.value_tile


@dataclass
class DenoiserParams:
    """All learnable tensors, keyed by name in checkpoint manifest order."""

    config: ModelConfig
    tensors: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def items(self):
        return self.tensors.items()


# --- initialization -----------------------------------------------------------

def _xavier(gen, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return gen.uniform(-limit, limit, (fan_in, fan_out))


def init_params(config: ModelConfig, seed: int) -> DenoiserParams:
    gen = rng.stream("init", int(seed))
    d = config.width
    t: dict[str, Tensor] = {}

    def add(name, data):
        t[name] = ad.param(data)

    def linear(prefix, fan_in, fan_out, zero=False):
        w = np.zeros((fan_in, fan_out)) if zero else _xavier(gen, fan_in, fan_out)
        add(prefix + "_w", w)
        add(prefix + "_b", np.zeros(fan_out))

    def lnorm(prefix):
        add(prefix + "_g", np.ones(d))
        add(prefix + "_b", np.zeros(d))

    def attention(prefix):
        # no key bias: a constant shift of every key moves all scores in a
        # softmax row equally, so its gradient is identically zero
        linear(f"{prefix}_wq", d, d)
        add(f"{prefix}_wk_w", _xavier(gen, d, d))
        linear(f"{prefix}_wv", d, d)
        linear(f"{prefix}_wo", d, d)

    add("latent_init", gen.standard_normal((config.latents, d)) * 0.02)
    linear("token_proj", config.token_width, d)
    add("role_ctx", np.zeros(d))
    add("role_cond", np.zeros(d))
    linear("time_mlp1", d, d)
    linear("time_mlp2", d, d)
    for s in range(config.stages):
        lnorm(f"s{s}_ln_q")
        lnorm(f"s{s}_ln_kv")
        attention(f"s{s}_ca")
        linear(f"s{s}_mod", d, 4 * d, zero=True)
        attention(f"s{s}_sa")
        linear(f"s{s}_mlp1", d, config.mlp_ratio * d)
        linear(f"s{s}_mlp2", config.mlp_ratio * d, d)
    linear("q_proj", config.coord_width, d)
    lnorm("qh_ln_q")
    lnorm("qh_ln_kv")
    attention("qh_ca")
    lnorm("qh_ln2")
    linear("qh_mlp1", d, config.head_mlp_ratio * d)
    linear("qh_mlp2", config.head_mlp_ratio * d, d)
    lnorm("out_ln")
    linear("head", d, config.range_dim, zero=True)
    return DenoiserParams(config, t)


# --- embeddings ----------------------------------------------------------------

def embed_coords(points: np.ndarray, freqs: int) -> np.ndarray:
    """Raw coordinates concatenated with sin/cos at power-of-two frequency
    bands (2^f * pi); injective on any bounded box since the raw coordinates
    are included."""
    points = np.asarray(points, dtype=np.float64)
    bands = (2.0 ** np.arange(freqs)) * np.pi
    angles = points[..., None] * bands  # (..., dim, F)
    flat = angles.reshape(points.shape[:-1] + (-1,))
    return np.concatenate([points, np.sin(flat), np.cos(flat)], axis=-1)


def _time_sinusoid(t: np.ndarray, width: int) -> np.ndarray:
    half = width // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    args = t[:, None] * 1000.0 * freqs[None, :]
    return np.concatenate([np.cos(args), np.sin(args)], axis=-1)


def embed_time(params: DenoiserParams, t: np.ndarray):
    """Sinusoidal embedding of t through a two-layer projection, plus the
    per-stage AdaLN (scale, shift) pairs derived from it.

    Returns (tvec, mods) where mods[s] = (scale_attn, shift_attn, scale_mlp,
    shift_mlp), each (B, 1, width). Zero-initialized modulation heads make
    every stage start as identity modulation (scale 1, shift 0).
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError(f"t must lie in [0, 1], got {t}")
    d = params.config.width
    sin = ad.tensor(_time_sinusoid(t, d))
    h = ad.gelu(ad.add(ad.matmul(sin, params["time_mlp1_w"]), params["time_mlp1_b"]))
    tvec = ad.add(ad.matmul(h, params["time_mlp2_w"]), params["time_mlp2_b"])
    mods = []
    for s in range(params.config.stages):
        raw = ad.add(ad.matmul(tvec, params[f"s{s}_mod_w"]), params[f"s{s}_mod_b"])
        pieces = []
        for k in range(4):
            part = ad.slice_axis(raw, 1, k * d, d)
            pieces.append(ad.reshape(part, (len(t), 1, d)))
        mods.append(tuple(pieces))
    return tvec, mods


# --- forward -------------------------------------------------------------------

def _heads_split(x: Tensor, heads: int) -> Tensor:
    b, n, d = x.shape
    return ad.transpose(ad.reshape(x, (b, n, heads, d // heads)), (0, 2, 1, 3))


def _heads_merge(x: Tensor) -> Tensor:
    b, h, n, hd = x.shape
    return ad.reshape(ad.transpose(x, (0, 2, 1, 3)), (b, n, h * hd))


def _attention(params, prefix: str, q_in: Tensor, kv_in: Tensor) -> Tensor:
    heads = params.config.heads
    head_dim = params.config.width // heads
    q = _heads_split(ad.add(ad.matmul(q_in, params[f"{prefix}_wq_w"]), params[f"{prefix}_wq_b"]), heads)
    k = _heads_split(ad.matmul(kv_in, params[f"{prefix}_wk_w"]), heads)
    v = _heads_split(ad.add(ad.matmul(kv_in, params[f"{prefix}_wv_w"]), params[f"{prefix}_wv_b"]), heads)
    scores = ad.scale(ad.matmul(q, ad.transpose(k)), 1.0 / np.sqrt(head_dim))
    mixed = ad.matmul(ad.softmax(scores, axis=-1), v)
    merged = _heads_merge(mixed)
    return ad.add(ad.matmul(merged, params[f"{prefix}_wo_w"]), params[f"{prefix}_wo_b"])


def _lnorm(params, prefix: str, x: Tensor) -> Tensor:
    return ad.layer_norm(x, params[f"{prefix}_g"], params[f"{prefix}_b"])


def _plain_norm(x: Tensor) -> Tensor:
    d = x.shape[-1]
    return ad.layer_norm(x, ad.tensor(np.ones(d)), ad.tensor(np.zeros(d)))


def _modulate(x: Tensor, scale: Tensor, shift: Tensor) -> Tensor:
    return ad.add(ad.mul(x, ad.add(scale, 1.0)), shift)


def _mlp(params, prefix: str, x: Tensor) -> Tensor:
    h = ad.gelu(ad.add(ad.matmul(x, params[f"{prefix}1_w"]), params[f"{prefix}1_b"]))
    return ad.add(ad.matmul(h, params[f"{prefix}2_w"]), params[f"{prefix}2_b"])


def _chunk_indices(n_context: int, stages: int) -> list[np.ndarray]:
    """Contiguous equal chunks; a short last chunk is tiled cyclically from
    its own entries (mask-free padding)."""
    if n_context < stages:
        raise ValueError(f"context size {n_context} smaller than stage count {stages}")
    chunk = -(-n_context // stages)
    out = []
    for s in range(stages):
        base = s * chunk
        avail = min(chunk, n_context - base)
        out.append(base + (np.arange(chunk) % avail))
    return out


def _tokenize(params, coords: np.ndarray, values: np.ndarray, role: str) -> Tensor:
    emb = embed_coords(coords, params.config.freqs)
    tiled = np.repeat(values, params.config.value_tile, axis=-1)
    raw = ad.tensor(np.concatenate([emb, tiled], axis=-1))
    tok = ad.add(ad.matmul(raw, params["token_proj_w"]), params["token_proj_b"])
    return ad.add(tok, params[role])


def forward_batch(
    params: DenoiserParams,
    ctx_coords: np.ndarray,
    ctx_values: np.ndarray,
    cond_coords: np.ndarray,
    cond_values: np.ndarray,
    t: np.ndarray,
    query_coords: np.ndarray,
) -> Tensor:
    """Batched denoiser pass: (B,C,dim)+(B,C,dy) context, (B,K,dim)+(B,K,dy)
    condition (K may be 0), (B,) times, (B,Q,dim) queries -> (B,Q,dy)."""
    cfg = params.config
    if ctx_values is None:
        raise ValueError("context values are required (attach the noised state first)")
    ctx_coords = np.asarray(ctx_coords, dtype=np.float64)
    ctx_values = np.asarray(ctx_values, dtype=np.float64)
    batch, n_ctx, _ = ctx_coords.shape
    if ctx_values.shape != (batch, n_ctx, cfg.range_dim):
        raise ValueError(
            f"context values shape {ctx_values.shape} does not match "
            f"(batch={batch}, n={n_ctx}, range_dim={cfg.range_dim})"
        )

    tvec, mods = embed_time(params, t)

    has_cond = cond_coords is not None and np.size(cond_coords) > 0
    if has_cond:
        tok_cond = _tokenize(params, cond_coords, cond_values, "role_cond")

    lat = ad.reshape(params["latent_init"], (1, cfg.latents, cfg.width))
    for s, idx in enumerate(_chunk_indices(n_ctx, cfg.stages)):
        tok_chunk = _tokenize(params, ctx_coords[:, idx], ctx_values[:, idx], "role_ctx")
        kv = ad.concat([tok_chunk, tok_cond], axis=1) if has_cond else tok_chunk
        lat = ad.add(
            lat, _attention(params, f"s{s}_ca", _lnorm(params, f"s{s}_ln_q", lat),
                            _lnorm(params, f"s{s}_ln_kv", kv))
        )
        sc_a, sh_a, sc_m, sh_m = mods[s]
        moded = _modulate(_plain_norm(lat), sc_a, sh_a)
        lat = ad.add(lat, _attention(params, f"s{s}_sa", moded, moded))
        moded = _modulate(_plain_norm(lat), sc_m, sh_m)
        lat = ad.add(lat, _mlp(params, f"s{s}_mlp", moded))

    q_emb = ad.tensor(embed_coords(query_coords, cfg.freqs))
    q_tok = ad.add(ad.matmul(q_emb, params["q_proj_w"]), params["q_proj_b"])
    h = ad.add(
        q_tok, _attention(params, "qh_ca", _lnorm(params, "qh_ln_q", q_tok),
                          _lnorm(params, "qh_ln_kv", lat))
    )
    h = ad.add(h, _mlp(params, "qh_mlp", _lnorm(params, "qh_ln2", h)))
    return ad.add(ad.matmul(_lnorm(params, "out_ln", h), params["head_w"]), params["head_b"])


def forward(
    params: DenoiserParams,
    context: ContextSet,
    condition,
    t: float,
    queries: QuerySet,
) -> np.ndarray:
    """Single-sample denoiser evaluation; returns (|Q|, range_dim) values.

    `condition` is a (points, values) pair or None for unconditional use.
    """
    if context.values is None:
        raise ValueError("context values are required (attach the noised state first)")
    if condition is None:
        cond_pts = np.zeros((1, 0, params.config.domain_dim))
        cond_vals = np.zeros((1, 0, params.config.range_dim))
    else:
        cond_pts, cond_vals = condition
        cond_pts = np.asarray(cond_pts, dtype=np.float64)[None]
        cond_vals = np.asarray(cond_vals, dtype=np.float64)[None]
    out = forward_batch(
        params,
        context.coords[None],
        context.values[None],
        cond_pts,
        cond_vals,
        np.asarray([t], dtype=np.float64),
        np.asarray(queries.coords, dtype=np.float64)[None],
    )
    return out.data[0]


# --- checkpoints -----------------------------------------------------------------

def config_hash(config_dict: dict) -> str:
    """Hash of a canonical-JSON config document (provenance stamp)."""
    blob = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def save_checkpoint(params: DenoiserParams, path: str, config_hash: str = "", meta: dict | None = None) -> None:
    """Write magic, JSON header (config, hash, tensor manifest), then
    little-endian float32 payloads in manifest order."""
    manifest = [{"name": name, "shape": list(t.data.shape)} for name, t in params.items()]
    header = {
        "format": 1,
        "model": asdict(params.config),
        "config_hash": config_hash,
        "manifest": manifest,
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, t in params.items():
            fh.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())


def load_checkpoint(path: str, expected_hash: str | None = None,
                    expected_config: ModelConfig | None = None):
    """Read a checkpoint; returns (params, header dict).

    Refuses (CheckpointMismatch) on bad magic, hash mismatch, or model-config
    mismatch; corrupted manifests fail shape validation.
    """
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointMismatch(f"{path}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        config = ModelConfig(**header["model"])
        if expected_hash is not None and header["config_hash"] != expected_hash:
            raise CheckpointMismatch(
                f"{path}: config hash {header['config_hash'][:12]}... does not match "
                f"expected {expected_hash[:12]}..."
            )
        if expected_config is not None and config != expected_config:
            raise CheckpointMismatch(
                f"{path}: stored model config {config} does not match expected {expected_config}"
            )
        reference = init_params(config, seed=0)
        ref_shapes = {name: t.data.shape for name, t in reference.items()}
        tensors: dict[str, Tensor] = {}
        for entry in header["manifest"]:
            name, shape = entry["name"], tuple(entry["shape"])
            if name not in ref_shapes or ref_shapes[name] != shape:
                raise CheckpointMismatch(f"{path}: unexpected tensor {name} with shape {shape}")
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(4 * count)
            if len(raw) != 4 * count:
                raise CheckpointMismatch(f"{path}: truncated payload for tensor {name}")
            data = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
            tensors[name] = ad.param(data)
        if set(tensors) != set(ref_shapes):
            missing = sorted(set(ref_shapes) - set(tensors))
            raise CheckpointMismatch(f"{path}: manifest missing tensors {missing}")
    return DenoiserParams(config, tensors), header
