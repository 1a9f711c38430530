"""Forward noising, the training loop, and the deterministic functional sampler.

The sampler keeps one fixed context set for the whole run: the context values
are the only state carried across steps, and each update mixes the current
values with the denoiser's clean-function prediction. Because the noise scale
vanishes at t=0, the final function depends only on the penultimate context
state, so arbitrary points are evaluated with a single denoiser call on that
state (never by interpolating context values). Generated functions are
therefore resolution-free evaluables.

Training draws every random quantity from streams keyed by (seed, label,
step, slot); a resumed run at step k replays exactly the stream an
uninterrupted run would have used.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import adcore as ad
from . import denoiser as dn
from . import rng
from .adcore import Tape
from .dataset import ContextSet, FunctionSample, QuerySet, sample_context, sample_queries
from .denoiser import DenoiserParams
from .noise_field import DomainSpec, sample_noise_field
from .schedule import NoiseSchedule, timestep_grid

__all__ = [
    "DiffusionState", "TrainConfig", "NonFiniteLossError",
    "forward_noise", "ddim_step", "sample", "SampleResult",
    "NetDenoiser", "OracleDenoiser", "GeneratedFunction",
    "Trainer", "Adam", "default_noise_resolution",
]

_EVAL_CHUNK = 512


class NonFiniteLossError(RuntimeError):
    """Training produced a non-finite loss; carries the offending step."""

    def __init__(self, step: int, t_values):
        super().__init__(f"non-finite loss at step {step} (t draws: {t_values})")
        self.step = step


def default_noise_resolution(dim: int) -> list[int]:
    """Desk-scale noise grid: 32 nodes per axis up to 2-D, 16 in 3-D."""
    return [16 if dim == 3 else 32] * dim


def forward_noise(f0_values: np.ndarray, g_values: np.ndarray, t: float,
                  schedule: NoiseSchedule | None = None) -> np.ndarray:
    """Noised state values: alpha(t) * f0 + sigma(t) * g, element-wise."""
    f0_values = np.asarray(f0_values, dtype=np.float64)
    g_values = np.asarray(g_values, dtype=np.float64)
    if f0_values.shape != g_values.shape:
        raise ValueError(f"value shapes differ: {f0_values.shape} vs {g_values.shape}")
    alpha, sigma = (schedule or NoiseSchedule()).alpha_sigma(t)
    return alpha * f0_values + sigma * g_values


# --- denoiser adapters -----------------------------------------------------------

class NetDenoiser:
    """Network-backed denoiser with the sampler's predict() interface."""

    def __init__(self, params: DenoiserParams):
        self.params = params

    def predict(self, ctx_coords, ctx_values, condition, t, query_coords) -> np.ndarray:
        cond = condition
        out = dn.forward(
            self.params,
            ContextSet(ctx_coords, ctx_values),
            cond,
            float(t),
            QuerySet(np.asarray(query_coords, dtype=np.float64)),
        )
        return out


class OracleDenoiser:
    """Perfect denoiser: predicts the wrapped target function regardless of
    the noised state. Used to verify the sampler's algebra."""

    def __init__(self, target):
        self.target = target

    def predict(self, ctx_coords, ctx_values, condition, t, query_coords) -> np.ndarray:
        return np.asarray(self.target(np.asarray(query_coords, dtype=np.float64)))


def _as_denoiser(model) -> object:
    if isinstance(model, DenoiserParams):
        return NetDenoiser(model)
    if hasattr(model, "predict"):
        return model
    raise TypeError(f"need DenoiserParams or an object with .predict, got {type(model)}")


# --- sampling ---------------------------------------------------------------------

@dataclass(frozen=True)
class DiffusionState:
    """Context coordinates (fixed for a whole run) and their current values."""

    coords: np.ndarray
    values: np.ndarray
    t: float
    step_index: int


def ddim_step(model, state: DiffusionState, s: float, schedule: NoiseSchedule | None = None,
              condition=None) -> DiffusionState:
    """One deterministic update of the context values from time t down to s.

    new = (sigma_s/sigma_t) * current + (alpha_s - sigma_s*alpha_t/sigma_t) * D(...)
    with the denoiser evaluated at the context coordinates as queries.
    s = t is the identity; s = 0 returns the denoiser output exactly.
    """
    sched = schedule or NoiseSchedule()
    if s > state.t:
        raise ValueError(f"ddim_step needs s <= t, got s={s}, t={state.t}")
    alpha_t, sigma_t = sched.alpha_sigma(state.t)
    if sigma_t <= sched.eps_sigma:
        raise ValueError(f"sigma(t) = {sigma_t} at t = {state.t} is below the division guard")
    alpha_s, sigma_s = sched.alpha_sigma(s)
    denoiser = _as_denoiser(model)
    pred = denoiser.predict(state.coords, state.values, condition, state.t, state.coords)
    coef_state = sigma_s / sigma_t
    coef_pred = alpha_s - sigma_s * alpha_t / sigma_t
    new_values = coef_state * state.values + coef_pred * pred
    return DiffusionState(state.coords, new_values, float(s), state.step_index - 1)


class GeneratedFunction:
    """A sampled function: evaluable anywhere via one denoiser call per batch
    over the penultimate context state. No grid is involved, and each point's
    value is independent of whatever other points are evaluated with it."""

    def __init__(self, model, state: DiffusionState, condition=None):
        self.denoiser = _as_denoiser(model)
        self.state = state
        self.condition = condition

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        outs = []
        for start in range(0, len(points), _EVAL_CHUNK):
            chunk = points[start : start + _EVAL_CHUNK]
            # keep every BLAS call on the >=2-row gemm path: a 1-row matmul
            # takes the gemv path and differs in ulps, which would break
            # bit-equality of values across different evaluation batches
            padded = len(chunk) == 1
            if padded:
                chunk = np.concatenate([chunk, chunk], axis=0)
            vals = self.denoiser.predict(
                self.state.coords, self.state.values, self.condition, self.state.t, chunk
            )
            outs.append(vals[:1] if padded else vals)
        return np.concatenate(outs, axis=0)


@dataclass(frozen=True)
class SampleResult:
    generated: GeneratedFunction
    final_state: DiffusionState
    trace: tuple
    query_values: np.ndarray | None


def sample(
    model,
    condition,
    domain: DomainSpec,
    num_steps: int,
    seed: int,
    queries: np.ndarray | None = None,
    *,
    context_size: int = 256,
    context_strategy: str = "uniform",
    noise_resolution=None,
    range_dim: int = 1,
    schedule: NoiseSchedule | None = None,
    step_callback=None,
) -> SampleResult:
    """Run the deterministic sampler and return the generated function.

    The context set and the initial noise function are drawn once per run;
    the loop walks the timestep grid down to its smallest nonzero time, and
    the final (t=0) update is fused into the returned evaluable: arbitrary
    queries are one denoiser call on the penultimate context state.
    """
    if num_steps < 1:
        raise ValueError(f"num_steps must be >= 1, got {num_steps}")
    sched = schedule or NoiseSchedule()
    grid = timestep_grid(num_steps)
    ctx = sample_context(domain, context_size, rng.derive_key("sample-ctx", int(seed)),
                         strategy=context_strategy)
    noise_resolution = noise_resolution or default_noise_resolution(domain.dim)
    g = sample_noise_field(domain, noise_resolution, rng.derive_key("sample-noise", int(seed)),
                           channels=range_dim)
    state = DiffusionState(ctx.coords, g(ctx.coords), 1.0, num_steps)
    trace = []
    for k in range(num_steps, 1, -1):
        s = float(grid.values[num_steps - k + 1])
        new_state = ddim_step(model, state, s, sched, condition)
        change = float(np.sqrt(np.mean((new_state.values - state.values) ** 2)))
        trace.append({"step": num_steps - k + 1, "t": s, "context_rmse_change": change})
        state = new_state
        if step_callback is not None:
            step_callback(state)
    generated = GeneratedFunction(model, state, condition)
    query_values = generated(queries) if queries is not None else None
    return SampleResult(generated, state, tuple(trace), query_values)


# --- training ----------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    steps: int = 1000
    batch_size: int = 16
    lr: float = 3e-4
    warmup: int = 200
    lr_decay: str = "cosine"  # or "none"
    lr_floor: float = 0.05    # cosine decays to lr_floor * lr
    clip_norm: float = 1.0
    seed: int = 0
    context_size: int = 256
    query_size: int = 64
    context_strategy: str = "uniform"
    query_strategy: str = "mixed"   # uniform | mixed | grid | context
    near_fraction: float = 0.5
    near_sigma: float = 0.05
    noise_resolution: tuple | None = None
    loss_weight: object = None      # callable t -> w(t); schedule's default if None

    def __post_init__(self):
        if min(self.steps, self.batch_size, self.context_size, self.query_size) < 1:
            raise ValueError("steps, batch_size, context_size, query_size must be positive")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")


class Adam:
    """Bias-corrected per-parameter first/second-moment optimizer."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.count = 0

    def update(self, params: DenoiserParams, grads: dict[str, np.ndarray], lr: float) -> None:
        self.count += 1
        c1 = 1.0 - self.beta1**self.count
        c2 = 1.0 - self.beta2**self.count
        for name, tensor in params.items():
            g = grads.get(name)
            if g is None:
                continue
            m = self.m.setdefault(name, np.zeros_like(tensor.data))
            v = self.v.setdefault(name, np.zeros_like(tensor.data))
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            tensor.data -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _clip_global_norm(grads: dict[str, np.ndarray], max_norm: float):
    """Scale so the global norm is at most max_norm; out-of-place, since grad
    arrays coming out of backward may alias each other."""
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total > max_norm:
        factor = max_norm / (total + 1e-12)
        grads = {name: g * factor for name, g in grads.items()}
    return grads, total


@dataclass
class _StepParts:
    sample: FunctionSample
    t: float
    ctx_coords: np.ndarray
    ctx_values: np.ndarray
    query_coords: np.ndarray
    query_targets: np.ndarray


class Trainer:
    """One-thread training loop over a fixed sample list."""

    def __init__(self, params: DenoiserParams, samples: list, config: TrainConfig,
                 schedule: NoiseSchedule | None = None):
        if not samples:
            raise ValueError("no training samples")
        self.params = params
        self.samples = list(samples)
        self.config = config
        self.schedule = schedule or NoiseSchedule()
        self.optimizer = Adam()
        self.domain = self.samples[0].domain
        self.range_dim = self.samples[0].range_dim
        self.noise_resolution = list(
            config.noise_resolution or default_noise_resolution(self.domain.dim)
        )
        self._weight_fn = config.loss_weight or self.schedule.loss_weight
        self.step_count = 0
        self.last_per_sample = np.zeros(0)
        self.last_t = np.zeros(0)

    # -- per-step randomness, keyed by absolute step and batch slot --

    def draw_parts(self, step: int, slot: int, sample: FunctionSample) -> _StepParts:
        seed = self.config.seed
        t = float(
            rng.stream("t", seed, step, slot).uniform(self.schedule.eps_sigma, 1.0)
        )
        ctx = sample_context(
            self.domain, self.config.context_size,
            rng.derive_key("ctx", seed, step, slot), strategy=self.config.context_strategy,
        )
        noise = sample_noise_field(
            self.domain, self.noise_resolution,
            rng.derive_key("noise", seed, step, slot), channels=self.range_dim,
        )
        ctx_values = forward_noise(
            sample.target(ctx.coords), noise(ctx.coords), t, self.schedule
        )
        if self.config.query_strategy == "context":
            query_coords = ctx.coords
        else:
            strategy = self.config.query_strategy
            queries = sample_queries(
                self.domain, self.config.query_size,
                rng.derive_key("query", seed, step, slot),
                strategy=strategy,
                boundary_source=sample.target if strategy == "mixed" else None,
                near_fraction=self.config.near_fraction,
                near_sigma=self.config.near_sigma,
            )
            query_coords = queries.coords
        return _StepParts(
            sample=sample,
            t=t,
            ctx_coords=ctx.coords,
            ctx_values=ctx_values,
            query_coords=query_coords,
            query_targets=sample.target(query_coords),
        )

    def pick_batch(self, step: int) -> list:
        idx = rng.stream("batch", self.config.seed, step).integers(
            0, len(self.samples), self.config.batch_size
        )
        return [self.samples[int(i)] for i in idx]

    # -- loss -----------------------------------------------------------------

    def loss_of_parts(self, parts: list, with_tape: bool = False):
        """Mean over the batch of w(t) * per-query-mean squared error.

        Returns (loss_tensor, tape or None). One tape with a leading batch
        axis computes exactly the average of the per-sample losses.
        """
        batch = len(parts)
        ctx_coords = np.stack([p.ctx_coords for p in parts])
        ctx_values = np.stack([p.ctx_values for p in parts])
        cond_coords = np.stack([p.sample.condition_points for p in parts])
        cond_values = np.stack([p.sample.condition_values for p in parts])
        t = np.asarray([p.t for p in parts])
        query_coords = np.stack([p.query_coords for p in parts])
        targets = np.stack([p.query_targets for p in parts])
        weights = np.asarray([self._weight_fn(p.t) for p in parts]).reshape(batch, 1, 1)
        n_query = query_coords.shape[1]

        def compute():
            pred = dn.forward_batch(
                self.params, ctx_coords, ctx_values, cond_coords, cond_values, t, query_coords
            )
            diff = ad.sub(pred, ad.tensor(targets))
            weighted = ad.mul(ad.mul(diff, diff), ad.tensor(weights))
            self.last_per_sample = weighted.data.sum(axis=(1, 2)) / n_query
            self.last_t = t
            return ad.scale(ad.reduce_sum(weighted), 1.0 / (batch * n_query))

        if not with_tape:
            return compute(), None
        tape = Tape()
        with tape:
            loss = compute()
        return loss, tape

    def compute_loss(self, step: int, samples: list | None = None) -> float:
        batch = samples if samples is not None else self.pick_batch(step)
        parts = [self.draw_parts(step, j, s) for j, s in enumerate(batch)]
        loss, _ = self.loss_of_parts(parts)
        return loss.item()

    # -- updates ----------------------------------------------------------------

    def lr_at(self, step: int) -> float:
        cfg = self.config
        if step < cfg.warmup:
            return cfg.lr * (step + 1) / cfg.warmup
        if cfg.lr_decay == "none" or cfg.steps <= cfg.warmup:
            return cfg.lr
        progress = (step - cfg.warmup) / max(1, cfg.steps - cfg.warmup)
        floor = cfg.lr_floor
        return cfg.lr * (floor + (1.0 - floor) * 0.5 * (1.0 + np.cos(np.pi * progress)))

    def step(self, samples: list | None = None) -> float:
        """One optimizer step; returns the (pre-update) batch loss."""
        step = self.step_count
        batch = samples if samples is not None else self.pick_batch(step)
        parts = [self.draw_parts(step, j, s) for j, s in enumerate(batch)]
        loss, tape = self.loss_of_parts(parts, with_tape=True)
        value = loss.item()
        if not np.isfinite(value):
            raise NonFiniteLossError(step, [p.t for p in parts])
        grad_map = ad.backward(loss, tape)
        grads = {name: grad_map[t] for name, t in self.params.items() if t in grad_map}
        grads, _ = _clip_global_norm(grads, self.config.clip_norm)
        self.optimizer.update(self.params, grads, self.lr_at(step))
        self.step_count += 1
        return value

    def train_step(self, sample: FunctionSample) -> float:
        """Single-sample step (batch of one); the batched path is identical math."""
        return self.step([sample])

    # -- exact-resume state -------------------------------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Float64 training state for exact resume (params + moments + counters)."""
        out = {"__step": np.asarray([self.step_count, self.optimizer.count], dtype=np.int64)}
        for name, tensor in self.params.items():
            out[f"p:{name}"] = tensor.data
            if name in self.optimizer.m:
                out[f"m:{name}"] = self.optimizer.m[name]
                out[f"v:{name}"] = self.optimizer.v[name]
        return out

    def load_state_arrays(self, arrays) -> None:
        self.step_count = int(arrays["__step"][0])
        self.optimizer.count = int(arrays["__step"][1])
        for name, tensor in self.params.items():
            tensor.data = np.ascontiguousarray(arrays[f"p:{name}"], dtype=np.float64)
            if f"m:{name}" in arrays:
                self.optimizer.m[name] = np.ascontiguousarray(arrays[f"m:{name}"], dtype=np.float64)
                self.optimizer.v[name] = np.ascontiguousarray(arrays[f"v:{name}"], dtype=np.float64)
