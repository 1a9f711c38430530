"""Operator surface: train, sample, eval, inspect-schedule.

Exit codes: 0 success, 2 configuration error, 3 numeric failure during
training, 4 checkpoint/config mismatch or unreadable artifact. Every output
artifact embeds the run's config hash. All commands are deterministic given
(config, seed); `--threads` caps BLAS worker counts and may change only wall
time.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import denoiser as dn
from . import diffusion, geometry, metrics
from .config import ConfigError, load_config
from .denoiser import CheckpointMismatch
from .diffusion import NonFiniteLossError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_ARTIFACT = 4


def _resume_path(ckpt_path: str) -> str:
    return ckpt_path[: -len(".fndf")] + ".resume.npz" if ckpt_path.endswith(".fndf") else ckpt_path + ".resume.npz"


def _save_train_state(trainer, params, out_dir, step, cfg):
    ckpt = os.path.join(out_dir, f"ckpt_{step}.fndf")
    dn.save_checkpoint(
        params, ckpt, config_hash=cfg.content_hash,
        meta={"step": step, "model_hash": cfg.model_hash},
    )
    np.savez(_resume_path(ckpt), **trainer.state_arrays())
    return ckpt


def _bucket_means(t_values, losses):
    """Mean loss per timestep quartile; nan marks an empty bucket."""
    edges = [0.0, 0.25, 0.5, 0.75, 1.0 + 1e-12]
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (t_values >= lo) & (t_values < hi)
        out.append(float(losses[mask].mean()) if mask.any() else float("nan"))
    return out


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    train_cfg = cfg.train_config()
    if args.seed is not None:
        from dataclasses import replace

        train_cfg = replace(train_cfg, seed=args.seed)
    samples = cfg.make_dataset()
    params = dn.init_params(cfg.model_config(), seed=train_cfg.seed)
    trainer = diffusion.Trainer(params, samples, train_cfg, cfg.schedule())

    if args.resume:
        resume = args.resume
        if resume.endswith(".fndf") and os.path.exists(_resume_path(resume)):
            resume = _resume_path(resume)
        if resume.endswith(".npz"):
            with np.load(resume) as arrays:
                trainer.load_state_arrays(arrays)
        else:
            loaded, header = dn.load_checkpoint(resume, expected_config=cfg.model_config())
            for name, t in trainer.params.items():
                t.data = loaded[name].data
            trainer.step_count = int(header["meta"].get("step", 0))
            trainer.optimizer.count = trainer.step_count
            print(
                "warning: resuming from float32 checkpoint (no .resume.npz sidecar); "
                "the continued loss stream is quantized",
                file=sys.stderr,
            )

    log_interval = cfg.raw["train"]["log_interval"]
    ckpt_interval = cfg.raw["train"]["ckpt_interval"]
    loss_path = os.path.join(args.out, "loss.csv")
    mode = "a" if trainer.step_count > 0 and os.path.exists(loss_path) else "w"
    start = time.perf_counter()
    window_t, window_loss = [], []
    with open(loss_path, mode) as log:
        if mode == "w":
            log.write(f"# config_hash={cfg.content_hash}\n")
            log.write("step,loss,loss_t_q1,loss_t_q2,loss_t_q3,loss_t_q4,wall_time\n")
        while trainer.step_count < train_cfg.steps:
            loss = trainer.step()
            window_t.append(trainer.last_t)
            window_loss.append(trainer.last_per_sample)
            step = trainer.step_count
            if step % log_interval == 0 or step == train_cfg.steps:
                buckets = _bucket_means(np.concatenate(window_t), np.concatenate(window_loss))
                mean_loss = float(np.concatenate(window_loss).mean())
                wall = time.perf_counter() - start
                log.write(
                    f"{step},{mean_loss:.10g},"
                    + ",".join(f"{b:.10g}" for b in buckets)
                    + f",{wall:.3f}\n"
                )
                log.flush()
                window_t, window_loss = [], []
            if step % ckpt_interval == 0 and step < train_cfg.steps:
                _save_train_state(trainer, params, args.out, step, cfg)
    final = _save_train_state(trainer, params, args.out, train_cfg.steps, cfg)
    model_path = os.path.join(args.out, "model.fndf")
    with open(final, "rb") as src, open(model_path, "wb") as dst:
        dst.write(src.read())
    print(f"trained {train_cfg.steps} steps; final checkpoint {model_path}")
    return EXIT_OK


def _parse_condition(args, cfg):
    if args.condition is not None:
        text = args.condition
        if text.startswith("@"):
            with open(text[1:]) as fh:
                text = fh.read()
        doc = json.loads(text)
        points = np.asarray(doc["points"], dtype=np.float64)
        if "values" in doc:
            values = np.asarray(doc["values"], dtype=np.float64)
        else:
            values = np.zeros((len(points), cfg.range_dim))
        return points, values
    if args.condition_index is not None:
        sample = cfg.make_dataset(count=args.condition_index + 1)[args.condition_index]
        return sample.condition_points, sample.condition_values
    return None


def cmd_sample(args) -> int:
    cfg = load_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    params, header = dn.load_checkpoint(
        args.ckpt, expected_hash=None, expected_config=cfg.model_config()
    )
    condition = _parse_condition(args, cfg)
    seed = args.seed if args.seed is not None else cfg.raw["sample"]["seed"]
    steps = args.steps if args.steps is not None else cfg.raw["sample"]["num_steps"]
    grid_res = args.grid if args.grid is not None else cfg.raw["sample"]["grid"]
    domain = cfg.domain()

    states = []
    result = diffusion.sample(
        params,
        condition,
        domain,
        steps,
        seed,
        context_size=cfg.sample_context_size(),
        noise_resolution=cfg.noise_resolution(),
        range_dim=cfg.range_dim,
        schedule=cfg.schedule(),
        step_callback=states.append,
    )
    hash_note = f"config_hash={cfg.content_hash}"

    with open(os.path.join(args.out, "trace.csv"), "w") as fh:
        fh.write(f"# {hash_note}\n")
        fh.write("step,t,context_rmse_change\n")
        for row in result.trace:
            fh.write(f"{row['step']},{row['t']:.10g},{row['context_rmse_change']:.10g}\n")

    lattice = domain.lattice([grid_res] * domain.dim)
    grid_values = result.generated(lattice)[:, 0].reshape([grid_res] * domain.dim)
    if domain.dim == 2:
        geometry.save_pgm(grid_values, os.path.join(args.out, "field.pgm"))
    else:
        geometry.save_raw_volume(grid_values, os.path.join(args.out, "field.raw"))

    if cfg.range_dim == 1:
        contour = (
            geometry.marching_squares(grid_values, domain)
            if domain.dim == 2
            else geometry.marching_cubes(grid_values, domain)
        )
        obj_path = os.path.join(args.out, "final.obj")
        geometry.save_obj(contour, obj_path)
        with open(obj_path) as fh:
            body = fh.read()
        with open(obj_path, "w") as fh:
            fh.write(f"# {hash_note}\n" + body)

    if args.trace:
        picks = np.unique(
            np.linspace(0, len(states) - 1, min(args.trace, len(states))).astype(int)
        ) if states else []
        frame = 0
        net = diffusion.NetDenoiser(params)
        for i in picks:
            state = states[i]
            est = diffusion.GeneratedFunction(net, state, condition)(lattice)
            est = est[:, 0].reshape([grid_res] * domain.dim)
            name = os.path.join(args.out, f"trace_{frame:03d}")
            if domain.dim == 2:
                geometry.save_pgm(est, name + ".pgm")
            else:
                geometry.save_raw_volume(est, name + ".raw")
            frame += 1

    if args.queries:
        pts = np.loadtxt(args.queries, delimiter=",", ndmin=2)
        values = result.generated(pts)
        out_path = os.path.join(args.out, "queries_values.csv")
        with open(out_path, "w") as fh:
            fh.write(f"# {hash_note}\n")
            cols = ",".join(f"x{d}" for d in range(domain.dim))
            vals = ",".join(f"v{c}" for c in range(cfg.range_dim))
            fh.write(f"{cols},{vals}\n")
            for p, v in zip(pts, values):
                fh.write(
                    ",".join(f"{x:.17g}" for x in p) + "," + ",".join(f"{y:.17g}" for y in v) + "\n"
                )

    with open(os.path.join(args.out, "meta.json"), "w") as fh:
        json.dump(
            {
                "config_hash": cfg.content_hash,
                "model_hash": cfg.model_hash,
                "checkpoint_hash": header["config_hash"],
                "seed": seed,
                "steps": steps,
                "grid": grid_res,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
    print(f"sampled function with {steps} steps into {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    params, header = dn.load_checkpoint(args.ckpt, expected_config=cfg.model_config())
    stored_model_hash = header.get("meta", {}).get("model_hash")
    if stored_model_hash is not None and stored_model_hash != cfg.model_hash:
        raise CheckpointMismatch(
            f"{args.ckpt}: checkpoint belongs to model identity {stored_model_hash[:12]}..., "
            f"this config's is {cfg.model_hash[:12]}..."
        )
    eval_cfg = cfg.eval_config()
    if args.seed is not None:
        from dataclasses import replace

        eval_cfg = replace(eval_cfg, seed=args.seed)
    held_out = cfg.make_dataset(count=cfg.raw["eval"]["count"], seed=eval_cfg.seed)
    baseline = None
    if cfg.range_dim == 1:
        baseline = metrics.MeanField(cfg.make_dataset())
    report = metrics.evaluate_model(
        params, held_out, eval_cfg, schedule=cfg.schedule(), baseline=baseline,
        config_hash=cfg.content_hash,
    )
    with open(os.path.join(args.out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    with open(os.path.join(args.out, "report.csv"), "w") as fh:
        fh.write(metrics.report_to_csv(report))
    agg = report["aggregate"]["model"]
    print("model aggregate: " + ", ".join(f"{k}={v:.5g}" for k, v in sorted(agg.items())))
    return EXIT_OK


def cmd_inspect_schedule(args) -> int:
    from .schedule import NoiseSchedule, timestep_grid

    sched = NoiseSchedule()
    grid = timestep_grid(args.steps)
    print(f"{'k':>4} {'t':>10} {'alpha':>10} {'sigma':>10} {'snr':>12} {'a^2+s^2':>10}")
    for k, t in zip(range(args.steps, -1, -1), grid.values):
        alpha, sigma = sched.alpha_sigma(float(t))
        snr = "inf" if t <= sched.eps_sigma else f"{sched.snr(float(t)):.6g}"
        print(f"{k:>4} {t:>10.6f} {alpha:>10.6f} {sigma:>10.6f} {snr:>12} {alpha**2 + sigma**2:>10.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fndiff", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the command's seed")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=None, help="cap BLAS worker threads")

    p_train = sub.add_parser("train", help="train a model; writes checkpoints and loss.csv")
    common(p_train)
    p_train.add_argument("--resume", default=None, help="checkpoint (.fndf or .resume.npz) to continue from")
    p_train.set_defaults(fn=cmd_train)

    p_sample = sub.add_parser("sample", help="generate a function from a checkpoint")
    common(p_sample)
    p_sample.add_argument("--ckpt", required=True)
    p_sample.add_argument("--steps", type=int, default=None, help="sampling steps (default from config)")
    p_sample.add_argument("--grid", type=int, default=None, help="render grid resolution per axis")
    p_sample.add_argument("--trace", type=int, default=0, help="emit K intermediate-state renders")
    p_sample.add_argument("--queries", default=None, help="CSV of points to evaluate")
    p_sample.add_argument("--condition", default=None, help="inline JSON or @file with points/values")
    p_sample.add_argument("--condition-index", type=int, default=None,
                          help="use the condition of the given dataset sample")
    p_sample.set_defaults(fn=cmd_sample)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on held-out conditions")
    common(p_eval)
    p_eval.add_argument("--ckpt", required=True)
    p_eval.set_defaults(fn=cmd_eval)

    p_sched = sub.add_parser("inspect-schedule", help="print the schedule table")
    p_sched.add_argument("--steps", type=int, default=10)
    p_sched.add_argument("--threads", type=int, default=None)
    p_sched.set_defaults(fn=cmd_inspect_schedule)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        limiter = None
        if args.threads is not None:
            try:
                from threadpoolctl import threadpool_limits

                limiter = threadpool_limits(limits=args.threads)
            except ImportError:
                print("warning: threadpoolctl not installed; --threads ignored", file=sys.stderr)
        try:
            return args.fn(args)
        finally:
            if limiter is not None:
                limiter.unregister()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteLossError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CheckpointMismatch as exc:
        print(f"artifact mismatch: {exc}", file=sys.stderr)
        return EXIT_ARTIFACT
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
