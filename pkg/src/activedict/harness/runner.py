"""Seeded multi-replicate experiments and one-axis parameter sweeps."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .. import __version__
from ..checkpoint import dumps_dictionary, render_dictionary, save_dictionary
from ..encoders import EncoderSpec
from ..learner import LearnerState, Schedule, init_dictionary, run_epoch
from ..metrics import dict_distance
from ..selection import get_policy
from ..synthgen import make_gabor_dictionary, make_glyph_dictionary, sample_codes, sigma_for_snr, synthesize
from .config import ExperimentConfig, SweepSpec

log = logging.getLogger(__name__)

CURVES_HEADER = ["replicate", "epoch", "policy", "encoder", "D_star", "true_snr_db",
                 "hist_dist", "eta", "wall_time_s"]

# fixed labels for independent child streams of the root seed
STREAMS = {"dictionary": 0, "init": 1, "codes": 2, "noise": 3, "select": 4}


class RunFailure(RuntimeError):
    """A run stopped early; the manifest in ``out`` marks it partial."""


def stream(seed: int, label: str, replicate: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAMS[label], replicate)))


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def build_dictionary(cfg: ExperimentConfig, rng) -> np.ndarray:
    if cfg.dictionary == "glyph":
        return make_glyph_dictionary(cfg.K, rng)
    return make_gabor_dictionary(cfg.patch_side, cfg.K, rng)


def encoder_spec(cfg: ExperimentConfig, noise_var: float) -> EncoderSpec:
    return EncoderSpec(cfg.encoder, penalty=cfg.l1_penalty, k=cfg.sparsity,
                       noise_var=noise_var, tol=cfg.tol)


def _sha(A: np.ndarray) -> str:
    return hashlib.sha256(dumps_dictionary(A)).hexdigest()


def run_replicate(cfg: ExperimentConfig, replicate: int, out: Path) -> dict:
    """Run every epoch of one replicate; writes checkpoints under ``out``."""
    rep_dir = out / f"rep_{replicate:03d}"
    rep_dir.mkdir(parents=True, exist_ok=True)

    A_star = build_dictionary(cfg, stream(cfg.seed, "dictionary", replicate))
    sigma = sigma_for_snr(cfg.lam, cfg.k, cfg.P, cfg.snr_db)
    codes_rng = stream(cfg.seed, "codes", replicate)
    noise_rng = stream(cfg.seed, "noise", replicate)
    select_rng = stream(cfg.seed, "select", replicate)

    def fresh_batch():
        S = sample_codes(cfg.K, cfg.k, cfg.lam, cfg.N, codes_rng)
        return synthesize(A_star, S, sigma, noise_rng, lam=cfg.lam, k=cfg.k)

    batch = fresh_batch()
    A_init = init_dictionary(batch, cfg.K, stream(cfg.seed, "init", replicate))
    state = LearnerState(A_init, schedule=Schedule(cfg.eta0, cfg.decay, cfg.floor),
                         gamma=cfg.gamma, inner_iters=cfg.inner_iters)
    spec = encoder_spec(cfg, sigma ** 2)
    policy = get_policy(cfg.policy)

    save_dictionary(rep_dir / "A_star.dsl", A_star)
    save_dictionary(rep_dir / "A_init.dsl", A_init)
    render_dictionary(A_star, rep_dir / "A_star.pgm")

    records = []
    for t in range(1, cfg.epochs + 1):
        if t > 1 and cfg.fresh_data:
            batch = fresh_batch()
        state, rec = run_epoch(state, batch, spec, policy, cfg.n_selected,
                               rng=select_rng, hist_bins=cfg.hist_bins)
        records.append(rec)
        if cfg.checkpoint_interval and t % cfg.checkpoint_interval == 0:
            ckpt_dir = rep_dir / "checkpoints"
            ckpt_dir.mkdir(exist_ok=True)
            save_dictionary(ckpt_dir / f"epoch_{t:05d}.dsl", state.A_hat)

    save_dictionary(rep_dir / "A_final.dsl", state.A_hat)
    render_dictionary(state.A_hat, rep_dir / "A_final.pgm")
    return {
        "replicate": replicate,
        "records": records,
        "initial_D_star": dict_distance(A_init, A_star),
        "final_D_star": records[-1].D_star,
        "A_star_sha256": _sha(A_star),
        "A_init_sha256": _sha(A_init),
        "sigma": sigma,
    }


def _replicate_job(args):
    cfg, replicate, out = args
    try:
        return run_replicate(cfg, replicate, Path(out))
    except Exception as exc:  # reported through the manifest
        log.exception("replicate %d failed", replicate)
        return {"replicate": replicate, "error": f"{type(exc).__name__}: {exc}"}


def write_curves(path: Path, cfg: ExperimentConfig, results: list[dict]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVES_HEADER)
        for res in results:
            for rec in res.get("records", []):
                wall = rec.wall_time_s if cfg.record_wall_time else 0.0
                writer.writerow([res["replicate"], rec.epoch, cfg.policy, cfg.encoder,
                                 fmt(rec.D_star), fmt(rec.true_snr_db), fmt(rec.hist_dist),
                                 fmt(rec.eta), fmt(wall)])


def write_timing(path: Path, results: list[dict]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["replicate", "epoch", "wall_time_s"])
        for res in results:
            for rec in res.get("records", []):
                writer.writerow([res["replicate"], rec.epoch, fmt(rec.wall_time_s)])


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> Path:
    """Run all replicates of ``cfg`` and write outputs to ``cfg.out``.

    Produces ``curves.csv`` (one row per replicate and epoch), ``timing.csv``,
    per-replicate checkpoints and PGM tiles, and ``manifest.json``.
    Raises RunFailure (after writing a partial manifest) if any replicate fails.
    """
    cfg = cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    manifest = {
        "status": "running",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": cfg.to_dict(),
        "started": started,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))

    tasks = [(cfg, r, str(out)) for r in range(cfg.replicates)]
    if jobs > 1 and cfg.replicates > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_replicate_job, tasks))
    else:
        results = [_replicate_job(t) for t in tasks]

    failed = [r for r in results if "error" in r]
    try:
        write_curves(out / "curves.csv", cfg, results)
        write_timing(out / "timing.csv", results)
    except OSError as exc:
        failed.append({"replicate": None, "error": f"writing curves: {exc}"})

    manifest.update({
        "status": "partial" if failed else "complete",
        "finished": time.time(),
        "replicates": [{k: v for k, v in r.items() if k != "records"} for r in results],
        "errors": [r["error"] for r in failed],
    })
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    if failed:
        raise RunFailure(f"{len(failed)} replicate(s) failed; see {out / 'manifest.json'}")
    return out


def read_curves(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def final_d_star(run_dir) -> dict[int, float]:
    """Final-epoch D* per replicate, read back from curves.csv."""
    last: dict[int, tuple[int, float]] = {}
    for row in read_curves(Path(run_dir) / "curves.csv"):
        r, e = int(row["replicate"]), int(row["epoch"])
        if r not in last or e > last[r][0]:
            last[r] = (e, float(row["D_star"]))
    return {r: v for r, (_, v) in sorted(last.items())}


def mean_stderr(values) -> tuple[float, float]:
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


SWEEP_HEADER = ["axis", "value", "policy", "replicates", "final_D_star_mean",
                "final_D_star_stderr", "status"]


def run_sweep(sweep: SweepSpec, out=None, jobs: int = 1) -> Path:
    """One experiment per (axis value, policy), summarized in ``sweep.csv``.

    A failing cell is recorded with its error and the sweep moves on.
    """
    sweep = sweep.validate()
    root = Path(out if out is not None else sweep.base.out)
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in sweep.values:
        for policy in sweep.policies:
            cell_dir = root / f"{sweep.axis}={value}" / policy
            cfg = sweep.cell_config(value, policy, cell_dir)
            try:
                run_experiment(cfg, jobs=jobs)
                finals = list(final_d_star(cell_dir).values())
                mean, se = mean_stderr(finals)
                rows.append([sweep.axis, value, policy, len(finals), fmt(mean), fmt(se), "ok"])
            except Exception as exc:
                log.warning("sweep cell %s=%s %s failed: %s", sweep.axis, value, policy, exc)
                rows.append([sweep.axis, value, policy, 0, "nan", "nan",
                             f"failed: {type(exc).__name__}: {exc}"])
    with open(root / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        writer.writerows(rows)
    return root
