"""Experiment runners behind the command line.

* ``gen``: persist seeded sensing ensembles for reuse.
* ``commuting``: closed-form flow under commuting measurements and spectral init.
* ``compare``: SNN vs linear regression vs depth-3 factorisation on Gaussian ensembles.
* ``image``: recover a greyscale glyph from Gaussian measurements, with PGM snapshots.

Every runner writes into ``out_dir`` and returns a ``RunResult`` listing the
records it emitted and the files it wrote.
"""

import dataclasses
import os

import numpy as np

from . import diagnostics as diag
from . import linalg
from .activations import get_activation
from .config import sweep_plan
from .descent import Depth3Model, LinearModel, TrainConfig, model_matrix, train
from .errors import Divergence, InsufficientData, StepBlowUp
from .flow import FlowContext, FlowRecorder, Scheme, integrate, lift
from .measurements import (
    GroundTruth,
    PhiPsiSource,
    gen_commuting_ensemble,
    gen_gaussian_ensemble,
    gen_ground_truth,
    measure,
)
from .model import near_zero_init, spectral_init
from .pgm import load_pgm, resolve_image, save_pgm
from .records import load_ensemble, save_ensemble, write_jsonl, write_trajectory_csv


@dataclasses.dataclass
class RunResult:
    records: list = dataclasses.field(default_factory=list)
    files: list = dataclasses.field(default_factory=list)

    def add_file(self, out_dir, path):
        self.files.append(os.path.relpath(path, out_dir))


def activation_of(cfg):
    return get_activation(cfg.activation, cfg.activation_clamped)


def make_ensemble(cfg, seed, kind=None, target=None):
    """Seeded ensemble with labels; loads a saved one when ``cfg.ensemble`` is set."""
    if cfg.ensemble:
        return load_ensemble(cfg.ensemble.format(seed=seed))
    dims = cfg.dims
    if target is None:
        target = gen_ground_truth(dims.d1, dims.d2, dims.inner_dim, seed)
    d1, d2 = target.x_star.shape
    kind = kind or ("commuting" if cfg.experiment == "commuting" else cfg.kind)
    if kind == "commuting":
        ens = gen_commuting_ensemble(d1, d2, cfg.m, seed, target, PhiPsiSource(cfg.phi_psi_source))
    else:
        ens = gen_gaussian_ensemble(d1, d2, cfg.m, seed, target)
    return measure(ens, ens.target.x_star, cfg.noise_std, seed)


def run_gen(cfg, out_dir):
    res = RunResult()
    for seed in cfg.seeds:
        ens = make_ensemble(cfg, seed, cfg.kind)
        path = os.path.join(out_dir, f"ensemble_seed{seed}.npz")
        save_ensemble(ens, path)
        res.add_file(out_dir, path)
        res.records.append({"kind": "ensemble", "seed": seed, "m": ens.m, "shape": list(ens.shape), "file": os.path.basename(path)})
    return res


def flow_report(traj, final_state, start, ens, act):
    """Rate fits, overshoot statistics and optimality certificates for one commuting run."""
    times = traj.times
    resid = traj.residual_matrix()
    report = {
        "min_residual": float(resid.min()),
        "max_abs_residual_final": float(np.max(np.abs(resid[-1]))),
        "monotone_coordinates": int(np.sum(np.all(np.diff(np.abs(resid), axis=0) <= 0, axis=0))),
        "coordinate_fits": [],
    }
    for i in range(resid.shape[1]):
        try:
            report["coordinate_fits"].append(diag.fit_exponential(times, np.abs(resid[:, i])).as_dict())
        except InsufficientData as exc:
            report["coordinate_fits"].append({"error": str(exc)})
    norms = np.linalg.norm(resid, axis=1)
    try:
        fit = diag.fit_exponential(times, norms)
        report["norm_fit"] = fit.as_dict()
        report["max_log_decrease_ratio"] = diag.max_log_decrease_ratio(times, norms, fit)
    except InsufficientData as exc:
        report["norm_fit"] = {"error": str(exc)}
    _, x = lift(final_state, ens.phi, ens.psi, start.g, act)
    report["kkt"] = diag.kkt_check(x, ens).as_dict()
    report["optimality_gap"] = diag.nuclear_optimality_crosscheck(x, ens)
    report["q_drift_max"] = float(np.nanmax(traj.column("q_drift")))
    return report


def run_commuting(cfg, out_dir):
    res = RunResult()
    act = activation_of(cfg)
    for seed in cfg.seeds:
        ens = make_ensemble(cfg, seed)
        start = spectral_init(ens.phi, ens.psi, ens.sigma_star, cfg.K, cfg.dims.d, seed, act)
        ctx = FlowContext.from_ensemble(ens, act)
        for cell in sweep_plan(dataclasses.replace(cfg, seeds=(seed,))):
            rec = {"kind": "commuting", "seed": seed, "lr": cell.lr, "shift": ens.target.shift}
            try:
                state, traj = integrate(
                    start.state, ctx, cell.lr, cell.n_steps, Scheme(cfg.scheme), FlowRecorder(cfg.record_stride)
                )
            except StepBlowUp as exc:
                rec.update(status="blowup", error=str(exc), step=exc.step)
                res.records.append(rec)
                continue
            path = os.path.join(out_dir, f"trajectory_lr{cell.lr:g}_seed{seed}.csv")
            write_trajectory_csv(traj, path)
            res.add_file(out_dir, path)
            rec.update(
                status="ok",
                dt_used=traj.meta["dt"],
                final_loss=traj.last.loss,
                final_nuclear_norm=traj.last.nuclear_norm,
                **flow_report(traj, state, start, ens, act),
            )
            res.records.append(rec)
    return res


def initial_model(name, cfg, shape, seed, act):
    d1, d2 = shape
    if name == "snn":
        return near_zero_init(d1, d2, max(cfg.dims.d, d2), cfg.K, cfg.init_scale, cfg.init_jitter, seed, act)
    if name == "linear":
        return LinearModel(np.zeros(shape))
    return Depth3Model.scaled_identity(d1, d2, cfg.init_scale)


def train_cell(cell, cfg, ens, x_ref, act, snapshots=()):
    """Train one (model, lr, seed) cell; divergence is reported, not raised."""
    model = initial_model(cell.model, cfg, ens.shape, cell.seed, act)
    tc = TrainConfig(
        cell.lr,
        cell.n_steps,
        record_stride=cfg.record_stride,
        gradient_mode=cfg.gradient_mode,
        snapshot_steps=tuple(s for s in snapshots if s <= cell.n_steps),
    )
    try:
        final, traj = train(model, ens, tc, x_ref=x_ref)
    except Divergence as exc:
        return None, None, {"status": "diverged", "error": str(exc), "step": exc.step}
    x = model_matrix(final)
    last = traj.last
    summary = {
        "status": "ok",
        "final_loss": last.loss,
        "nuclear_norm": last.nuclear_norm,
        "sigma_top3": list(last.sigma_top3),
        "psnr": last.psnr,
        "eff_rank": last.eff_rank,
    }
    return x, traj, summary


def select_stable(records, model):
    """Per seed, the record with the largest learning rate that trained without diverging."""
    best = {}
    for r in records:
        if r.get("model") != model or r.get("status") != "ok":
            continue
        if r["seed"] not in best or r["lr"] > best[r["seed"]]["lr"]:
            best[r["seed"]] = r
    return [best[s] for s in sorted(best)]


def compare_medians(records, models):
    out = {}
    for name in models:
        chosen = select_stable(records, name)
        if not chosen:
            out[name] = {"n": 0}
            continue
        out[name] = {
            "n": len(chosen),
            "lr": sorted({r["lr"] for r in chosen}),
            "nuclear_norm": float(np.median([r["nuclear_norm"] for r in chosen])),
            "psnr": float(np.median([r["psnr"] for r in chosen])),
            "final_loss": float(np.median([r["final_loss"] for r in chosen])),
            "eff_rank": float(np.median([r["eff_rank"] for r in chosen])),
        }
    return out


def run_compare(cfg, out_dir):
    res = RunResult()
    act = activation_of(cfg)
    for seed in cfg.seeds:
        ens = make_ensemble(cfg, seed, "gaussian")
        x_ref = ens.target.x_star
        for cell in sweep_plan(dataclasses.replace(cfg, seeds=(seed,))):
            _, traj, summary = train_cell(cell, cfg, ens, x_ref, act)
            rec = {"kind": "compare", "model": cell.model, "seed": seed, "lr": cell.lr, "n_steps": cell.n_steps}
            rec.update(summary)
            if traj is not None:
                path = os.path.join(out_dir, f"trajectory_{cell.tag}.csv")
                write_trajectory_csv(traj, path)
                res.add_file(out_dir, path)
            res.records.append(rec)
    res.records.append({"kind": "medians", **compare_medians(res.records, cfg.models)})
    return res


def image_target(path):
    """Greyscale image in [0, 1], rescaled to unit nuclear norm."""
    img = load_pgm(path)
    norm = linalg.nuclear_norm(img)
    if norm == 0:
        raise ValueError(f"{path}: image is blank")
    return GroundTruth(img / norm, norm)


def run_image(cfg, out_dir):
    res = RunResult()
    act = activation_of(cfg)
    src = resolve_image(cfg.image)
    target = image_target(src)
    truth_path = os.path.join(out_dir, "ground_truth.pgm")
    save_pgm(target.x_star * target.normalization, truth_path)
    res.add_file(out_dir, truth_path)
    for seed in cfg.seeds:
        ens = make_ensemble(cfg, seed, "gaussian", target)
        scale = ens.target.normalization
        image = ens.target.x_star * scale
        for cell in sweep_plan(dataclasses.replace(cfg, seeds=(seed,))):
            _, traj, summary = train_cell(cell, cfg, ens, ens.target.x_star, act, cfg.snapshot_steps)
            rec = {"kind": "image", "model": cell.model, "seed": seed, "lr": cell.lr, "image": cfg.image}
            rec.update(summary)
            if traj is not None:
                path = os.path.join(out_dir, f"trajectory_{cell.tag}.csv")
                write_trajectory_csv(traj, path)
                res.add_file(out_dir, path)
                snaps = []
                for step, x in sorted(traj.meta["snapshots"].items()):
                    pgm_path = os.path.join(out_dir, f"{cell.tag}_step{step}.pgm")
                    save_pgm(x * scale, pgm_path)
                    res.add_file(out_dir, pgm_path)
                    snaps.append({"step": step, "file": os.path.basename(pgm_path), "psnr": diag.psnr(x * scale, image)})
                rec["snapshots"] = snaps
            res.records.append(rec)
    return res


RUNNERS = {"gen": run_gen, "commuting": run_commuting, "compare": run_compare, "image": run_image}


def run(cfg, out_dir=None):
    """Run the experiment in ``cfg``; writes ``report.jsonl`` next to the other artifacts."""
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    res = RUNNERS[cfg.experiment](cfg, out_dir)
    report = os.path.join(out_dir, "report.jsonl")
    write_jsonl(res.records, report)
    res.add_file(out_dir, report)
    return res
