"""Run one engine from a config into an immutable artifact directory."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .design import optimize_design
from .explicit import (extract_mapping, optimize_surrogate, star_base_set,
                       validate_surrogate)
from .implicit import run_ism_rrsm
from .models import CoarseModel, EvalCounter, FineEmulator
from .response import ChannelSelector, Response, make_grid
from .specs import DesignSpec, objective, violation
from .touchstone import touchstone_dir_model

log = logging.getLogger(__name__)

PUBLISHED_FINE_EVALS = 3
SUCCESS = ("spec-satisfied", "validation-passed")


class ArtifactError(RuntimeError):
    pass


@dataclass
class RunArtifact:
    directory: str
    outcome: str
    fine_evals: int
    coarse_evals: int
    result: dict = field(repr=False, default_factory=dict)

    @property
    def success(self) -> bool:
        return self.outcome in SUCCESS

    def summary_line(self) -> str:
        return (f"engine={self.result.get('engine')} outcome={self.outcome} "
                f"fine_evals={self.fine_evals} coarse_evals={self.coarse_evals} "
                f"objective={self.result.get('final_objective')}")


class _RecordingFine:
    """Counts fine evaluations and keeps every response for the artifact."""

    def __init__(self, fn, grid, counter):
        self.fn = fn
        self.grid = grid
        self.counter = counter
        self.calls: list[tuple[np.ndarray, Response]] = []

    def __call__(self, x):
        x = np.asarray(x, dtype=float).copy()
        r = self.fn(x)
        self.counter.add("fine")
        self.calls.append((x, r))
        return r


def _fine_function(cfg: RunConfig, coarse: CoarseModel):
    if cfg.fine_kind == "emulator":
        emu = FineEmulator(cfg.geometry, cfg.grid, cfg.truth, EvalCounter())
        return emu
    if cfg.fine_kind == "touchstone":
        lookup, _ = touchstone_dir_model(cfg.touchstone_dir)

        def ts(x):
            r = lookup(x)
            if r.grid != cfg.grid:
                raise ValueError(f"Touchstone grid differs from the configured grid for {x}")
            return r
        return ts
    a = cfg.affine
    shift = np.asarray(a.shift, dtype=float)
    p0 = cfg.aux_nominal

    def affine(x):
        r = coarse(np.asarray(x) + shift, p0)
        db = r.db(a.channel)
        new = a.scale * db + a.offset
        return r.replace(**{a.channel: r.channel(a.channel) * 10.0 ** ((new - db) / 20.0)})
    return affine


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _margins(r: Response, spec: DesignSpec) -> list[dict]:
    v = violation(r, spec)
    return [{"band": b.label(), "worst_margin_db": w} for b, w in zip(spec.bands, v.band_worst)]


def _engine_eval(cfg, coarse, fine, files):
    x = cfg.start
    rc = coarse(x, cfg.aux_nominal)
    rf = fine(x)
    files["coarse_start.csv"] = rc.to_csv()
    obj_f = objective(rf, cfg.spec)
    rows = [{"design": x.tolist(), "objective": obj_f, "fine_evals": 1}]
    result = {
        "coarse_objective": objective(rc, cfg.spec),
        "fine_objective": obj_f,
        "final_objective": obj_f,
        "final_margins": _margins(rf, cfg.spec),
        "rows": rows,
    }
    return result, ("spec-satisfied" if obj_f <= 0 else "spec-violated")


def _engine_coarse_opt(cfg, coarse, fine, files):
    start_obj = objective(coarse(cfg.start, cfg.aux_nominal), cfg.spec)
    rep = optimize_design(coarse.with_aux(cfg.aux_nominal), cfg.spec, cfg.start,
                          cfg.design_bounds, cfg.optimizer)
    rc = coarse(rep.minimizer, cfg.aux_nominal)
    files["coarse_opt.csv"] = rc.to_csv()
    result = {
        "start": cfg.start.tolist(),
        "start_objective": start_obj,
        "coarse_optimum": rep.minimizer.tolist(),
        "optimizer": rep.to_dict(),
        "final_objective": rep.objective_value,
        "final_margins": _margins(rc, cfg.spec),
        "rows": [{"design": cfg.start.tolist(), "objective": start_obj, "fine_evals": 0},
                 {"design": rep.minimizer.tolist(), "objective": rep.objective_value,
                  "fine_evals": 0}],
    }
    return result, ("spec-satisfied" if rep.objective_value <= 0 else "spec-violated")


def _engine_explicit(cfg, coarse, fine, files, include_corners, seed):
    ex = cfg.explicit
    channel = ChannelSelector(tuple(ex.channel.channels), ex.channel.representation)
    base = star_base_set(cfg.region, include_corners or ex.include_corners)
    base_fine = [fine(x) for x in base.points]
    test_pts = cfg.region.random_points(ex.test_points, seed)
    test_fine = [fine(x) for x in test_pts]
    mapping, report = extract_mapping(base, base_fine, coarse, cfg.aux_nominal, channel,
                                      cfg.extraction)
    validate_surrogate(mapping, test_pts, test_fine, coarse, cfg.aux_nominal, channel, report)
    dense = None
    if ex.dense_step is not None:
        dense = make_grid(cfg.grid.f_min, cfg.grid.f_max, ex.dense_step)
    opt = optimize_surrogate(mapping, cfg.spec, cfg.region, cfg.optimizer, coarse,
                             cfg.aux_nominal, dense=dense)
    confirm = fine(opt.minimizer)
    fine_obj = objective(confirm, cfg.spec)

    files["mapping.json"] = _dump(mapping.to_dict())
    files["surrogate_report.json"] = _dump(report.to_dict())
    files["base_errors.csv"] = report.error_table("base")
    files["test_errors.csv"] = report.error_table("test")
    max_c = float(np.max(report.test_coarse))
    max_s = float(np.max(report.test_surrogate))
    passed = max_s < max_c
    result = {
        "base_points": base.points.tolist(),
        "base_kinds": list(base.kinds),
        "test_points": test_pts.tolist(),
        "errors": report.summary(),
        "test_error_ratio": max_s / max_c if max_c > 0 else None,
        "surrogate_optimum": opt.minimizer.tolist(),
        "surrogate_objective": opt.objective_value,
        "optimizer": opt.to_dict(),
        "fine_objective_at_optimum": fine_obj,
        "final_objective": fine_obj,
        "final_margins": _margins(confirm, cfg.spec),
        "rows": [{"design": opt.minimizer.tolist(), "objective": fine_obj,
                  "fine_evals": len(base.points) + len(test_pts) + 1}],
    }
    return result, ("validation-passed" if passed else "validation-failed")


def _engine_ism_rrsm(cfg, coarse, fine, files):
    p0 = cfg.aux_nominal
    copt = optimize_design(coarse.with_aux(p0), cfg.spec, cfg.start, cfg.design_bounds,
                           cfg.optimizer)
    x_start = copt.minimizer
    rep = run_ism_rrsm(coarse, fine, cfg.spec, x_start, p0, cfg.rrsm, cfg.optimizer,
                       cfg.design_bounds)
    files["coarse_initial.csv"] = coarse(x_start, p0).to_csv()
    files["coarse_final.csv"] = coarse(rep.final.x, p0).to_csv()
    rows = [{"design": r.x.tolist(), "objective": r.fine_objective, "fine_evals": r.k + 1,
             "mode": r.mode} for r in rep.records]
    result = {
        "coarse_optimum": x_start.tolist(),
        "coarse_objective": copt.objective_value,
        "run": rep.to_dict(),
        "published_fine_evals": PUBLISHED_FINE_EVALS,
        "final_objective": rep.final.fine_objective,
        "final_margins": _margins(rep.fine_responses[-1], cfg.spec),
        "rows": rows,
    }
    return result, rep.outcome


def _finish(cfg, engine, seed, outcome, result, counts, calls, log_lines) -> dict:
    files = {}
    fine_files = []
    for i, (x, r) in enumerate(calls):
        name = f"fine_{i:03d}.csv"
        files[name] = r.to_csv()
        fine_files.append({"file": name, "design": x.tolist()})
    result.update(engine=engine, outcome=outcome, seed=seed, fine_source=cfg.fine_kind,
                  fine_evals=counts["fine_evals"], coarse_evals=counts["coarse_evals"],
                  fine_files=fine_files, spec=cfg.spec.to_list())
    files["result.json"] = _dump(result)
    files["config.json"] = cfg.source_bytes.decode() if cfg.source_bytes else "{}\n"
    log_lines += [f"outcome={outcome}", f"fine_evals={counts['fine_evals']}",
                  f"coarse_evals={counts['coarse_evals']}"]
    files["run.log"] = "\n".join(log_lines) + "\n"
    return files


def run(cfg: RunConfig, out_dir, engine: str | None = None, include_corners: bool = False,
        seed: int | None = None) -> RunArtifact:
    """Run ``engine`` (default: the config's) and write the artifact directory.

    ``out_dir`` must not exist or be empty. Files are written only after the
    engine finishes; an engine exception still leaves the log behind.
    """
    engine = engine or cfg.engine
    if engine is None:
        raise ValueError("no engine selected")
    seed = cfg.seed if seed is None else seed
    if os.path.exists(out_dir) and os.listdir(out_dir):
        raise FileExistsError(f"output directory {out_dir} is not empty")
    os.makedirs(out_dir, exist_ok=True)

    counter = EvalCounter()
    coarse = CoarseModel(cfg.geometry, cfg.grid, counter)
    fine = _RecordingFine(_fine_function(cfg, coarse), cfg.grid, counter)
    files: dict[str, str] = {}
    log_lines = [f"engine={engine}", f"config={os.path.basename(cfg.source_path) or '<memory>'}",
                 f"fine_source={cfg.fine_kind}", f"seed={seed}"]
    try:
        if engine == "eval":
            result, outcome = _engine_eval(cfg, coarse, fine, files)
        elif engine == "coarse-opt":
            result, outcome = _engine_coarse_opt(cfg, coarse, fine, files)
        elif engine == "explicit-sm":
            result, outcome = _engine_explicit(cfg, coarse, fine, files, include_corners, seed)
        elif engine == "ism-rrsm":
            result, outcome = _engine_ism_rrsm(cfg, coarse, fine, files)
        else:
            raise ValueError(f"unknown engine {engine!r}")
        counts = counter.snapshot()
        files.update(_finish(cfg, engine, seed, outcome, result, counts, fine.calls, log_lines))
        files["manifest.json"] = _dump(sorted(list(files) + ["manifest.json"]))
    except Exception as exc:
        counts = counter.snapshot()
        log_lines.append(f"error={type(exc).__name__}: {exc}")
        log_lines.append(f"fine_evals={counts['fine_evals']} coarse_evals={counts['coarse_evals']}")
        with open(os.path.join(out_dir, "run.log"), "w") as fh:
            fh.write("\n".join(log_lines) + "\n")
        raise

    for name, text in sorted(files.items()):
        path = os.path.join(out_dir, name)
        if name == "config.json" and cfg.source_bytes:
            with open(path, "wb") as fh:
                fh.write(cfg.source_bytes)
            continue
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return RunArtifact(str(out_dir), outcome, counts["fine_evals"], counts["coarse_evals"], result)


def emit_report(directory) -> str:
    """Human-readable summary of an artifact directory (read-only)."""
    manifest_path = os.path.join(directory, "manifest.json")
    if not os.path.isfile(manifest_path):
        raise ArtifactError(f"{directory}: missing manifest.json")
    with open(manifest_path) as fh:
        expected = json.load(fh)
    missing = [n for n in expected if not os.path.isfile(os.path.join(directory, n))]
    if missing:
        raise ArtifactError(f"{directory}: missing artifact files: {', '.join(missing)}")
    with open(os.path.join(directory, "result.json")) as fh:
        res = json.load(fh)

    lines = [f"engine: {res['engine']}    outcome: {res['outcome']}    "
             f"fine evals: {res['fine_evals']}    coarse evals: {res['coarse_evals']}"]
    if res.get("published_fine_evals") is not None:
        lines.append(f"published fine-eval count for this case: {res['published_fine_evals']}")
    lines.append("")
    lines.append(f"{'#':>3}  {'design (mm)':<62} {'objective dB':>12} {'fine evals':>10}")
    for i, row in enumerate(res["rows"]):
        design = " ".join(f"{v:9.5f}" for v in row["design"])
        mode = f"  {row['mode']}" if "mode" in row else ""
        lines.append(f"{i:>3}  {design:<62} {row['objective']:>12.4f} {row['fine_evals']:>10}{mode}")
    lines.append("")
    lines.append("spec margins at the final design (positive = violated):")
    for m in res["final_margins"]:
        lines.append(f"  {m['band']:<40} {m['worst_margin_db']:9.4f} dB")
    lines.append(f"final margin: {res['final_objective']:.4f} dB")
    return "\n".join(lines) + "\n"

