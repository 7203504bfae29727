"""Experiment drivers and report emission.

A run is a grid of cells, one per (method, seed, environment condition).
Each cell persists its own artifacts (trajectories, bundles, sigma and
metric records) so every reported number can be recomputed from disk.
Reports are plain CSV series; plotting is a consumer concern.
"""

from __future__ import annotations

import csv
import json
import logging
import multiprocessing
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import config as config_mod
from .config import ExperimentConfig, threshold_code, with_env
from .env import AUTO2_THRESHOLDS, Env
from .learner import (
    EvalMetrics,
    evaluate_bundle,
    fit_iteration,
    get_variant,
    normalize_method,
    run_experiment,
)
from .policies import load_bundle, save_bundle
from .rng import derive_stream
from .trajio import read_trajectories

log = logging.getLogger(__name__)


class ReportError(RuntimeError):
    pass


@dataclass(frozen=True)
class CellSpec:
    """One experiment cell: a single method and seed under one condition."""

    suite: str
    method: str
    seed: int
    config: ExperimentConfig

    @property
    def condition(self) -> str:
        thr = threshold_code(self.config.env.auto2_threshold)
        return f"n{self.config.env.n_objects}_{thr}"

    @property
    def rel_path(self) -> str:
        return f"{self.suite}/{self.method}_{self.condition}_seed{self.seed}"


def _run_cell(payload: dict) -> dict:
    """Worker entry point; must stay top-level picklable."""
    os.environ.setdefault("OMP_NUM_THREADS", "1")
    spec_config = config_mod.from_dict(payload["config"])
    cell_dir = Path(payload["dir"])
    result = {
        "method": payload["method"],
        "seed": payload["seed"],
        "suite": payload["suite"],
        "path": payload["rel_path"],
        "n_objects": spec_config.env.n_objects,
        "threshold": str(threshold_code(spec_config.env.auto2_threshold)),
    }
    try:
        records = run_experiment(spec_config, payload["method"], payload["seed"], out_dir=cell_dir)
        result.update(
            status="complete",
            iterations_completed=len(records),
            final_success=records[-1].eval.success_rate,
        )
    except Exception as exc:  # cell failures are reported, not fatal to the grid
        log.exception("cell %s failed", payload["rel_path"])
        result.update(status="partial", iterations_completed=None, final_success=None, error=repr(exc))
    return result


def run_cells(cells: list[CellSpec], out_dir, workers: int = 1) -> Path:
    """Run a grid of cells, in parallel processes when workers > 1."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payloads = [
        {
            "config": config_mod.to_dict(c.config),
            "method": c.method,
            "seed": c.seed,
            "suite": c.suite,
            "rel_path": c.rel_path,
            "dir": str(out / c.rel_path),
        }
        for c in cells
    ]
    if workers > 1 and len(payloads) > 1:
        ctx = multiprocessing.get_context("spawn")
        with ctx.Pool(min(workers, len(payloads))) as pool:
            results = pool.map(_run_cell, payloads)
    else:
        results = [_run_cell(p) for p in payloads]
    manifest = {"cells": results}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return out


def cmd_run(config: ExperimentConfig, out_dir=None, workers: int = 1) -> Path:
    """Run every (method, seed) of the config under its single condition."""
    cells = [
        CellSpec("run", normalize_method(m), s, config)
        for m in config.methods
        for s in config.seeds
    ]
    return run_cells(cells, out_dir or config.output_dir, workers=workers)


P1_OBJECT_COUNTS = (1, 2, 3)
P2_THRESHOLD_CODES = ("L", "M", "S")


def p1_cells(config: ExperimentConfig, methods=None, object_counts=P1_OBJECT_COUNTS) -> list[CellSpec]:
    """Task-length sweep: every method on 1..3 objects at the default threshold."""
    methods = [normalize_method(m) for m in (methods or config.methods)]
    cells = []
    for n in object_counts:
        cfg = with_env(config, n_objects=n, t_max=None)
        cells.extend(CellSpec("p1", m, s, cfg) for m in methods for s in config.seeds)
    return cells


def p2_cells(config: ExperimentConfig, methods=None, threshold_codes=P2_THRESHOLD_CODES) -> list[CellSpec]:
    """Auto-policy design sweep: two objects under the L/M/S hand-off thresholds."""
    methods = [normalize_method(m) for m in (methods or config.methods)]
    cells = []
    for code in threshold_codes:
        cfg = with_env(config, n_objects=2, t_max=None, auto2_threshold=AUTO2_THRESHOLDS[code])
        cells.extend(CellSpec("p2", m, s, cfg) for m in methods for s in config.seeds)
    return cells


def cmd_sweep(config: ExperimentConfig, suite: str, out_dir=None, methods=None, workers: int = 1) -> Path:
    if suite == "p1":
        cells = p1_cells(config, methods=methods)
    elif suite == "p2":
        cells = p2_cells(config, methods=methods)
    else:
        raise ValueError(f"unknown suite {suite!r}; expected 'p1' or 'p2'")
    return run_cells(cells, out_dir or config.output_dir, workers=workers)


def train_from_demos(config: ExperimentConfig, demo_dir, out_dir=None) -> Path:
    """Fit and evaluate policies from existing trajectory files (e.g. saved
    live-teleoperation episodes) instead of collecting with the scripted
    operator."""
    demo_dir = Path(demo_dir)
    files = sorted(demo_dir.glob("*.jsonl"))
    if not files:
        raise FileNotFoundError(f"no .jsonl trajectory files under {demo_dir}")
    trajectories = [t for f in files for t in read_trajectories(f)]
    out = Path(out_dir) if out_dir is not None else Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    for method in config.methods:
        variant = get_variant(method)
        for seed in config.seeds:
            bundle, reports = fit_iteration(
                variant,
                trajectories,
                replace(config.train, seed=seed),
                seed_ctx="demos",
                label_source=config.label_source,
            )
            cell = out / f"demos/{variant.name}_seed{seed}"
            save_bundle(cell / "bundle", bundle)
            env_cfg = replace(config.env, n_objects=bundle.n_objects, t_max=None)
            metrics = evaluate_bundle(bundle, Env(env_cfg), config.eval_episodes, derive_stream(seed, ("eval",)))
            (cell / "metrics.json").write_text(
                json.dumps(
                    {
                        "eval": metrics.to_dict(),
                        "train": {k: r.to_dict() for k, r in reports.items()},
                        "n_trajectories": len(trajectories),
                    }
                ),
                encoding="utf-8",
            )
            results.append({"method": variant.name, "seed": seed, "path": str(cell), "status": "complete"})
    (out / "manifest.json").write_text(
        json.dumps({"cells": results, "source": str(demo_dir)}, indent=2), encoding="utf-8"
    )
    return out


def cmd_eval(bundle_dir, env_config, episodes: int, seed: int) -> EvalMetrics:
    """Evaluate a stored bundle: seeded rollouts without disturbance."""
    bundle_dir = Path(bundle_dir)
    if not (bundle_dir / "manifest.json").exists():
        raise FileNotFoundError(f"no bundle checkpoint at {bundle_dir}")
    bundle = load_bundle(bundle_dir)
    env = Env(env_config)
    return evaluate_bundle(bundle, env, episodes, derive_stream(seed, ("eval",)))


# -- reporting -----------------------------------------------------------------


def _load_cell_series(out: Path, cell: dict) -> list[dict]:
    """Per-iteration rows for one cell, read back from its persisted records."""
    rows = []
    cell_dir = out / cell["path"]
    k = 1
    while (cell_dir / f"iter{k}").is_dir():
        d = cell_dir / f"iter{k}"
        metrics = json.loads((d / "metrics.json").read_text(encoding="utf-8"))
        sigma = json.loads((d / "sigma.json").read_text(encoding="utf-8"))
        rows.append(
            {
                "suite": cell["suite"],
                "method": cell["method"],
                "seed": cell["seed"],
                "n_objects": cell["n_objects"],
                "threshold": cell["threshold"],
                "iteration": k,
                "success_rate": metrics["eval"]["success_rate"],
                "manual_nll": metrics["manual_nll"],
                "sigma_next": sigma["sigma_next"],
            }
        )
        k += 1
    return rows


def _write_csv(path: Path, header_comment: str, columns: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(rows)


def cmd_report(artifact_dir, out_dir=None) -> dict[str, Path]:
    """Aggregate persisted runs into CSV tables and plot-data series.

    Emits per-condition success mean/std by iteration, the disturbance-level
    series per dimension, the manual-step NLL series, and a per-cell summary.
    Spread values are the population standard deviation over seeds.  Partial
    cells appear in the cell summary flagged by status; their completed
    iterations still contribute.
    """
    art = Path(artifact_dir)
    manifest_path = art / "manifest.json"
    if not manifest_path.exists():
        raise ReportError(f"no records: {manifest_path} does not exist")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    cells = manifest.get("cells", [])
    if not cells:
        raise ReportError(f"no records: manifest at {art} lists no cells")

    all_rows: list[dict] = []
    for cell in cells:
        all_rows.extend(_load_cell_series(art, cell))
    if not all_rows:
        raise ReportError(f"no records: no completed iterations under {art}")

    out = Path(out_dir) if out_dir is not None else art
    out.mkdir(parents=True, exist_ok=True)

    def group_key(r):
        return (r["suite"], r["method"], r["n_objects"], r["threshold"], r["iteration"])

    groups: dict[tuple, list[dict]] = {}
    for r in all_rows:
        groups.setdefault(group_key(r), []).append(r)

    success_rows = []
    sigma_rows = []
    nll_rows = []
    for key in sorted(groups, key=str):
        suite, method, n_obj, thr, it = key
        rs = groups[key]
        rates = [r["success_rate"] for r in rs]
        success_rows.append(
            [suite, method, n_obj, thr, it, len(rates), float(np.mean(rates)), float(np.std(rates))]
        )
        for dim in range(4):
            vals = [r["sigma_next"][dim] for r in rs]
            sigma_rows.append(
                [suite, method, n_obj, thr, it, dim, len(vals), float(np.mean(vals)), float(np.std(vals))]
            )
        nlls = [r["manual_nll"] for r in rs if r["manual_nll"] is not None]
        if nlls:
            nll_rows.append(
                [suite, method, n_obj, thr, it, len(nlls), float(np.mean(nlls)), float(np.std(nlls))]
            )

    cell_rows = [
        [
            c["suite"], c["method"], c["n_objects"], c["threshold"], c["seed"],
            c["status"], c.get("iterations_completed"), c.get("final_success"),
        ]
        for c in cells
    ]

    paths = {}
    paths["success"] = out / "report_success.csv"
    _write_csv(
        paths["success"],
        "test success rate by condition and iteration; std is population std over seeds",
        ["suite", "method", "n_objects", "threshold", "iteration", "n_seeds", "success_mean", "success_std"],
        success_rows,
    )
    paths["sigma"] = out / "report_sigma.csv"
    _write_csv(
        paths["sigma"],
        "updated disturbance level per action dimension; std is population std over seeds",
        ["suite", "method", "n_objects", "threshold", "iteration", "dim", "n_seeds", "sigma_mean", "sigma_std"],
        sigma_rows,
    )
    paths["nll"] = out / "report_nll.csv"
    _write_csv(
        paths["nll"],
        "manual-step negative log-likelihood diagnostic; std is population std over seeds",
        ["suite", "method", "n_objects", "threshold", "iteration", "n_seeds", "nll_mean", "nll_std"],
        nll_rows,
    )
    paths["cells"] = out / "report_cells.csv"
    _write_csv(
        paths["cells"],
        "per-cell run summary; partial cells are flagged, not dropped",
        ["suite", "method", "n_objects", "threshold", "seed", "status", "iterations_completed", "final_success"],
        cell_rows,
    )
    return paths
