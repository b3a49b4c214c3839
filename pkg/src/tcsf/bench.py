"""Benchmark harness: declarative suite configs, seeded paired runs, table output.

A suite expands into one experiment per (objective, noise) pair.  Within an
experiment every estimator starts from the same per-run initial points and
draws its own noise stream, so estimator comparisons are paired.
"""
from __future__ import annotations

import copy
import csv
import io
import json
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import jsonschema
import numpy as np
import yaml

from . import perturbations as pt
from .estimators import EstimatorKind, parse_estimator
from .objectives import NoiseModel, NoisyObjective, make_objective
from .optimizer import NUMERIC_ERROR, RunRecord, ScheduleConfig, constant_schedule, power_schedule, run_many

REPORT_SCHEMA_VERSION = 1

DEFAULT_HORIZONS = {"rastrigin": 1000, "quadratic": 3000, "rosenbrock": 10000}
SETTINGS = ("diminishing", "constant")
TABLE_ESTIMATORS = ("gsf", "tcsf", "btcsf", "spsa", "rdsa")

# t-distribution directions projected to the unit sphere drive the TCSF
# columns of the benchmark
DEFAULT_SUITE = {
    "master_seed": 0,
    "n_runs": 100,
    "setting": "diminishing",
    "dim": 4,
    "objectives": ["rastrigin", "rosenbrock", "quadratic"],
    "noises": ["type1", "type2", "type3"],
    "estimators": [
        "gsf",
        {"name": "tcsf", "perturbation": pt.T_PROJECTED_SPHERE},
        {"name": "btcsf", "perturbation": pt.T_PROJECTED_SPHERE},
        "spsa",
        {"name": "rdsa", "eta": 5.0},
    ],
    "horizons": dict(DEFAULT_HORIZONS),
    "epsilon_stop": 1e-4,
}

_RULE = {
    "type": "object",
    "oneOf": [
        {"properties": {"rule": {"const": "power"}, "scale": {"type": "number", "exclusiveMinimum": 0},
                        "exponent": {"type": "number"}},
         "required": ["rule", "scale", "exponent"], "additionalProperties": False},
        {"properties": {"rule": {"const": "constant"}, "value": {"type": "number", "exclusiveMinimum": 0}},
         "required": ["rule", "value"], "additionalProperties": False},
    ],
}

_ESTIMATOR = {
    "oneOf": [
        {"type": "string", "enum": ["gsf", "tcsf", "btcsf", "tcsf_crn", "spsa", "rdsa"]},
        {"type": "object",
         "properties": {
             "name": {"type": "string", "enum": ["gsf", "tcsf", "btcsf", "tcsf_crn", "spsa", "rdsa"]},
             "perturbation": {"type": "string", "enum": list(pt._NAMES)},
             "eta": {"type": "number", "exclusiveMinimum": 0},
             "c2_rescale": {"type": "number", "exclusiveMinimum": 0},
         },
         "required": ["name"], "additionalProperties": False},
    ],
}

_NOISE = {
    "oneOf": [
        {"type": "string", "enum": ["none", "type1", "type2", "type3", "additive"]},
        {"type": "object",
         "properties": {"kind": {"type": "string", "enum": ["none", "type1", "type2", "type3", "additive"]},
                        "sigma": {"type": "number", "exclusiveMinimum": 0}},
         "required": ["kind"], "additionalProperties": False},
    ],
}

SUITE_SCHEMA = {
    "type": "object",
    "properties": {
        "master_seed": {"type": "integer", "minimum": 0},
        "n_runs": {"type": "integer", "minimum": 1},
        "setting": {"type": "string", "enum": list(SETTINGS)},
        "dim": {"type": "integer", "minimum": 1},
        "objectives": {"type": "array", "items": {"type": "string",
                                                  "enum": ["rastrigin", "rosenbrock", "quadratic", "constant"]}},
        "noises": {"type": "array", "items": _NOISE},
        "estimators": {"type": "array", "items": _ESTIMATOR},
        "horizons": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 1}},
        "epsilon_stop": {"type": "number", "minimum": 0},
        "schedule": {"type": "object",
                     "properties": {"step": _RULE, "smoothing": _RULE},
                     "required": ["step", "smoothing"], "additionalProperties": False},
        "init_box": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}},
    },
    "required": ["master_seed", "n_runs", "setting", "objectives", "noises", "estimators"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _path(parts) -> str:
    out = "config"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def validate_suite(raw: dict) -> dict:
    """Schema check with field paths, then semantic checks; returns the resolved suite."""
    errors = sorted(jsonschema.Draft7Validator(SUITE_SCHEMA).iter_errors(raw),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        raise ConfigError(_path(e.absolute_path), e.message)
    suite = copy.deepcopy(raw)
    suite.setdefault("dim", 4)
    suite.setdefault("epsilon_stop", 1e-4)
    horizons = dict(DEFAULT_HORIZONS)
    horizons.update(suite.get("horizons", {}))
    suite["horizons"] = horizons
    for i, name in enumerate(suite["objectives"]):
        if name not in horizons:
            raise ConfigError(_path(["objectives", i]), f"no horizon for objective {name!r}")
        spec = make_objective(name, suite["dim"])
        if "init_box" in suite:
            lo, hi = suite["init_box"]
            if not lo < hi:
                raise ConfigError("config.init_box", "needs lo < hi")
            if lo < spec.domain_box[:, 0].min() or hi > spec.domain_box[:, 1].max():
                raise ConfigError("config.init_box", f"outside the {name} domain box")
    return suite


def load_suite(path: Optional[str] = None, overrides: Optional[dict] = None) -> dict:
    """Default suite, updated by a YAML/JSON file, then by explicit overrides."""
    raw = copy.deepcopy(DEFAULT_SUITE)
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise ConfigError("config", "top level must be a mapping")
        raw.update(loaded)
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    return validate_suite(raw)


def setting_schedule(setting: str, horizon: int, epsilon_stop: float = 1e-4) -> ScheduleConfig:
    if setting == "diminishing":
        return power_schedule(1.0, 0.6, 1.0, 0.09, horizon, epsilon_stop)
    if setting == "constant":
        return constant_schedule(1e-4, 1e-3, horizon, epsilon_stop)
    raise ValueError(f"unknown setting {setting!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    objective: str
    noise: NoiseModel
    estimators: tuple
    schedule: ScheduleConfig
    n_runs: int
    master_seed: int
    init_box: Optional[tuple] = None
    dim: int = 4
    setting: str = "custom"

    def __post_init__(self):
        if self.n_runs < 1:
            raise ConfigError("config.n_runs", "must be at least 1")

    @property
    def tag(self) -> str:
        return f"{self.objective}/{self.noise.label()}"

    def box(self) -> np.ndarray:
        spec = make_objective(self.objective, self.dim)
        if self.init_box is None:
            return spec.domain_box
        return np.tile(np.asarray(self.init_box, dtype=float), (spec.dim, 1))

    def to_dict(self) -> dict:
        return {
            "objective": self.objective, "noise": self.noise.label(), "setting": self.setting,
            "estimators": [e.label() for e in self.estimators], "schedule": self.schedule.to_dict(),
            "n_runs": self.n_runs, "master_seed": self.master_seed, "dim": self.dim,
            "init_box": self.box().tolist(),
        }


def _noise_from(entry) -> NoiseModel:
    if isinstance(entry, str):
        return NoiseModel(entry)
    return NoiseModel(entry["kind"], float(entry.get("sigma", 5.0)))


def expand_suite(suite: dict) -> list[ExperimentConfig]:
    """One experiment per (objective, noise), in config order."""
    kinds = tuple(parse_estimator(e) for e in suite["estimators"])
    out = []
    for name in suite["objectives"]:
        horizon = suite["horizons"][name]
        if "schedule" in suite:
            sched = ScheduleConfig.from_dict({**suite["schedule"], "horizon": horizon,
                                              "epsilon_stop": suite["epsilon_stop"]})
        else:
            sched = setting_schedule(suite["setting"], horizon, suite["epsilon_stop"])
        for noise in suite["noises"]:
            out.append(ExperimentConfig(
                objective=name, noise=_noise_from(noise), estimators=kinds, schedule=sched,
                n_runs=suite["n_runs"], master_seed=suite["master_seed"],
                init_box=tuple(suite["init_box"]) if "init_box" in suite else None,
                dim=suite["dim"], setting=suite["setting"] if "schedule" not in suite else "custom",
            ))
    return out


def _crc(s: str) -> int:
    return zlib.crc32(s.encode())


def _seed_int(entropy) -> int:
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


def run_seed(cfg: ExperimentConfig, run: int, kind: EstimatorKind) -> int:
    """Seed of one run's estimator stream, fixed by (master seed, experiment, run, estimator)."""
    return _seed_int([cfg.master_seed, _crc(cfg.tag), run, _crc(kind.label())])


def initial_points(cfg: ExperimentConfig) -> np.ndarray:
    """Per-run start points, uniform in the init box and shared by all estimators."""
    box = cfg.box()
    pts = np.empty((cfg.n_runs, box.shape[0]))
    for r in range(cfg.n_runs):
        rng = np.random.default_rng(_seed_int([cfg.master_seed, _crc(cfg.tag), r]))
        pts[r] = rng.uniform(box[:, 0], box[:, 1])
    return pts


def _run_cell(cfg: ExperimentConfig, kind: EstimatorKind) -> list[RunRecord]:
    obj = NoisyObjective(make_objective(cfg.objective, cfg.dim), cfg.noise)
    seeds = [run_seed(cfg, r, kind) for r in range(cfg.n_runs)]
    return run_many(obj, kind, initial_points(cfg), cfg.schedule, seeds, keep_trajectory=False)


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    if values.size == 0:
        return math.nan, math.nan
    se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return float(values.mean()), se


@dataclass
class Cell:
    objective: str
    noise: str
    setting: str
    estimator: str
    n_runs: int
    n_used: int
    n_excluded: int
    mean_f: float
    se_f: float
    mean_abs_err: float
    se_abs_err: float
    mean_iters: float
    se_iters: float
    seeds: list = field(default_factory=list)

    @classmethod
    def from_records(cls, cfg: ExperimentConfig, kind: EstimatorKind, records: Sequence[RunRecord],
                     f_star: Optional[float]) -> "Cell":
        ok = [r for r in records if r.stop_reason != NUMERIC_ERROR]
        f = np.array([r.final_f_true for r in ok])
        iters = np.array([r.iterations_used for r in ok], dtype=float)
        err = np.abs(f - f_star) if f_star is not None else np.full(f.shape, math.nan)
        mf, sf = _mean_se(f)
        me, se = _mean_se(err)
        mi, si = _mean_se(iters)
        return cls(cfg.objective, cfg.noise.label(), cfg.setting, kind.label(), len(records),
                   len(ok), len(records) - len(ok), mf, sf, me, se, mi, si,
                   [r.seed for r in records])


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    cells: list
    records: dict

    def cell(self, estimator: str) -> Cell:
        for c in self.cells:
            if c.estimator == estimator or c.estimator.split("(")[0].split("[")[0] == estimator:
                return c
        raise KeyError(estimator)


def run_experiments(cfgs: Sequence[ExperimentConfig], jobs: int = 1) -> list[ExperimentReport]:
    """Run every (experiment, estimator) cell, optionally across worker processes."""
    tasks = [(i, j) for i, cfg in enumerate(cfgs) for j in range(len(cfg.estimators))]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {t: pool.submit(_run_cell, cfgs[t[0]], cfgs[t[0]].estimators[t[1]]) for t in tasks}
            results = {t: f.result() for t, f in futures.items()}
    else:
        results = {t: _run_cell(cfgs[t[0]], cfgs[t[0]].estimators[t[1]]) for t in tasks}
    reports = []
    for i, cfg in enumerate(cfgs):
        f_star = make_objective(cfg.objective, cfg.dim).known_min_value
        cells, recs = [], {}
        for j, kind in enumerate(cfg.estimators):
            cells.append(Cell.from_records(cfg, kind, results[(i, j)], f_star))
            recs[kind.label()] = results[(i, j)]
        reports.append(ExperimentReport(cfg, cells, recs))
    return reports


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    return run_experiments([cfg], jobs)[0]


CSV_FIELDS = ("objective", "noise", "setting", "estimator", "n_runs", "n_used", "n_excluded",
              "mean_f", "se_f", "mean_abs_err", "se_abs_err", "mean_iters", "se_iters")
_NUMERIC = {"mean_f", "se_f", "mean_abs_err", "se_abs_err", "mean_iters", "se_iters"}


def _fmt(v) -> str:
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.3e}"


def _row(c: Cell) -> list[str]:
    d = c.__dict__
    return [_fmt(d[k]) if k in _NUMERIC else str(d[k]) for k in CSV_FIELDS]


def _json_num(v):
    return v if math.isfinite(v) else repr(v)


def emit_tables(reports: Sequence[ExperimentReport], fmt: str = "text") -> str:
    """Render reports as text, csv or json, in experiment then estimator order."""
    cells = [c for rep in reports for c in rep.cells]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for c in cells:
            w.writerow(_row(c))
        return buf.getvalue()
    if fmt == "json":
        doc = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "experiments": [
                {"config": rep.config.to_dict(),
                 "cells": [{k: (_json_num(v) if k in _NUMERIC else v) for k, v in c.__dict__.items()}
                           for c in rep.cells]}
                for rep in reports
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if fmt == "text":
        rows = [list(CSV_FIELDS)] + [_row(c) for c in cells]
        widths = [max(len(r[i]) for r in rows) for i in range(len(CSV_FIELDS))]
        return "".join("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() + "\n" for r in rows)
    raise ValueError(f"unknown format {fmt!r}")


def write_outputs(reports: Sequence[ExperimentReport], suite: dict, out_dir: str) -> dict:
    """report.csv, report.json, runs.jsonl and resolved-config.yaml under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {name: os.path.join(out_dir, name)
             for name in ("report.csv", "report.json", "runs.jsonl", "resolved-config.yaml")}
    with open(paths["report.csv"], "w") as fh:
        fh.write(emit_tables(reports, "csv"))
    with open(paths["report.json"], "w") as fh:
        fh.write(emit_tables(reports, "json"))
    with open(paths["runs.jsonl"], "w") as fh:
        for rep in reports:
            ctx = {"objective": rep.config.objective, "noise": rep.config.noise.label(),
                   "setting": rep.config.setting, "schedule": rep.config.schedule.to_dict()}
            for label, records in rep.records.items():
                for rec in records:
                    fh.write(json.dumps(rec.to_json_dict(estimator=label, **ctx), sort_keys=True) + "\n")
    with open(paths["resolved-config.yaml"], "w") as fh:
        yaml.safe_dump(suite, fh, sort_keys=True)
    return paths
