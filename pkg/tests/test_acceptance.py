"""Acceptance criteria 1-11, each at its stated tolerance, one PASS/FAIL line apiece."""
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from tcsf import bench, verify


def _entries_line(entries):
    return "; ".join(f"{e.name}={e.measured:.4g}{e.relation}{e.bound:.4g}" for e in entries)


def _suite_criterion(report_criterion, n, entries, budget, started):
    elapsed = time.perf_counter() - started
    ok = all(e.passed for e in entries) and elapsed < budget
    report_criterion(n, ok, f"{_entries_line(entries)} [{elapsed:.1f}s < {budget}s]")
    for e in entries:
        assert e.passed, e.line()
    assert elapsed < budget


def test_criterion_1_moment_bound(report_criterion):
    t = time.perf_counter()
    _suite_criterion(report_criterion, 1, verify.moment_bound(), 60, t)


def test_criterion_2_scale_recovery(report_criterion):
    t = time.perf_counter()
    _suite_criterion(report_criterion, 2, verify.scale_recovery(), 120, t)


def test_criterion_3_bias_order(report_criterion):
    t = time.perf_counter()
    _suite_criterion(report_criterion, 3, verify.bias_order(), 300, t)


def test_criterion_4_second_moment_slope(report_criterion):
    t = time.perf_counter()
    entries = [e for e in verify.second_moment() if e.name.startswith("second_moment_slope")]
    _suite_criterion(report_criterion, 4, entries, 120, t)


def test_criterion_5_amse_remarks(report_criterion):
    t = time.perf_counter()
    _suite_criterion(report_criterion, 5, verify.amse_remarks(), 60, t)


@pytest.fixture(scope="module")
def full_tables():
    t = time.perf_counter()
    out = {}
    for setting in bench.SETTINGS:
        suite = bench.load_suite(overrides={"setting": setting})
        out[setting] = bench.run_experiments(bench.expand_suite(suite))
    return out, time.perf_counter() - t


def _lt(a, b):
    return math.isfinite(a) and math.isfinite(b) and a < b


@pytest.mark.slow
def test_criterion_6_benchmark_ordering(full_tables, report_criterion):
    tables, elapsed = full_tables
    failures = []
    for setting, reports in tables.items():
        for rep in reports:
            row = f"{setting}/{rep.config.objective}/{rep.config.noise.label()}"
            err = {name: rep.cell(name).mean_abs_err for name in ("tcsf", "btcsf", "gsf", "rdsa")}
            for mine in ("tcsf", "btcsf"):
                for base in ("gsf", "rdsa"):
                    if not _lt(err[mine], err[base]):
                        failures.append(f"{row}:{mine}={err[mine]:.3g}!<{base}={err[base]:.3g}")
    rast = next(r for r in tables["diminishing"]
                if r.config.objective == "rastrigin" and r.config.noise.kind == "type1").cell("tcsf")
    rast_ok = math.isfinite(rast.mean_f) and rast.mean_f <= 0.01
    ok = not failures and rast_ok and elapsed < 1800
    report_criterion(6, ok, f"{len(failures)} ordering violations of 72; rastrigin/type1 tcsf mean "
                            f"{rast.mean_f:.3g} (<= 0.01, {rast.n_excluded} runs excluded) [{elapsed:.0f}s]")
    assert not failures, failures[:6]
    assert rast_ok
    assert elapsed < 1800


@pytest.mark.slow
def test_criterion_7_iteration_counts(full_tables, report_criterion):
    tables, _ = full_tables
    failures, shown = [], []
    for rep in tables["constant"]:
        if rep.config.noise.kind != "type1" or rep.config.objective not in ("rastrigin", "quadratic"):
            continue
        it = {name: rep.cell(name).mean_iters for name in ("btcsf", "tcsf", "gsf", "rdsa")}
        shown.append(f"{rep.config.objective}: " + " ".join(f"{k}={v:.4g}" for k, v in it.items()))
        for a, b in (("btcsf", "tcsf"), ("tcsf", "gsf"), ("tcsf", "rdsa")):
            if not _lt(it[a], it[b]):
                failures.append(f"{rep.config.objective}:{a}!<{b}")
    report_criterion(7, not failures, "; ".join(shown))
    assert not failures, failures


def test_criterion_8_trap_avoidance(report_criterion):
    t = time.perf_counter()
    _suite_criterion(report_criterion, 8, verify.trap_avoidance(), 120, t)


@pytest.mark.slow
def test_criterion_9_rate_exponent(report_criterion):
    t = time.perf_counter()
    entries = verify.rate_exponent()
    e = entries[0]
    elapsed = time.perf_counter() - t
    report_criterion(9, e.passed and elapsed < 600,
                     f"ratio={e.measured:.4g} <= 2 (a_1e3={e.detail['a_1e3']:.3g}, a_1e4={e.detail['a_1e4']:.3g}, "
                     f"gamma0={e.detail['gamma0']:.4g}, numeric errors {e.detail['numeric_errors']}/100) "
                     f"[{elapsed:.0f}s]")
    assert e.passed, e.line()
    assert elapsed < 600


@pytest.mark.slow
def test_criterion_10_theorem_trend(report_criterion):
    t = time.perf_counter()
    _suite_criterion(report_criterion, 10, verify.theorem_trend(), 600, t)


def test_criterion_11_determinism(tmp_path, report_criterion):
    t = time.perf_counter()
    outs = []
    for i in range(2):
        d = tmp_path / f"run{i}"
        subprocess.run([sys.executable, "-m", "tcsf", "bench", "--seed", "7", "--n-runs", "5",
                        "--objectives", "rastrigin,quadratic", "--noises", "type1,type2",
                        "--out-dir", str(d), "--format", "csv"], check=True, capture_output=True)
        outs.append((d / "report.csv").read_bytes())
    elapsed = time.perf_counter() - t
    same = outs[0] == outs[1]
    report_criterion(11, same and elapsed < 60,
                     f"report.csv byte-identical={same} ({len(outs[0])} bytes) [{elapsed:.1f}s]")
    assert same and elapsed < 60
