"""Run orchestration: single runs, stiffness sweeps, on-disk artifacts."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import diagnostics
from .config import config_to_dict, serialize_config
from .diagnostics import CSV_COLUMNS
from .domain import build_barrier, make_state, validate_initial
from .errors import (
    BarrierViolation,
    DegenerateState,
    IoError,
    NonFinite,
    ParameterError,
    QuadratureFailure,
    SpecError,
    StepFailure,
    ValidationError,
)
from .scenarios import build_initial, manufactured_default
from .solver import advance

from pathlib import Path

__version__ = "0.1.0"

STATUS_EXIT = {"ok": 0, "invalid": 2, "solver_failure": 3, "io_failure": 4}
SOLVER_ERRORS = (StepFailure, DegenerateState, NonFinite, BarrierViolation, QuadratureFailure)
DELTA_C_SENSITIVITY = (0.02, 0.05, 0.1)


@dataclass
class RunResult:
    status: str
    records: list = field(default_factory=list)
    states: list = field(default_factory=list)
    final_state: object = None
    out_dir: Path | None = None
    wall_time: float = 0.0
    error: str | None = None

    @property
    def exit_code(self):
        return STATUS_EXIT[self.status]


def prepare_out_dir(path):
    """Create the output directory and prove it is writable."""
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise IoError(f"output directory {out} is not writable: {exc}") from exc
    return out


def _fmt_float(x):
    return repr(float(x))


def _write_diagnostics(path, records):
    lines = [",".join(CSV_COLUMNS)]
    for rec in records:
        lines.append(",".join(_fmt_float(getattr(rec, col)) for col in CSV_COLUMNS))
    path.write_text("\n".join(lines) + "\n")


def _write_snapshot(out_dir, state, barrier, tag=None):
    grid = state.grid
    stamp = tag if tag is not None else f"t{state.t:.6f}"
    meta = {
        "t": state.t,
        "cells": list(grid.cells),
        "extent": list(grid.extents),
    }
    snap_dir = out_dir / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    u = state.velocity(0.0)
    if grid.dim == 1:
        x = grid.centers(0)
        rows = ["x,rho,mom_x,u_x,barrier"]
        rho = state.rho_interior
        mom = state.mom_interior[0]
        ui = u[0][1:-1]
        bar = barrier.interior
        for i in range(grid.cells[0]):
            rows.append(
                ",".join(_fmt_float(v) for v in (x[i], rho[i], mom[i], ui[i], bar[i]))
            )
        (snap_dir / f"state_{stamp}.csv").write_text("\n".join(rows) + "\n")
    else:
        fields = {
            "rho": state.rho_interior,
            "mom_x": state.mom_interior[0],
            "mom_y": state.mom_interior[1],
            "barrier": barrier.interior,
        }
        for name, arr in fields.items():
            np.savetxt(snap_dir / f"state_{stamp}_{name}.csv", arr, delimiter=",")
    (snap_dir / f"state_{stamp}.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def _write_meta(out_dir, cfg, result, extra=None):
    meta = {
        "package": f"jamflow {__version__}",
        "status": result.status,
        "error": result.error,
        "wall_time_s": result.wall_time,
        "n_records": len(result.records),
        "final_time": result.records[-1].t if result.records else None,
        "config": config_to_dict(cfg),
        "config_text": serialize_config(cfg),
    }
    if extra:
        meta.update(extra)
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def build_problem(cfg):
    """Materialize grid, barrier, initial data, and optional sources."""
    barrier = build_barrier(cfg.barrier, cfg.grid)
    if cfg.scenario_name == "manufactured_1d":
        sol = manufactured_default(cfg.law, cfg.fluid, cfg.barrier)
        sol.check_margin(cfg.solver.t_end, extent=cfg.grid.extents[0])
        data = sol.initial_data(cfg.grid)
        sources = sol.sources_for(cfg.grid)
        return barrier, data, sources, sol
    data = build_initial(cfg.initial, cfg.grid, barrier)
    return barrier, data, None, None


def run_once(cfg, out_dir=None, keep_states=True, write_artifacts=True):
    """Execute one configured run; always leaves meta.json behind."""
    started = time.perf_counter()
    out = None
    if write_artifacts:
        out = prepare_out_dir(out_dir or cfg.out_dir)
    result = RunResult(status="ok", out_dir=out)

    try:
        barrier, data, sources, _ = build_problem(cfg)
    except (SpecError, ParameterError, BarrierViolation) as exc:
        result.status = "invalid"
        result.error = str(exc)
        result.wall_time = time.perf_counter() - started
        if write_artifacts:
            _write_meta(out, cfg, result)
        return result

    report = validate_initial(data, barrier)
    if not report.ok:
        result.status = "invalid"
        result.error = report.summary()
        result.wall_time = time.perf_counter() - started
        if write_artifacts:
            _write_meta(out, cfg, result)
        return result

    state = make_state(cfg.grid, data.rho0, data.mom0)
    next_field_tick = {"t": cfg.fields_every}

    def sink(s, record):
        result.records.append(record)
        if keep_states:
            result.states.append(s)
        if write_artifacts and cfg.fields_every > 0 and s.t >= next_field_tick["t"] - 1e-12:
            _write_snapshot(out, s, barrier)
            while next_field_tick["t"] <= s.t + 1e-12:
                next_field_tick["t"] += cfg.fields_every

    if write_artifacts:
        _write_snapshot(out, state, barrier, tag="initial")
    try:
        final = advance(
            state, cfg.solver.t_end, cfg.law, cfg.fluid, barrier, cfg.solver,
            sink=sink, sources=sources,
        )
        result.final_state = final
    except SOLVER_ERRORS as exc:
        result.status = "solver_failure"
        result.error = f"{type(exc).__name__}: {exc}"

    result.wall_time = time.perf_counter() - started
    if write_artifacts:
        _write_diagnostics(out / "diagnostics.csv", result.records)
        if result.final_state is not None:
            _write_snapshot(out, result.final_state, barrier, tag="final")
        _write_meta(out, cfg, result)
    return result


# ---------------------------------------------------------------------------
# sweeps

SWEEP_COLUMNS = (
    "label",
    "value",
    "status",
    "final_max_ratio",
    "peak_max_ratio",
    "int_complementarity",
    "int_pi_l1",
    "mean_divu_congested",
    "matched_delta_c",
    "congested_ratio",
    "congested_snapshots",
    "pi_max_initial",
    "wall_time_s",
)


@dataclass
class SweepRow:
    label: str
    value: float
    status: str
    final_max_ratio: float = float("nan")
    peak_max_ratio: float = float("nan")
    int_complementarity: float = float("nan")
    int_pi_l1: float = float("nan")
    mean_divu_congested: float = float("nan")
    matched_delta_c: float = float("nan")
    congested_ratio: float = float("nan")
    congested_snapshots: int = 0
    pi_max_initial: float = float("nan")
    wall_time_s: float = 0.0


@dataclass
class SweepOutcome:
    rows: list
    results: list
    summary: dict
    out_dir: Path | None

    @property
    def exit_code(self):
        return 0 if all(r.status == "ok" for r in self.rows) else 3


def _member_configs(cfg):
    plan = cfg.sweep
    members = []
    if plan.kind == "eps":
        for v in sorted(plan.values, reverse=True):
            label = f"eps_{v:g}"
            try:
                law = replace(cfg.law, eps=float(v))
                members.append((label, float(v), replace(cfg, law=law, sweep=None), None))
            except (ParameterError, TypeError) as exc:
                members.append((label, float(v), None, str(exc)))
    else:
        for kappa, delta in sorted(plan.values, key=lambda p: p[1], reverse=True):
            label = f"delta_{delta:g}"
            try:
                law = replace(cfg.law, kappa=float(kappa), delta=float(delta))
                members.append((label, float(delta), replace(cfg, law=law, sweep=None), None))
            except (ParameterError, TypeError) as exc:
                members.append((label, float(delta), None, str(exc)))
    return members


def _time_integral(records, attr):
    t = np.array([r.t for r in records])
    y = np.array([getattr(r, attr) for r in records])
    if t.size < 2:
        return 0.0
    return float(np.trapezoid(y, t))


def _row_from_result(label, value, res, barrier, law):
    row = SweepRow(label=label, value=value, status=res.status, wall_time_s=res.wall_time)
    if not res.records:
        return row
    recs = res.records
    row.final_max_ratio = recs[-1].max_ratio
    row.peak_max_ratio = max(r.max_ratio for r in recs)
    row.int_complementarity = _time_integral(recs, "complementarity")
    row.int_pi_l1 = _time_integral(recs, "pi_l1")
    row.pi_max_initial = recs[0].pi_l1
    congested = [r.divu_congested for r in recs if r.congested_measure > 0]
    row.congested_snapshots = len(congested)
    row.mean_divu_congested = float(np.mean(congested)) if congested else 0.0
    if res.states and barrier is not None:
        delta = diagnostics.matched_congestion_delta(law, row.peak_max_ratio)
        if delta is None:
            row.congested_ratio = 0.0
            row.congested_snapshots = 0
        else:
            row.matched_delta_c = delta
            rep = diagnostics.congested_divergence_report(
                res.states, barrier, delta_c=delta
            )
            row.congested_ratio = rep.mean_congested_ratio
            row.congested_snapshots = rep.congested_snapshots
    return row


def run_sweep(cfg, out_dir=None):
    """Run every sweep member, tolerating member failures.

    Rows are ordered by decreasing stiffness (or decreasing truncation
    delta); trend indicators land in summary.json.
    """
    if cfg.sweep is None:
        raise ValidationError([("sweep.kind", 0, "config carries no sweep plan")])
    out = prepare_out_dir(out_dir or cfg.out_dir)
    rows, results = [], []
    sensitivity = {}
    for label, value, member, build_err in _member_configs(cfg):
        if member is None:
            rows.append(SweepRow(label=label, value=value, status="invalid"))
            results.append(RunResult(status="invalid", error=build_err))
            continue
        member_out = out / label
        try:
            res = run_once(member, out_dir=member_out, keep_states=True)
        except IoError as exc:
            res = RunResult(status="io_failure", error=str(exc))
        barrier = build_barrier(member.barrier, member.grid) if res.records else None
        row = _row_from_result(label, value, res, barrier, member.law)
        if res.states and barrier is not None:
            sensitivity[label] = {
                str(dc): diagnostics.congested_divergence_report(
                    res.states, barrier, delta_c=dc
                ).mean_congested_ratio
                for dc in DELTA_C_SENSITIVITY
            }
        rows.append(row)
        results.append(res)
        res.states = []  # runs can be large; metrics are already extracted
    summary = _sweep_summary(rows, sensitivity)
    _write_sweep_csv(out / "sweep.csv", rows)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return SweepOutcome(rows=rows, results=results, summary=summary, out_dir=out)


def _sweep_summary(rows, sensitivity):
    ok = [r for r in rows if r.status == "ok"]
    comp = [r.int_complementarity for r in ok]
    pis = [r.int_pi_l1 for r in ok if r.int_pi_l1 > 0]
    cong = [r for r in ok if r.congested_snapshots > 0]
    summary = {
        "n_members": len(rows),
        "n_ok": len(ok),
        "labels": [r.label for r in rows],
        "statuses": [r.status for r in rows],
        "complementarity_strictly_decreasing": bool(
            len(comp) >= 2 and all(a > b for a, b in zip(comp, comp[1:]))
        ),
        "complementarity_decrease_factor": (
            comp[0] / comp[-1] if len(comp) >= 2 and comp[-1] > 0 else None
        ),
        "pi_l1_max_over_min": (max(pis) / min(pis)) if pis else None,
        "congested_ratio_trend": [
            {"label": r.label, "ratio": r.congested_ratio, "delta_c": r.matched_delta_c}
            for r in cong
        ],
        "congested_ratio_decreasing": bool(
            len(cong) >= 2
            and all(
                a.congested_ratio > b.congested_ratio for a, b in zip(cong, cong[1:])
            )
        ),
        "delta_c_sensitivity": sensitivity,
        "pi_max_initial_by_member": [
            {"label": r.label, "pi_l1_initial": r.pi_max_initial} for r in rows
        ],
    }
    return summary


def _write_sweep_csv(path, rows):
    lines = [",".join(SWEEP_COLUMNS)]
    for row in rows:
        vals = []
        for col in SWEEP_COLUMNS:
            v = getattr(row, col)
            vals.append(v if isinstance(v, str) else (_fmt_float(v) if isinstance(v, float) else str(v)))
        lines.append(",".join(vals))
    path.write_text("\n".join(lines) + "\n")
