"""Mode pipelines: hypothesis checks, then the mode computation, then a report."""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .dynamics import analyze_cycles, discretize, k_of, proposition1_check, robustness_verdict
from .lattice import GridContext, compute_extent, order_bounds
from .maps import ConditionVerdict, check_margin, check_monotone, check_self_mapping
from .measure import (
    ScanTable,
    bounds_report,
    check_hypotheses,
    estimate_near_fixed_measure,
    q_grid_scan,
    sweep_offsets,
    _k_integral_from_sweep,
    _vs_gated_from_sweep,
    _vs_from_sweep,
)
from .exceptions import ConfigError


@dataclass
class RunReport:
    config: dict[str, Any]
    hypotheses: dict[str, Any]
    payload: dict[str, Any]
    version: str = __version__
    wall_time: float = 0.0
    strict_failures: list[str] = field(default_factory=list)
    table: Optional[ScanTable] = field(default=None, repr=False, compare=False)

    def to_dict(self, include_timing: bool = True) -> dict[str, Any]:
        out = {
            "config": self.config,
            "hypotheses": self.hypotheses,
            "payload": self.payload,
            "strict_failures": self.strict_failures,
            "version": self.version,
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "RunReport":
        return cls(raw["config"], raw["hypotheses"], raw["payload"], raw["version"],
                   raw.get("wall_time", 0.0), list(raw.get("strict_failures", [])))


def _verdicts(d: dict[str, ConditionVerdict]) -> dict[str, Any]:
    return {k: v.to_dict() for k, v in d.items()}


def _robustness_single(cfg: ExperimentConfig, f, dom):
    ctx = GridContext.from_offset(cfg.h, cfg.q)
    sys = discretize(f, dom, ctx)
    hyp: dict[str, ConditionVerdict] = {}
    if dom.is_box:
        try:
            hyp["margin"] = check_margin(f, dom, cfg.h, seed=cfg.seed)
        except ConfigError as exc:
            hyp["margin"] = ConditionVerdict(False, {"error": str(exc)})
    hyp["monotone"] = check_monotone(f, ctx.point(sys.points))
    hyp["self_mapping"] = check_self_mapping(f, dom, ctx)
    if len(sys):
        ob = order_bounds(sys.points)
        hyp["order_bounds"] = (ConditionVerdict(True, details={"u1": list(ob.lower), "u2": list(ob.upper)})
                               if ob.exists else
                               ConditionVerdict(False, {"missing": ob.witness[0], "corner": list(ob.witness[1])}))

    cycles = analyze_cycles(sys)
    verdict = robustness_verdict(sys, cycles)
    eq = verdict.equilibrium
    payload = {
        "h": ctx.h,
        "q": list(ctx.q),
        "n_points": len(sys),
        "k": k_of(f, dom, ctx),
        "robust": verdict.robust,
        "reason": verdict.reason.value,
        "equilibrium": None if eq is None else {"z": list(eq), "x": ctx.point(eq).tolist()},
        "equilibria": [list(z) for z in verdict.equilibria],
        "cycle": [list(z) for z in verdict.cycle],
        "escape_witness": None if verdict.escape_witness is None else list(verdict.escape_witness),
        "cycles": [{"period": c.period, "basin_size": c.basin_size, "first_member": list(c.members[0])}
                   for c in cycles.cycles],
        "escaped": cycles.escaped,
    }
    if verdict.robust and hyp["monotone"].satisfied:
        payload["proposition1"] = proposition1_check(sys, verdict).to_dict()
    return hyp, payload, []


def _measure_sweep(cfg: ExperimentConfig, f, dom):
    hyp = check_hypotheses(f, dom, cfg.h, cfg.seed)
    rows = []
    for h in cfg.h_values or [cfg.h]:
        sweep = sweep_offsets(f, dom, h, cfg.n_samples, cfg.seed)
        rows.append({
            "h": h,
            "L": compute_extent(dom, h).L,
            "vs": _vs_from_sweep(sweep, h, dom.d, cfg.seed).to_dict(),
            "vs_gated": _vs_gated_from_sweep(sweep, h, dom.d, cfg.seed).to_dict(),
            "k_integral": _k_integral_from_sweep(sweep, h, dom.d, cfg.seed).to_dict(),
            "vnear": estimate_near_fixed_measure(f, dom, h, cfg.n_samples, cfg.seed).to_dict(),
            "escaped_offsets": sweep.escaped,
            "cycling_offsets": sweep.nontrivial_cycle,
        })
    return hyp, {"estimates": rows}, []


def _bounds(cfg: ExperimentConfig, f, dom):
    hyp = check_hypotheses(f, dom, cfg.h, cfg.seed)
    report = bounds_report(f, dom, cfg.h, cfg.n_samples, cfg.seed, hypotheses=hyp)
    payload = report.to_dict()
    del payload["hypotheses"]
    failures = [c.name for c in report.checks
                if not c.passed and (report.hypotheses_verified or c.name == "k_at_most_L")]
    return hyp, payload, failures


def _scan(cfg: ExperimentConfig, f, dom):
    hyp = check_hypotheses(f, dom, cfg.h, cfg.seed)
    table = q_grid_scan(f, dom, cfg.h, cfg.resolution)
    payload = {
        "resolution": cfg.resolution,
        "rows": len(table.k),
        "k1_fraction": table.fraction(table.k == 1),
        "robust_fraction": table.fraction(table.robust),
        "k_max": int(table.k.max()),
    }
    return hyp, payload, [], table


def run(cfg: ExperimentConfig) -> RunReport:
    """Execute one experiment; raises :class:`ConfigError` on bad input."""
    start = time.perf_counter()
    f = cfg.build_map()
    dom = cfg.build_domain()
    table = None
    if cfg.mode == "robustness-single":
        hyp, payload, failures = _robustness_single(cfg, f, dom)
    elif cfg.mode == "measure-sweep":
        hyp, payload, failures = _measure_sweep(cfg, f, dom)
    elif cfg.mode == "bounds-report":
        hyp, payload, failures = _bounds(cfg, f, dom)
    else:
        hyp, payload, failures, table = _scan(cfg, f, dom)
    return RunReport(cfg.to_dict(), _verdicts(hyp), payload, __version__,
                     time.perf_counter() - start, failures, table)


def _table_json(table: ScanTable) -> dict[str, Any]:
    return {
        "header": table.header(),
        "rows": [[None if isinstance(v, float) and np.isnan(v) else v for v in row] for row in table.rows()],
    }


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "" if np.isnan(v) else format(v, ".17g")
    return str(v)


def emit(report: RunReport, out_dir: str | Path, fmt: str = "json", name: str = "report") -> list[Path]:
    """Write the report (and the scan table, if any) under ``out_dir``.

    The main JSON document excludes wall time so identical runs produce
    identical bytes; timing goes to ``<name>.timing.json``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict(include_timing=False)
    written = []
    if report.table is not None:
        if fmt == "csv":
            path = out / f"{name}.csv"
            with path.open("w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(report.table.header())
                for row in report.table.rows():
                    writer.writerow([_fmt(v) for v in row])
            doc["payload"] = {**doc["payload"], "table_path": path.name}
            written.append(path)
        else:
            doc["payload"] = {**doc["payload"], "table": _table_json(report.table)}
    path = out / f"{name}.json"
    path.write_text(json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    written.insert(0, path)
    timing = out / f"{name}.timing.json"
    timing.write_text(json.dumps({"wall_time": report.wall_time}) + "\n", encoding="utf-8")
    written.append(timing)
    return written
