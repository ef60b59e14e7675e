"""Sweep runner, CSV emission and SVG regret plots.

    python -m safeoco --setting linear --algos mp-rogd,mp-ogd \\
        --horizons 100,1000,10000 --seeds 0..9 --out results.csv --plot fig.svg
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .algo import ALGORITHMS, EXPERIMENT, MP_OGD, SCHEDULES, RunResult, default_params, RUNNERS
from .problem import SETTINGS, ZeroCostStream, make_instance, regret, round_regret

log = logging.getLogger(__name__)

HEADER = (
    "setting", "algo", "schedule", "dim", "seed", "horizon", "regret", "avg_regret",
    "max_g_value", "min_gamma", "max_iterate_gap", "audit_pass", "wall_ms",
)
AGG_SEED = "agg"


class SchemaError(ValueError):
    pass


@dataclass
class SweepConfig:
    setting: str = "linear"
    algorithms: Sequence[str] = ("mp-rogd",)
    horizons: Sequence[int] = (100, 1000, 10000)
    seeds: Sequence[int] = tuple(range(10))
    schedule: str = EXPERIMENT
    dim: int = 2
    audit: bool = False
    out: str | None = None
    plot: str | None = None
    save_traces: str | None = None
    zero_cost: bool = False
    prefix_checkpoints: bool = False
    timing: bool = False
    workers: int = 1

    def __post_init__(self):
        self.algorithms = tuple(self.algorithms)
        self.horizons = tuple(int(h) for h in self.horizons)
        self.seeds = tuple(int(s) for s in self.seeds)
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise ValueError(f"unknown algorithms {bad}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if not self.horizons or min(self.horizons) < 1:
            raise ValueError("horizons must be positive integers")
        if not self.seeds:
            raise ValueError("at least one seed is required")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isnan(x):
            return ""
        return repr(x)
    return str(x)


def _row(config: SweepConfig, algo: str, seed, T: int, result: RunResult | None,
         upto: int | None = None, regret_value: float | None = None) -> dict:
    row = dict.fromkeys(HEADER, "")
    row.update(setting=config.setting, algo=algo, schedule=config.schedule,
               dim=str(config.dim), seed=str(seed), horizon=str(T))
    if result is None:
        row["audit_pass"] = "error"
        return row
    records = result.records[:upto] if upto is not None else result.records
    reg = result.regret if regret_value is None else regret_value
    row["regret"] = _fmt(float(reg))
    row["avg_regret"] = _fmt(float(reg) / T)
    row["max_g_value"] = _fmt(max(float(np.max(r.g_values)) for r in records))
    if algo != MP_OGD:
        row["min_gamma"] = _fmt(min(r.gamma for r in records))
        row["max_iterate_gap"] = _fmt(max(float(np.linalg.norm(r.x - r.x_tilde)) for r in records))
    if config.audit and result.audit is not None:
        row["audit_pass"] = "1" if result.audit.passed else "0"
    if config.timing:
        row["wall_ms"] = f"{result.wall_ms:.3f}"
    return row


def _instance(config: SweepConfig, seed: int):
    inst = make_instance(config.setting, seed, config.dim)
    if config.zero_cost:
        inst = inst.with_costs(ZeroCostStream(config.dim))
    return inst


def _execute(config: SweepConfig, algo: str, seed: int, T: int, checkpoints):
    """One run; returns (result, error message)."""
    try:
        inst = _instance(config, seed)
        params = default_params(algo, inst, T, config.schedule)
        result = RUNNERS[algo](inst, params, checkpoints, audit=config.audit)
        return result, None
    except Exception as exc:  # sweep keeps going; the row records the failure
        log.warning("run %s seed=%s T=%s failed: %s", algo, seed, T, exc)
        return None, f"{type(exc).__name__}: {exc}"


def _execute_job(args):
    return _execute(*args)


def trace_path(directory, config: SweepConfig, algo: str, seed: int, T: int) -> Path:
    name = f"{config.setting}_{algo}_{config.schedule}_d{config.dim}_s{seed}_T{T}.npz"
    return Path(directory) / name


def save_trace(path, result: RunResult) -> None:
    np.savez(
        path,
        played_points=result.played_points,
        cost_values=result.cost_values,
        x_star=result.x_star,
        opt_values=result.opt_values,
        regret=np.array(result.regret),
    )


def regret_from_trace(path, config: SweepConfig | None = None, seed: int | None = None) -> float:
    """Recompute a run's regret from a saved trace.

    With ``config`` and ``seed`` the costs are regenerated from the seed and
    evaluated afresh; otherwise the stored cost values are re-summed.
    """
    data = np.load(path)
    if config is not None:
        inst = _instance(config, seed)
        T = data["played_points"].shape[0]
        return regret(data["played_points"], data["x_star"], inst.costs.draws(T))
    return math.fsum(round_regret(v, o) for v, o in zip(data["cost_values"], data["opt_values"]))


def _aggregate(config: SweepConfig, algo: str, T: int, rows: list[dict]) -> dict:
    agg = dict.fromkeys(HEADER, "")
    agg.update(setting=config.setting, algo=algo, schedule=config.schedule,
               dim=str(config.dim), seed=AGG_SEED, horizon=str(T))
    ok = [r for r in rows if r["regret"] != ""]
    if not ok:
        agg["audit_pass"] = "error"
        return agg
    for col in ("regret", "avg_regret"):
        vals = np.array([float(r[col]) for r in ok])
        agg[col] = f"{_fmt(float(np.mean(vals)))};{_fmt(float(np.std(vals)))}"
    agg["max_g_value"] = _fmt(max(float(r["max_g_value"]) for r in ok))
    gam = [float(r["min_gamma"]) for r in ok if r["min_gamma"] != ""]
    gap = [float(r["max_iterate_gap"]) for r in ok if r["max_iterate_gap"] != ""]
    agg["min_gamma"] = _fmt(min(gam)) if gam else ""
    agg["max_iterate_gap"] = _fmt(max(gap)) if gap else ""
    if config.audit:
        agg["audit_pass"] = "1" if all(r["audit_pass"] == "1" for r in rows) else "0"
    if config.timing:
        agg["wall_ms"] = f"{sum(float(r['wall_ms']) for r in ok):.3f}"
    return agg


def run_sweep(config: SweepConfig) -> tuple[list[dict], dict]:
    """Run every (algo, seed, horizon) cell; returns CSV rows and audit summaries.

    Rows come out in (algo, horizon, seed) order with one aggregate row after
    each (algo, horizon) group, whatever order the runs finish in.
    """
    if config.prefix_checkpoints:
        T_max = max(config.horizons)
        jobs = [(config, a, s, T_max, config.horizons) for a in config.algorithms for s in config.seeds]
    else:
        jobs = [(config, a, s, T, None) for a in config.algorithms for T in config.horizons
                for s in config.seeds]

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_execute_job, jobs))
    else:
        outcomes = [_execute_job(j) for j in jobs]
    results = {(j[1], j[2], j[3]): out for j, out in zip(jobs, outcomes)}

    if config.save_traces:
        Path(config.save_traces).mkdir(parents=True, exist_ok=True)
        for (algo, seed, T), (result, _) in results.items():
            if result is not None:
                save_trace(trace_path(config.save_traces, config, algo, seed, T), result)

    rows: list[dict] = []
    audits: dict = {}
    for algo in config.algorithms:
        for T in config.horizons:
            group = []
            for seed in config.seeds:
                if config.prefix_checkpoints:
                    result, _ = results[(algo, seed, max(config.horizons))]
                    row = (_row(config, algo, seed, T, result, upto=T, regret_value=result.regret_series[T])
                           if result is not None else _row(config, algo, seed, T, None))
                else:
                    result, _ = results[(algo, seed, T)]
                    row = _row(config, algo, seed, T, result)
                    if result is not None and result.audit is not None:
                        audits[(config.setting, algo, seed, T)] = result.audit
                group.append(row)
            rows.extend(group)
            rows.append(_aggregate(config, algo, T, group))
    if config.prefix_checkpoints:
        for (algo, seed, T), (result, _) in results.items():
            if result is not None and result.audit is not None:
                audits[(config.setting, algo, seed, T)] = result.audit
    return rows, audits


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=HEADER, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def write_csv(rows: list[dict], path) -> None:
    Path(path).write_text(rows_to_csv(rows))


# --------------------------------------------------------------------------
# plotting


def _read_rows(csv_path) -> list[dict]:
    text = Path(csv_path).read_text()
    if not text.strip():
        raise SchemaError("empty CSV")
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != HEADER:
        raise SchemaError(f"unexpected header {reader.fieldnames}")
    rows = list(reader)
    if not rows:
        raise SchemaError("CSV has a header but no rows")
    return rows


def _curves(rows: list[dict]) -> dict[str, list[tuple[float, float, float]]]:
    """label -> sorted [(T, mean, std)] of average regret."""
    labels = {(r["setting"], r["algo"], r["schedule"]) for r in rows}
    vary_setting = len({k[0] for k in labels}) > 1
    vary_schedule = len({k[2] for k in labels}) > 1

    def label(r):
        parts = [r["setting"]] if vary_setting else []
        parts.append(r["algo"])
        if vary_schedule:
            parts.append(r["schedule"])
        return "/".join(parts)

    agg: dict[str, dict[int, tuple[float, float]]] = {}
    raw: dict[str, dict[int, list[float]]] = {}
    for r in rows:
        lab, T = label(r), int(r["horizon"])
        if r["avg_regret"] == "":
            continue
        if r["seed"] == AGG_SEED:
            mean, std = (float(v) for v in r["avg_regret"].split(";"))
            agg.setdefault(lab, {})[T] = (mean, std)
        else:
            raw.setdefault(lab, {}).setdefault(T, []).append(float(r["avg_regret"]))

    curves = {}
    for lab in sorted(set(agg) | set(raw)):
        pts = dict(agg.get(lab, {}))
        for T, vals in raw.get(lab, {}).items():
            if T not in pts:
                pts[T] = (float(np.mean(vals)), float(np.std(vals)))
        curves[lab] = [(float(T), m, s) for T, (m, s) in sorted(pts.items())]
    return curves


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def emit_plot(csv_path, out_path=None) -> str:
    """SVG of mean average regret against horizon (log axis) with ±1 std bands."""
    curves = _curves(_read_rows(csv_path))
    if not curves:
        raise SchemaError("no plottable rows")
    W, H, left, right, top, bottom = 640, 420, 70, 150, 30, 50
    pw, ph = W - left - right, H - top - bottom

    Ts = [p[0] for c in curves.values() for p in c]
    lo_y = min(min(m - s for _, m, s in c) for c in curves.values())
    hi_y = max(max(m + s for _, m, s in c) for c in curves.values())
    lo_y = min(lo_y, 0.0)
    if hi_y <= lo_y:
        hi_y = lo_y + 1.0
    lx0, lx1 = math.log10(min(Ts)), math.log10(max(Ts))
    if lx1 <= lx0:
        lx0, lx1 = lx0 - 0.5, lx1 + 0.5

    def sx(T):
        return left + (math.log10(T) - lx0) / (lx1 - lx0) * pw

    def sy(v):
        return top + (1.0 - (v - lo_y) / (hi_y - lo_y)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for e in range(math.floor(lx0), math.ceil(lx1) + 1):
        if lx0 - 1e-9 <= e <= lx1 + 1e-9:
            x = sx(10.0**e)
            out.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{x:.2f}" y="{top + ph + 20}" font-size="12" text-anchor="middle">1e{e}</text>')
    for i in range(5):
        v = lo_y + (hi_y - lo_y) * i / 4
        y = sy(v)
        out.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.2f}" font-size="11" text-anchor="end">{v:.3g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{H - 10}" font-size="13" text-anchor="middle">T</text>')
    out.append(f'<text x="15" y="{top + ph / 2:.1f}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 15 {top + ph / 2:.1f})">R_T / T</text>')

    for i, (lab, pts) in enumerate(curves.items()):
        color = _COLORS[i % len(_COLORS)]
        if len(pts) == 1:
            T, m, _ = pts[0]
            out.append(f'<circle cx="{sx(T):.2f}" cy="{sy(m):.2f}" r="4" fill="{color}"/>')
        else:
            upper = " ".join(f"{sx(T):.2f},{sy(m + s):.2f}" for T, m, s in pts)
            lower = " ".join(f"{sx(T):.2f},{sy(m - s):.2f}" for T, m, s in reversed(pts))
            out.append(f'<polygon points="{upper} {lower}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
            line = " ".join(f"{sx(T):.2f},{sy(m):.2f}" for T, m, _ in pts)
            out.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = top + 15 + 18 * i
        out.append(f'<rect x="{left + pw + 15}" y="{ly - 9}" width="12" height="12" fill="{color}"/>')
        out.append(f'<text x="{left + pw + 32}" y="{ly + 1}" font-size="12">{lab}</text>')
    out.append("</svg>")
    svg = "\n".join(out) + "\n"
    if out_path is not None:
        Path(out_path).write_text(svg)
    return svg


# --------------------------------------------------------------------------
# entry point


def parse_seeds(text: str) -> list[int]:
    """``"0..9"`` (inclusive) or ``"1,4,7"`` or a mix of both."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..")
            seeds.extend(range(int(a), int(b) + 1))
        elif part:
            seeds.append(int(part))
    return seeds


def _int_list(text: str) -> list[int]:
    return [int(float(v)) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="safeoco", description=__doc__.splitlines()[0])
    p.add_argument("--setting", choices=sorted(SETTINGS), default="linear")
    p.add_argument("--algos", default="mp-rogd", help="comma list of " + ",".join(ALGORITHMS))
    p.add_argument("--horizons", type=_int_list, default=[100, 1000, 10000])
    p.add_argument("--seeds", type=parse_seeds, default=list(range(10)))
    p.add_argument("--schedule", choices=SCHEDULES, default=EXPERIMENT)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--audit", action="store_true")
    p.add_argument("--out", default="results.csv")
    p.add_argument("--plot", default=None)
    p.add_argument("--save-traces", default=None, metavar="DIR")
    p.add_argument("--zero-cost", action="store_true", help="replace all costs by zero (testing)")
    p.add_argument("--prefix-checkpoints", action="store_true",
                   help="one long run per seed, regret read at each horizon")
    p.add_argument("--timing", action="store_true", help="fill wall_ms (makes output nondeterministic)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    config = SweepConfig(
        setting=args.setting,
        algorithms=[a.strip() for a in args.algos.split(",") if a.strip()],
        horizons=args.horizons,
        seeds=args.seeds,
        schedule=args.schedule,
        dim=args.dim,
        audit=args.audit,
        out=args.out,
        plot=args.plot,
        save_traces=args.save_traces,
        zero_cost=args.zero_cost,
        prefix_checkpoints=args.prefix_checkpoints,
        timing=args.timing,
        workers=args.workers,
    )
    rows, audits = run_sweep(config)
    write_csv(rows, config.out)
    if config.plot:
        emit_plot(config.out, config.plot)
    failed = [k for k, a in audits.items() if not a.passed]
    for key in failed:
        for rep in audits[key].failures():
            print(f"audit failure {key}: {rep.name} worst={rep.worst!r} bound={rep.bound!r} "
                  f"at (seed, round) = {rep.locator}", file=sys.stderr)
    errors = sum(r["audit_pass"] == "error" for r in rows)
    return 1 if failed or errors else 0


if __name__ == "__main__":
    raise SystemExit(main())
