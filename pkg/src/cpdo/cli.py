"""Command-line interface.

Parameters come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines (``#`` starts a comment), then explicit flags.  Every
subcommand computes its full output before writing anything, so a validation
failure never leaves a partial file behind.

Exit codes: 0 success, 2 validation error, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import asymptotics, bounds, exact
from .model import ModelParams, as_fraction
from .simulator import (
    TerminationRule,
    run_ensemble,
    run_path,
    path_seed,
    write_histogram_csv,
    write_paths_csv,
    write_trajectories_csv,
)

EXIT_VALIDATION = 2
EXIT_BUDGET = 3
EXACT_TABLE_BUDGET = 5000

DEFAULTS = {
    "gamma": 0.1,
    "delta": 0.01,
    "p_heads": 0.5,
    "cash_in_level": None,
    "n_paths": 1000,
    "max_tosses": 50_000,
    "seed": 2008,
    "parallelism": 1,
    "format": "json",
    "out": None,
}
_CASTS = {
    "gamma": float, "delta": float, "p_heads": float, "cash_in_level": float,
    "n_paths": int, "max_tosses": int, "seed": int, "parallelism": int,
    "format": str, "out": str,
}


class BudgetExceeded(Exception):
    pass


def read_config(path: str | Path) -> dict:
    """Parse a flat ``key = value`` file; dashes in keys become underscores."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CASTS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _CASTS[key](value)
    return out


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    rule: TerminationRule
    n_paths: int
    master_seed: int
    fmt: str
    out: Optional[str]
    parallelism: int

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        values = dict(DEFAULTS)
        if args.config:
            values.update(read_config(args.config))
        for key in DEFAULTS:
            flag = getattr(args, key, None)
            if flag is not None:
                values[key] = flag
        params = ModelParams(values["gamma"], values["delta"], values["p_heads"],
                             values["cash_in_level"])
        rule = TerminationRule.from_params(params, values["max_tosses"])
        if values["n_paths"] < 1:
            raise ValueError("--n-paths must be at least 1")
        if values["parallelism"] < 1:
            raise ValueError("--parallelism must be positive")
        if values["format"] not in ("csv", "json"):
            raise ValueError("--format must be csv or json")
        if values["out"] is not None and not Path(values["out"]).resolve().parent.is_dir():
            raise ValueError(f"--out: directory of {values['out']} does not exist")
        return cls(params, rule, values["n_paths"], values["seed"], values["format"],
                   values["out"], values["parallelism"])


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def dump_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        fields = list(dict.fromkeys(key for row in rows for key in row))
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return buf.getvalue()


def _emit(cfg: RunConfig, payload, rows: list[dict], extra: Optional[dict] = None) -> None:
    """Write the main output (and any sidecar files) once everything is computed."""
    text = dump_json(payload) if cfg.fmt == "json" else dump_csv(rows)
    if cfg.out is None:
        sys.stdout.write(text)
        return
    out = Path(cfg.out)
    out.write_text(text)
    for suffix, content in (extra or {}).items():
        out.with_name(out.stem + suffix).write_text(content)


# ---------------------------------------------------------------------------
# subcommands


def _exact_inputs(cfg: RunConfig):
    return as_fraction(cfg.params.delta), as_fraction(cfg.params.p_heads)


def _check_budget(k_max: int) -> None:
    if k_max < 1:
        raise ValueError("--k-max must be at least 1")
    if k_max > EXACT_TABLE_BUDGET:
        raise BudgetExceeded(f"--k-max {k_max} exceeds the exact budget of {EXACT_TABLE_BUDGET}")


def cmd_exact_table(cfg: RunConfig, k_max: int) -> list[dict]:
    """Rows ``(k, P(x_k < 0), P(x_k < 0 | x_1 < 0))`` for ``k = 1..k_max``."""
    _check_budget(k_max)
    delta, p = _exact_inputs(cfg)
    rows = []
    for k in range(1, k_max + 1):
        loss = exact.prob_loss_exact(k, delta, p)
        given = exact.prob_loss_given_early_loss(k, 1, delta, p)
        rows.append({
            "k": k,
            "p_loss": exact.rational_str(loss),
            "p_loss_decimal": round(float(loss), 6),
            "p_loss_given_x1": exact.rational_str(given),
            "p_loss_given_x1_decimal": round(float(given), 6),
        })
    return rows


def cmd_cond_table(cfg: RunConfig, k_max: int) -> list[dict]:
    """Conditional-loss columns: given ``x_1 < 0``, given ``x_2 < 0``, and successive."""
    _check_budget(k_max)
    delta, p = _exact_inputs(cfg)
    rows = []
    for k in range(1, k_max + 1):
        row = {"k": k}
        cols = {
            "p_loss_given_x1": exact.prob_loss_given_early_loss(k, 1, delta, p),
            "p_loss_given_x2": exact.prob_loss_given_early_loss(k, 2, delta, p) if k >= 2 else None,
            "p_next_loss_given_loss": exact.prob_successive_loss(k, delta, p),
        }
        for name, value in cols.items():
            row[name] = None if value is None else exact.rational_str(value)
            row[name + "_decimal"] = None if value is None else round(float(value), 6)
        rows.append(row)
    return rows


def cmd_simulate(cfg: RunConfig, trajectory_stride: Optional[int] = None):
    report = run_ensemble(cfg.params, cfg.rule, cfg.n_paths, cfg.master_seed,
                          cfg.parallelism, trajectory_stride)
    payload = report.to_dict()
    if cfg.n_paths == 1:
        payload["path"] = report.paths[0].to_dict()
    rows = [{"key": k, "value": v} for k, v in sorted(report.to_dict().items())
            if not isinstance(v, dict)]
    extra = {}
    buf = io.StringIO()
    write_paths_csv(report.paths, buf)
    extra[".paths.csv"] = buf.getvalue()
    buf = io.StringIO()
    write_histogram_csv(report.ruin_time_histogram, buf)
    extra[".ruin_times.csv"] = buf.getvalue()
    buf = io.StringIO()
    write_histogram_csv(report.final_x_histogram, buf)
    extra[".final_x.csv"] = buf.getvalue()
    if trajectory_stride:
        buf = io.StringIO()
        write_trajectories_csv(report.paths, buf)
        extra[".trajectories.csv"] = buf.getvalue()
    return report, payload, rows, extra


def cmd_approx(cfg: RunConfig, ks=(), peak=False, k_max=10_000, horizon=None, reach=None) -> list[dict]:
    g, d = cfg.params.gamma, cfg.params.delta
    rows = []
    for k in ks:
        if reach is not None:
            row = {"query": "reach", "t": reach, **asymptotics.prob_reach_approx(k, reach, d).to_dict()}
        else:
            row = {"query": "cash_out", **asymptotics.prob_cashout_approx(k, g, d).to_dict()}
        rows.append(row)
    if peak:
        k_star, _ = asymptotics.cashout_peak(g, d, k_max)
        res = asymptotics.prob_cashout_approx(k_star, g, d)
        rows.append({"query": "peak", "k_max": k_max, **res.to_dict()})
    if horizon is not None:
        t, conf = horizon
        k = asymptotics.horizon_for_confidence(t, conf, d)
        rows.append({"query": "horizon", "t": t, "confidence": conf,
                     **asymptotics.prob_reach_approx(k, t, d).to_dict()})
    if not rows:
        raise ValueError("approx needs --k, --peak or --horizon")
    return rows


def cmd_bounds(cfg: RunConfig, survival_ks=()) -> list[dict]:
    reports = bounds.bound_reports(cfg.params.gamma, cfg.params.delta, tuple(survival_ks))
    return [r.to_dict() for r in reports]


def cmd_path(cfg: RunConfig, stride: int = 1):
    rec = run_path(cfg.params, cfg.rule, path_seed(cfg.master_seed, 0), seed_id=0,
                   trajectory_stride=stride)
    buf = io.StringIO()
    write_trajectories_csv([rec], buf)
    return rec, buf.getvalue()


# ---------------------------------------------------------------------------
# argument parsing


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--gamma", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--p-heads", dest="p_heads", type=float)
    p.add_argument("--cash-in-level", dest="cash_in_level", type=float)
    p.add_argument("--n-paths", dest="n_paths", type=int)
    p.add_argument("--max-tosses", dest="max_tosses", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--out")
    p.add_argument("--config")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="cpdo", description="CPDO coin-toss model")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact-table", parents=[common], help="exact P(x_k < 0) table")
    p.add_argument("--k-max", type=int, default=10)
    p = sub.add_parser("cond-table", parents=[common], help="exact conditional-loss table")
    p.add_argument("--k-max", type=int, default=10)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo ensemble")
    p.add_argument("--trajectory-stride", type=int)

    p = sub.add_parser("approx", parents=[common], help="normal approximations")
    p.add_argument("--k", type=int, action="append", default=[])
    p.add_argument("--reach", type=float, metavar="T",
                   help="with --k, report P(x_k >= T) instead of Cash-Out")
    p.add_argument("--peak", action="store_true")
    p.add_argument("--k-max", type=int, default=10_000)
    p.add_argument("--horizon", type=float, nargs=2, metavar=("T", "CONF"))

    p = sub.add_parser("bounds", parents=[common], help="analytic bounds")
    p.add_argument("--survival-k", type=int, action="append", default=[])

    p = sub.add_parser("path", parents=[common], help="dump one trajectory")
    p.add_argument("--stride", type=int, default=1)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(message)s")
    try:
        cfg = RunConfig.from_args(args)
        if args.command == "exact-table":
            rows = cmd_exact_table(cfg, args.k_max)
            _emit(cfg, rows, rows)
        elif args.command == "cond-table":
            rows = cmd_cond_table(cfg, args.k_max)
            _emit(cfg, rows, rows)
        elif args.command == "simulate":
            if args.trajectory_stride is not None and args.trajectory_stride < 1:
                raise ValueError("--trajectory-stride must be positive")
            _, payload, rows, extra = cmd_simulate(cfg, args.trajectory_stride)
            _emit(cfg, payload, rows, extra)
        elif args.command == "approx":
            rows = cmd_approx(cfg, args.k, args.peak, args.k_max, args.horizon, args.reach)
            _emit(cfg, rows, rows)
        elif args.command == "bounds":
            rows = cmd_bounds(cfg, args.survival_k)
            csv_rows = [{**r, "notes": ";".join(r.get("notes", []))} for r in rows]
            _emit(cfg, rows, csv_rows)
        elif args.command == "path":
            rec, trajectory_csv = cmd_path(cfg, args.stride)
            if cfg.fmt == "csv":
                text = trajectory_csv
            else:
                text = dump_json(rec.to_dict())
            if cfg.out is None:
                sys.stdout.write(text)
            else:
                Path(cfg.out).write_text(text)
    except (BudgetExceeded, exact.BudgetExceededError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return 0


def main() -> None:
    sys.exit(run())
