"""Command-line experiment runner.

Subcommands: ``simulate-curve``, ``sample-flow``, ``validate``,
``oracle-compare``. Settings come from built-in defaults, then an optional
JSON config file (``--config``), then command-line flags, later sources
winning. Exit codes: 0 success, 1 validation failure, 2 I/O or config error.

Config file schema (all keys optional)::

    {"seed": int, "replicates": int, "depth": int, "eps": float,
     "out": str, "format": "csv" | "json", "threads": int,
     "no_timestamp": bool, "summary": bool, "quick": bool,
     "s": float, "H": float, "grid": int, "n_mc": int, "realizations": int}
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__
from .estimator import estimates_to_csv, simulate_flows, summarize
from .oracle import TruncatedLineSample, box_volume_two_ways
from .rand_dist import RngStream
from .seminal import extend_to_depth, new_curve
from .validation import DEFAULT_SEED, ks_rayleigh, reports_to_json, run_battery

EXIT_OK, EXIT_FAILED, EXIT_IO = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    seed: int = DEFAULT_SEED
    replicates: int = 1000
    depth: int = 20
    eps: float = 1e-4
    out: str = "-"
    format: str = "csv"
    threads: int = 1
    no_timestamp: bool = False
    summary: bool = False
    quick: bool = False
    corrupt_sampler: bool = False
    s: float = 0.5
    H: float = 3.0
    grid: int = 200
    n_mc: int = 10**5
    realizations: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.replicates < 1:
            raise ConfigError(f"replicates must be at least 1, got {self.replicates}")
        if not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.depth < 0:
            raise ConfigError(f"depth must be non-negative, got {self.depth}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if not 0 < self.s <= 1:
            raise ConfigError(f"s must be in (0, 1], got {self.s}")
        if not (self.H > 0 and self.grid > 0 and self.n_mc > 0 and self.realizations > 0):
            raise ConfigError("H, grid, n_mc and realizations must be positive")
        return self


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def load_config(path: str | None, overrides: dict) -> ExperimentConfig:
    values = {}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(data) - set(_FIELDS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(data)
    values.update({k: v for k, v in overrides.items() if v is not None and k in _FIELDS})
    cfg = ExperimentConfig()
    for k, v in values.items():
        typ = type(getattr(cfg, k))
        try:
            setattr(cfg, k, typ(v) if typ is not bool else bool(v))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {k}: {v!r}") from exc
    return cfg.validate()


def _header(cfg: ExperimentConfig, command: str) -> dict:
    h = {"command": command, "version": __version__, "config": asdict(cfg)}
    # where the output goes does not change what it says
    for k in ("corrupt_sampler", "out"):
        del h["config"][k]
    if not cfg.no_timestamp:
        h["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    return h


def _csv_header(h: dict) -> str:
    lines = [f"# command={h['command']}", f"# version={h['version']}"]
    lines += [f"# {k}={v!r}" for k, v in h["config"].items()]
    if "timestamp" in h:
        lines.append(f"# timestamp={h['timestamp']}")
    return "\n".join(lines) + "\n"


def _emit(cfg: ExperimentConfig, text: str) -> None:
    if cfg.out == "-":
        sys.stdout.write(text)
        return
    with open(cfg.out, "w", newline="") as fh:
        fh.write(text)


def _rows_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


def cmd_simulate_curve(cfg: ExperimentConfig) -> int:
    records = []
    ys = np.empty((cfg.replicates, cfg.depth + 1))
    for r in range(cfg.replicates):
        c = extend_to_depth(new_curve(RngStream(cfg.seed, r, ("curve",))), cfg.depth)
        for rec in c.to_records()[: cfg.depth + 1]:
            records.append({"replicate_id": r, **rec})
        ys[r] = c.Y[: cfg.depth + 1]
    summary = None
    if cfg.summary:
        ddof = 1 if cfg.replicates > 1 else 0
        se = ys.std(axis=0, ddof=ddof) / math.sqrt(cfg.replicates)
        summary = [
            {"n": n, "mean_Y": float(ys[:, n].mean()), "se": float(se[n]),
             "expected_Y": 3.0**-n * math.sqrt(math.pi) / 2.0}
            for n in range(cfg.depth + 1)
        ]
    h = _header(cfg, "simulate-curve")
    if cfg.format == "json":
        doc = {"header": h, "vertices": records}
        if summary is not None:
            doc["summary"] = summary
        text = json.dumps(doc, indent=1) + "\n"
    else:
        text = _csv_header(h) + _rows_csv(("replicate_id", "n", "S", "Y", "sigma"), records)
        if summary is not None:
            text += "\n" + _rows_csv(("n", "mean_Y", "se", "expected_Y"), summary)
    _emit(cfg, text)
    return EXIT_OK


def cmd_sample_flow(cfg: ExperimentConfig) -> int:
    est = simulate_flows(cfg.seed, cfg.replicates, cfg.depth, cfg.eps, cfg.threads)
    agg = summarize(est).as_dict()
    h = _header(cfg, "sample-flow")
    if cfg.format == "json":
        doc = {"header": h, "rows": [e.row(i) for i, e in enumerate(est)], "aggregate": agg}
        text = json.dumps(doc, indent=1) + "\n"
    else:
        text = _csv_header(h) + estimates_to_csv(est)
        text += "\n" + _rows_csv(("statistic", "value"), [{"statistic": k, "value": v} for k, v in agg.items()])
    _emit(cfg, text)
    return EXIT_OK


def cmd_validate(cfg: ExperimentConfig) -> int:
    reports = run_battery(cfg.seed, quick=cfg.quick, corrupt=cfg.corrupt_sampler, threads=cfg.threads)
    h = _header(cfg, "validate")
    if cfg.format == "json":
        text = json.dumps({"header": h, "reports": json.loads(reports_to_json(reports))}, indent=1) + "\n"
    else:
        cols = ("name", "statistic", "threshold", "n_samples", "passed", "seed")
        text = _csv_header(h) + _rows_csv(cols, [r.as_dict() for r in reports])
    _emit(cfg, text)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


def cmd_oracle_compare(cfg: ExperimentConfig) -> int:
    root = RngStream(cfg.seed, 0, ("oracle-compare",))
    boxes = []
    for r in range(cfg.realizations):
        bv = box_volume_two_ways(root.child("box", str(r)), cfg.H, cfg.n_mc, cfg.grid)
        boxes.append({"realization": r, **bv.as_dict()})
    empty = TruncatedLineSample(np.zeros(0), np.zeros(0), 1.0, 1.0, "general")
    ev = box_volume_two_ways(root.child("empty"), cfg.H, 1000, 4, sample=empty)
    ks = [
        ks_rayleigh(root.child("ks", src), cfg.s, cfg.replicates, src).as_dict()
        for src in ("envelope", "dynamics")
    ]
    h = _header(cfg, "oracle-compare")
    result = {
        "boxes": boxes,
        "empty": {**ev.as_dict(), "expected": (cfg.H * (1.0 - ev.margin)) ** 2},
        "ks": ks,
    }
    if cfg.format == "json":
        text = json.dumps({"header": h, **result}, indent=1) + "\n"
    else:
        cols = ("realization", "mc", "se", "quad", "quad_error_bound", "n_lines", "H", "margin", "agree")
        rows = boxes + [{"realization": "empty", **{k: result["empty"][k] for k in cols[1:]}}]
        text = _csv_header(h) + _rows_csv(cols, rows)
        text += "\n" + _rows_csv(("name", "statistic", "threshold", "n_samples", "passed"), ks)
    _emit(cfg, text)
    ok = all(b["agree"] for b in boxes) and all(k["passed"] for k in ks)
    return EXIT_OK if ok else EXIT_FAILED


COMMANDS = {
    "simulate-curve": cmd_simulate_curve,
    "sample-flow": cmd_sample_flow,
    "validate": cmd_validate,
    "oracle-compare": cmd_oracle_compare,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=None)
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--seed", type=int)
    common.add_argument("--replicates", type=int)
    common.add_argument("--depth", type=int, help="truncation depth N (last vertex index for curves)")
    common.add_argument("--eps", type=float, help="bracket budget")
    common.add_argument("--out", help="output path, '-' for stdout")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--threads", type=int)
    common.add_argument("--no-timestamp", action="store_const", const=True)

    p = argparse.ArgumentParser(prog="poisson-city", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sc = sub.add_parser("simulate-curve", parents=[common], help="emit seminal curve vertices")
    sc.add_argument("--summary", action="store_const", const=True, help="append per-n mean intercepts")
    sub.add_parser("sample-flow", parents=[common], help="estimate the central flow")
    v = sub.add_parser("validate", parents=[common], help="run the validation battery")
    v.add_argument("--quick", action="store_const", const=True, help="smaller sample sizes")
    v.add_argument("--corrupt-sampler", action="store_const", const=True, help=argparse.SUPPRESS)
    o = sub.add_parser("oracle-compare", parents=[common], help="brute-force oracle comparisons")
    o.add_argument("--H", type=float, dest="H")
    o.add_argument("--grid", type=int)
    o.add_argument("--n-mc", type=int, dest="n_mc")
    o.add_argument("--s", type=float, dest="s")
    o.add_argument("--realizations", type=int)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, vars(args))
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
