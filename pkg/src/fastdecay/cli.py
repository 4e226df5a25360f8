"""Command-line entry point: build, verify, sample, report.

Exit codes are the machine contract: 0 all checks pass, 1 a check failed,
2 bad input (parameters, I/O, schema).  Output files default to the
directory named by ``FASTDECAY_OUT`` (or the working directory).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .assembly import SchemaError, Timeline, build_from_args, load_timeline, save_timeline, timeline_eval
from .planarlemma import ParameterDomainError
from .verifier import SUITES, SampleCounts, Tolerances, fmt, run_suite, write_decay_csv

OUT_ENV = "FASTDECAY_OUT"
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

KIND_ALIASES = {
    "harmonic": "Harmonic",
    "eigen-half": "EigenHalf",
    "eigen-full": "EigenFull",
    "plis-miller": "PlisMiller",
    "gaussian": "Gaussian",
    "parabolic": "Parabolic",
}
KIND_PARAMS = {
    "Harmonic": ("n0", "N", "mode"),
    "EigenHalf": ("mu", "n0", "N", "mode"),
    "EigenFull": ("mu", "n0", "N", "mode", "t1"),
    "PlisMiller": ("alpha", "n0", "N"),
    "Gaussian": ("n0", "N"),
    "Parabolic": ("N",),
}


class InputError(Exception):
    """Anything that should end the run with exit code 2."""


@dataclass
class RunConfig:
    kind: str = "Harmonic"
    n0: int = 12
    N: int = 3
    mu: float = 1.0
    alpha: float = 1.0 / 3.0
    mode: str = "strict"
    t1: float = 0.01
    seed: int = 0
    suites: list = field(default_factory=lambda: ["all"])
    samples: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    out: str | None = None

    def __post_init__(self):
        self.kind = KIND_ALIASES.get(self.kind, self.kind)
        if self.kind not in KIND_PARAMS:
            raise InputError(f"unknown kind {self.kind!r}; choose from {sorted(KIND_ALIASES)}")
        if self.mode not in ("strict", "flexible"):
            raise InputError("mode must be 'strict' or 'flexible'")
        bad = set(self.suites) - set(SUITES) - {"all"}
        if bad:
            raise InputError(f"unknown suites {sorted(bad)}")
        try:
            Tolerances.from_dict(self.tolerances)
            SampleCounts.from_dict(self.samples)
        except (TypeError, ValueError) as exc:
            raise InputError(str(exc)) from exc

    def build_args(self) -> dict:
        return {name: getattr(self, name) for name in KIND_PARAMS[self.kind]}

    @classmethod
    def load(cls, path: str | None, **overrides) -> "RunConfig":
        data = {}
        if path:
            try:
                with open(path) as fh:
                    data = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot read config {path}: {exc}") from exc
            if not isinstance(data, dict):
                raise InputError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InputError(f"unknown config keys {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**data)
        except TypeError as exc:
            raise InputError(str(exc)) from exc


def out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "."))


def _out_path(explicit: str | None, cfg_out: str | None, default_name: str) -> Path:
    if explicit:
        return Path(explicit)
    if cfg_out:
        return Path(cfg_out)
    return out_dir() / default_name


def parse_tolerances(spec: str | None) -> dict:
    """``key=value,key=value`` or a path to a JSON object."""
    if not spec:
        return {}
    if os.path.exists(spec):
        try:
            with open(spec) as fh:
                return dict(json.load(fh))
        except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
            raise InputError(f"cannot read tolerances {spec}: {exc}") from exc
    out = {}
    for item in spec.split(","):
        key, sep, val = item.partition("=")
        if not sep:
            raise InputError(f"tolerance override {item!r} is not key=value")
        try:
            out[key.strip()] = float(val)
        except ValueError as exc:
            raise InputError(f"tolerance {key!r} is not a number") from exc
    return out


def _load(path: str) -> Timeline:
    try:
        return load_timeline(path)
    except OSError as exc:
        raise InputError(f"cannot read timeline {path}: {exc}") from exc
    except (SchemaError, ParameterDomainError) as exc:
        raise InputError(f"invalid timeline {path}: {exc}") from exc


def timeline_lines(T: Timeline) -> list[str]:
    lines = [f"{T.kind}: {len(T.block_times) - 1} blocks, {len(T.placements)} segments, "
             f"t in [{T.t_begin:.6g}, {T.t_end:.6g}], mode={T.mode}"]
    for n, (t, k, c) in enumerate(zip(T.block_times, T.wavenumbers, T.amplitudes), start=1):
        lines.append(f"  n={n:3d} t={t:.10g} k={k:.10g} log c={c.logmag:.12g}")
    return lines


# ---------------------------------------------------------------------------
# Subcommands


def cmd_build(args) -> int:
    cfg = RunConfig.load(args.config, kind=args.kind, n0=args.n0, N=args.N, mu=args.mu, alpha=args.alpha,
                         mode=args.mode)
    try:
        T = build_from_args(cfg.kind, cfg.build_args())
    except ParameterDomainError as exc:
        raise InputError(f"parameter domain violation: {exc}") from exc
    path = _out_path(args.out, cfg.out, f"{cfg.kind.lower()}.json")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_timeline(T, path)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc
    print("\n".join(timeline_lines(T)))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = RunConfig.load(args.config, seed=args.seed,
                         suites=args.suite.split(",") if args.suite else None)
    tol_over = {**cfg.tolerances, **parse_tolerances(args.tolerances)}
    try:
        tol = Tolerances.from_dict(tol_over)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    samples = SampleCounts.from_dict(cfg.samples)
    T = _load(args.timeline)
    resolved = {**asdict(cfg), "tolerances": tol.to_dict(), "samples": asdict(samples),
                "timeline_file": str(args.timeline)}
    report = run_suite(T, cfg.suites, cfg.seed, tol, samples, args.workers, resolved)
    path = _out_path(args.out, None, "report.json")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(report.to_json(), fh, indent=1)
        if args.decay_csv and report.decay_table:
            write_decay_csv(report.decay_table, args.decay_csv)
    except OSError as exc:
        raise InputError(f"cannot write report: {exc}") from exc
    print("\n".join(report.summary_lines()))
    print(f"wrote {path}")
    return EXIT_OK if report.passed else EXIT_FAIL


def _signed_cols(name: str, vals: np.ndarray, log_scale: np.ndarray):
    """Columns for a field stored as ``vals * exp(log_scale)``."""
    if np.iscomplexobj(vals):
        mag = np.abs(vals)
        with np.errstate(divide="ignore"):
            return {f"{name}_logmag": log_scale + np.log(mag), f"{name}_phase": np.angle(vals)}
    with np.errstate(divide="ignore"):
        return {f"{name}_sign": np.sign(vals).astype(int), f"{name}_logmag": log_scale + np.log(np.abs(vals))}


FIELD_QUANTITIES = ("u", "ut", "ux", "uy")


def sample_table(T: Timeline, x, y, t, quantities) -> dict:
    b = timeline_eval(T, x, y, t)
    cols = {"x": x, "y": y, "t": t}
    for q in quantities:
        if q in FIELD_QUANTITIES:
            cols.update(_signed_cols(q, getattr(b, q), b.log_scale))
        elif q == "A":
            if not hasattr(b, "A"):
                raise InputError("quantity A is not defined for parabolic timelines")
            for j, name in enumerate(("a11", "a12", "a22")):
                cols[name] = b.A[j]
        elif q == "B":
            if not hasattr(b, "B1"):
                raise InputError("quantity B is only defined for parabolic timelines")
            cols["B1_abs"], cols["B2_abs"] = np.abs(b.B1), np.abs(b.B2)
        else:
            raise InputError(f"unknown quantity {q!r}")
    return cols


def write_table(cols: dict, path) -> None:
    names = list(cols)
    n = len(next(iter(cols.values())))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for i in range(n):
            row = []
            for name in names:
                v = cols[name][i]
                row.append(str(int(v)) if name.endswith("_sign") else
                           repr(float(v)) if name.endswith("_logmag") else fmt(v))
            w.writerow(row)


def cmd_sample(args) -> int:
    T = _load(args.timeline)
    path = _out_path(args.out, None, "samples.csv")
    try:
        if args.t_line:
            t0, t1, n = float(args.t_line[0]), float(args.t_line[1]), int(args.t_line[2])
            ts = np.linspace(t0, t1, n)
            if args.quantities == ["logsup"]:
                cols = {"t": ts, "logmag_sup": np.array([T.log_sup_at(t) for t in ts])}
            else:
                x = np.full(n, args.point[0])
                y = np.full(n, args.point[1])
                cols = sample_table(T, x, y, ts, args.quantities)
        else:
            nx, ny = args.grid
            g = np.linspace(0.0, 2 * np.pi, nx, endpoint=False)
            h = np.linspace(0.0, 2 * np.pi, ny, endpoint=False)
            X, Y = np.meshgrid(g, h, indexing="ij")
            cols = sample_table(T, X.ravel(), Y.ravel(), np.full(X.size, args.t), args.quantities)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_table(cols, path)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    print(f"wrote {path} ({len(next(iter(cols.values())))} rows, columns: {', '.join(cols)})")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        with open(args.report) as fh:
            data = json.load(fh)
        checks = data["checks"]
        passed = bool(data["passed"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"cannot read report {args.report}: {exc}") from exc
    tl = data.get("timeline", {})
    print(f"report for {tl.get('kind')} (seed {data.get('seed')})")
    for name, c in checks.items():
        print(f"{'PASS' if c.get('passed') else 'FAIL'} {name}")
    for name, why in data.get("skipped", {}).items():
        print(f"SKIP {name}: {why}")
    if args.csv:
        try:
            write_decay_csv(data.get("decay_table", []), args.csv)
        except OSError as exc:
            raise InputError(f"cannot write {args.csv}: {exc}") from exc
    return EXIT_OK if passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fastdecay", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build a timeline and write it as JSON")
    b.add_argument("--config", help="JSON run config; every field has a default")
    b.add_argument("--kind", help=f"one of {', '.join(KIND_ALIASES)}")
    b.add_argument("--n0", type=int)
    b.add_argument("--N", type=int)
    b.add_argument("--mu", type=float)
    b.add_argument("--alpha", type=float)
    b.add_argument("--mode", choices=("strict", "flexible"))
    b.add_argument("--out", help=f"timeline file (default ${OUT_ENV}/<kind>.json)")
    b.set_defaults(func=cmd_build)

    v = sub.add_parser("verify", help="run verifier suites on a timeline file")
    v.add_argument("timeline")
    v.add_argument("--config")
    v.add_argument("--suite", help=f"comma list from {', '.join(SUITES)} or 'all'")
    v.add_argument("--seed", type=int)
    v.add_argument("--tolerances", help="key=value,... or a JSON file of overrides")
    v.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    v.add_argument("--out", help=f"report file (default ${OUT_ENV}/report.json)")
    v.add_argument("--decay-csv", help="also write the (t, logmag sup) decay table")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sample", help="sample fields to CSV")
    s.add_argument("timeline")
    s.add_argument("--grid", type=int, nargs=2, metavar=("NX", "NY"), default=(64, 64))
    s.add_argument("--t", type=float, default=0.0, help="time of the grid slice")
    s.add_argument("--t-line", nargs=3, metavar=("T0", "T1", "N"), help="sample along t instead of a grid")
    s.add_argument("--point", type=float, nargs=2, metavar=("X", "Y"), default=(0.0, 0.0))
    s.add_argument("--quantities", type=lambda v: v.split(","), default=["u", "A"],
                   help="comma list of u, ut, ux, uy, A, B, or logsup (t-line only)")
    s.add_argument("--out", help=f"CSV file (default ${OUT_ENV}/samples.csv)")
    s.set_defaults(func=cmd_sample)

    r = sub.add_parser("report", help="summarise a saved report")
    r.add_argument("report")
    r.add_argument("--csv", help="write the decay table as CSV")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
