"""Command-line interface.

    adaptfdr adjust pvals.csv --procedure MS --q 0.05
    adaptfdr simulate --preset table1 --out results.csv
    adaptfdr constants --family ms --m 5 --q 0.05
    adaptfdr exact-fdr --family ms --m 2 --m0 2 --q 0.05

Exit codes: 0 success, 2 input parse error, 3 domain error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .core import DomainError, InvalidPValue, PValueVector, SizeGuard, ToleranceFailure, sort_pvalues
from .exactref import ExactFdrSpec, exact_fdr_stepdown
from .procedures import (
    PROCEDURES,
    apply_procedure,
    bh_constants,
    check_theorem1_condition,
    ms_constants,
    prds_constants,
    theorem1_bound,
)
from . import simulate as sim

EXIT_OK, EXIT_PARSE, EXIT_DOMAIN, EXIT_IO = 0, 2, 3, 4

PRESETS = ("table1", "figure1", "figure2", "smoke")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


# ------------------------------------------------------------------- input


def parse_pvalue_text(text: str):
    """Labels and p-values from CSV-with-header or one-value-per-line text.

    A header is recognised when the first non-blank line is not a number;
    it must contain a ``p`` column and may contain an ``id`` column.
    """
    lines = text.splitlines()
    first = next((i for i, ln in enumerate(lines) if ln.strip()), None)
    if first is None:
        return [], np.empty(0)

    def number(s, lineno):
        try:
            v = float(s)
        except ValueError:
            raise CliError(f"line {lineno}: cannot parse {s.strip()!r} as a p-value", EXIT_PARSE) from None
        if not (math.isfinite(v) and 0.0 <= v <= 1.0):
            raise CliError(f"line {lineno}: p-value {s.strip()} is not in [0, 1]", EXIT_PARSE)
        return v

    labels, values = [], []
    try:
        float(lines[first].split(",")[0])
        has_header = False
    except ValueError:
        has_header = True

    if not has_header:
        for lineno, ln in enumerate(lines, start=1):
            if ln.strip():
                values.append(number(ln.strip(), lineno))
                labels.append(str(len(labels)))
        return labels, np.array(values)

    reader = csv.reader(lines[first:])
    header = [h.strip().lower() for h in next(reader)]
    if "p" not in header:
        raise CliError(f"line {first + 1}: header has no 'p' column", EXIT_PARSE)
    p_col = header.index("p")
    id_col = header.index("id") if "id" in header else None
    for offset, row in enumerate(reader, start=first + 2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) <= max(p_col, id_col or 0):
            raise CliError(f"line {offset}: expected {len(header)} fields, got {len(row)}", EXIT_PARSE)
        values.append(number(row[p_col], offset))
        labels.append(row[id_col].strip() if id_col is not None else str(len(labels)))
    return labels, np.array(values)


def _read_text(path):
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_IO) from None


def _write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror}", EXIT_IO) from None


def _num(x):
    return repr(float(x))


# ---------------------------------------------------------------- commands


def cmd_adjust(args) -> int:
    labels, values = parse_pvalue_text(_read_text(args.input))
    tag = args.procedure.upper()
    if tag == "ORC" and args.m0 is None:
        raise CliError("procedure ORC needs --m0", EXIT_DOMAIN)
    try:
        pv = PValueVector(values)
        rs = apply_procedure(tag, pv, args.q, lam=args.lam, m0=args.m0)
    except (DomainError, InvalidPValue) as exc:
        raise CliError(str(exc), EXIT_DOMAIN) from None

    order = sort_pvalues(pv)
    rank = np.empty(pv.m, dtype=np.int64)
    rank[order.rank_to_id] = np.arange(1, pv.m + 1)
    alphas = rs.alphas if rs.alphas is not None else np.full(pv.m, np.nan)
    rejected = rs.mask(pv.m)
    rows = [
        {"id": labels[i], "p": float(values[i]), "rejected": int(rejected[i]),
         "rank": int(rank[i]), "threshold_used": float(alphas[rank[i] - 1])}
        for i in range(pv.m)
    ]
    family = {"BH": "BH", "ORC": "BH", "TS": "BH", "STS": "BH", "MS": "MS", "PRDS": "PRDS"}[tag]
    summary = {"procedure": tag, "m": pv.m, "k": rs.k, "q": args.q, "constants_family": family,
               "threshold": rs.threshold}

    if args.format == "structured":
        out = json.dumps({"summary": summary, "hypotheses": rows}, indent=2) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "p", "rejected", "rank", "threshold_used"])
        for r in rows:
            w.writerow([r["id"], _num(r["p"]), r["rejected"], r["rank"], _num(r["threshold_used"])])
        out = buf.getvalue()

    summary_line = (f"procedure={tag} m={pv.m} k={rs.k} q={args.q} "
                    f"constants={family} threshold={rs.threshold!r}")
    if args.out:
        _write_text(args.out, out)
        print(summary_line)
    else:
        sys.stdout.write(out)
        print(summary_line, file=sys.stderr)
    return EXIT_OK


def _load_sim_config(args) -> dict:
    import yaml

    if args.preset:
        if args.preset not in PRESETS:
            raise CliError(f"unknown preset {args.preset!r}; choose from {PRESETS}", EXIT_PARSE)
        text = resources.files("adaptfdr").joinpath("presets", f"{args.preset}.yaml").read_text()
    elif args.config:
        text = _read_text(args.config)
    else:
        raise CliError("simulate needs --config or --preset", EXIT_PARSE)
    try:
        cfg = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise CliError(f"config parse error: {exc}", EXIT_PARSE) from None
    if not isinstance(cfg, dict):
        raise CliError("config must be a key/value mapping", EXIT_PARSE)
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    if args.reps is not None:
        cfg["reps"] = args.reps
    return cfg


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def cmd_simulate(args) -> int:
    cfg = _load_sim_config(args)
    try:
        grid, procs, lam = sim.grid_from_config(cfg)
    except (DomainError, TypeError, ValueError) as exc:
        raise CliError(f"invalid config: {exc}", EXIT_PARSE) from None

    results = sim.run_experiment(grid, procs, lam=lam, workers=args.workers)

    if args.out:
        out = Path(args.out)
        csv_text = sim.results_to_csv(results)
        json_text = sim.results_to_structured(results)
        if args.format == "structured":
            _write_text(out, json_text)
            _write_text(_sibling(out, ".csv"), csv_text)
        else:
            _write_text(out, csv_text)
            _write_text(_sibling(out, ".json"), json_text)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["procedure", "m", "rho", "pi0", "fdr_hat", "fdr_se"])
        for r in sim.curve_rows(results):
            w.writerow([r["procedure"], r["m"], r["rho"], r["pi0"], sim._fmt(r["fdr_hat"]), sim._fmt(r["fdr_se"])])
        _write_text(_sibling(out, ".curves.csv"), buf.getvalue())

    print(sim.format_table(results, "fdr_hat"))
    print(sim.format_table(results, "rel_power"))
    return EXIT_OK


def _constants(family, m, q, beta):
    family = family.lower()
    if family == "ms":
        return ms_constants(m, q, 1.0 if beta is None else beta)
    if family == "bh":
        return bh_constants(m, q)
    if family == "prds":
        return prds_constants(m, q)
    raise DomainError(f"unknown family {family!r}; expected ms, bh or prds")


def cmd_constants(args) -> int:
    try:
        if args.m < 1:
            raise DomainError(f"m must be >= 1, got {args.m}")
        c = _constants(args.family, args.m, args.q, args.beta)
    except DomainError as exc:
        raise CliError(str(exc), EXIT_DOMAIN) from None
    bound = theorem1_bound(c.m, args.q)
    odds = c.alphas / (1.0 - c.alphas)
    holds = odds <= bound * (1.0 + 1e-12)
    overall = check_theorem1_condition(c, args.q)
    if args.format == "structured":
        rows = [{"i": i + 1, "alpha": float(a), "odds": float(o), "bound": float(b), "holds": bool(h)}
                for i, (a, o, b, h) in enumerate(zip(c.alphas, odds, bound, holds))]
        print(json.dumps({"family": c.family, "m": c.m, "q": args.q, "beta": c.beta,
                          "condition_holds": overall, "rows": rows}, indent=2))
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["i", "alpha", "odds", "bound", "holds"])
        for i, (a, o, b, h) in enumerate(zip(c.alphas, odds, bound, holds)):
            w.writerow([i + 1, _num(a), _num(o), _num(b), int(h)])
        print(f"# family={c.family} m={c.m} q={args.q} beta={c.beta} condition_holds={overall}", file=sys.stderr)
    return EXIT_OK


def cmd_exact_fdr(args) -> int:
    try:
        c = _constants(args.family, args.m, args.q, args.beta)
        spec = ExactFdrSpec(c, args.m0, alt_mu=args.mu)
        value = exact_fdr_stepdown(spec)
    except (DomainError, SizeGuard) as exc:
        raise CliError(str(exc), EXIT_DOMAIN) from None
    except ToleranceFailure as exc:
        raise CliError(str(exc), EXIT_DOMAIN) from None
    if args.format == "structured":
        print(json.dumps({"family": c.family, "m": c.m, "m0": args.m0, "q": args.q,
                          "mu": args.mu, "fdr": value}))
    else:
        print(f"{value!r}")
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptfdr", description="Adaptive step-down FDR procedures.")
    sub = parser.add_subparsers(dest="command", required=True)

    def fmt(p):
        p.add_argument("--format", choices=("csv", "structured"), default="csv")

    p = sub.add_parser("adjust", help="apply a procedure to a file of p-values")
    p.add_argument("input", help="CSV with a 'p' column, or one p-value per line ('-' for stdin)")
    p.add_argument("--procedure", default="MS", type=str.upper, choices=PROCEDURES)
    p.add_argument("--q", type=float, default=0.05)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--m0", type=int)
    p.add_argument("--out")
    fmt(p)
    p.set_defaults(func=cmd_adjust)

    p = sub.add_parser("simulate", help="run a simulation grid")
    p.add_argument("--config")
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--workers", type=int)
    fmt(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("constants", help="print a critical-constant schedule")
    p.add_argument("--family", default="ms", type=str.lower, choices=("ms", "bh", "prds"))
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--q", type=float, default=0.05)
    p.add_argument("--beta", type=float)
    fmt(p)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("exact-fdr", help="exact step-down FDR for m <= 3 under independence")
    p.add_argument("--family", default="ms", type=str.lower, choices=("ms", "bh", "prds"))
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--m0", type=int)
    p.add_argument("--q", type=float, default=0.05)
    p.add_argument("--beta", type=float)
    p.add_argument("--mu", type=float, help="Gaussian shift of false nulls (uniform when omitted)")
    fmt(p)
    p.set_defaults(func=cmd_exact_fdr)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "m0", None) is None and args.command == "exact-fdr":
        args.m0 = args.m
    try:
        return args.func(args)
    except CliError as exc:
        print(f"adaptfdr: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
