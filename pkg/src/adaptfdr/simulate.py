"""Monte Carlo harness for FDR and power under equicorrelated Gaussian
test statistics.

For replication ``r`` of a scenario, ``m + 1`` standard normals are drawn
from a stream seeded by ``mix(master_seed, scenario_key, r)``, then
``Y_i = sqrt(rho) Z_{m+1} + sqrt(1 - rho) Z_i + mu_i`` and
``p_i = 1 - Phi(Y_i)``. All procedures see the same data within a
replication. Per-replication counts are assembled in replication order
before any averaging, so results do not depend on the number of workers.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import special

from . import _kernels as K
from .core import ConfusionCounts, DomainError, PValueVector
from .procedures import PROCEDURES, reject_counts

__all__ = [
    "Scenario",
    "ResultCell",
    "stream_seed",
    "generate_dataset",
    "run_replication",
    "run_experiment",
    "grid_from_config",
    "load_config",
    "write_csv",
    "write_structured",
    "results_to_csv",
    "results_to_structured",
    "curve_rows",
    "format_table",
    "CSV_COLUMNS",
]

DEFAULT_SEED = 20090401
_MASK64 = (1 << 64) - 1
_BLOCK_ELEMENTS = 1 << 21

CSV_COLUMNS = (
    "procedure", "m", "pi0", "rho", "q", "reps",
    "fdr_hat", "fdr_se", "power_hat", "power_se", "rel_power",
)


@dataclass(frozen=True)
class Scenario:
    m: int
    pi0: float
    rho: float = 0.0
    q: float = 0.05
    reps: int = 5000
    master_seed: int = DEFAULT_SEED
    mu_pattern: tuple = (1.0, 2.0, 3.0, 4.0)

    def __post_init__(self):
        object.__setattr__(self, "mu_pattern", tuple(float(x) for x in self.mu_pattern))
        if int(self.m) != self.m or self.m < 0:
            raise DomainError(f"m must be a nonnegative integer, got {self.m!r}")
        if not 0.0 <= self.pi0 <= 1.0:
            raise DomainError(f"pi0 must lie in [0, 1], got {self.pi0!r}")
        if not 0.0 <= self.rho < 1.0:
            raise DomainError(f"rho must lie in [0, 1), got {self.rho!r}")
        if not 0.0 < self.q < 1.0:
            raise DomainError(f"q must lie in (0, 1), got {self.q!r}")
        if self.reps < 1:
            raise DomainError(f"reps must be >= 1, got {self.reps!r}")
        if self.m1 > 0 and not self.mu_pattern:
            raise DomainError("mu_pattern is empty but there are false nulls")

    @property
    def m0(self) -> int:
        return int(math.floor(self.m * self.pi0 + 0.5))

    @property
    def m1(self) -> int:
        return self.m - self.m0

    def shifts(self) -> np.ndarray:
        """Mean shifts: zeros for the ``m0`` nulls first, then ``mu_pattern``
        repeated round-robin over the false nulls."""
        mu = np.zeros(self.m)
        if self.m1:
            pattern = np.asarray(self.mu_pattern)
            mu[self.m0:] = pattern[np.arange(self.m1) % pattern.size]
        return mu

    def key(self) -> int:
        """64-bit digest of the data-generating parameters (not of ``reps``
        or the seed), so longer runs extend shorter ones."""
        text = repr((int(self.m), self.m0, float(self.rho), self.mu_pattern))
        return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


@dataclass
class ResultCell:
    procedure: str
    scenario: Scenario
    fdr_hat: float
    fdr_se: float
    power_hat: float
    power_se: float
    rel_power: float
    rel_power_se: float = field(default=float("nan"))

    def row(self) -> dict:
        s = self.scenario
        return {
            "procedure": self.procedure, "m": s.m, "pi0": s.pi0, "rho": s.rho, "q": s.q,
            "reps": s.reps, "fdr_hat": self.fdr_hat, "fdr_se": self.fdr_se,
            "power_hat": self.power_hat, "power_se": self.power_se, "rel_power": self.rel_power,
        }


# ------------------------------------------------------------------ seeding


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def stream_seed(master_seed: int, scenario_key: int, rep_index: int) -> int:
    x = _splitmix64(master_seed & _MASK64)
    x = _splitmix64(x ^ (scenario_key & _MASK64))
    return _splitmix64(x ^ (rep_index & _MASK64))


def _rng(s: Scenario, rep_index: int, key: Optional[int] = None) -> np.random.Generator:
    seed = stream_seed(s.master_seed, s.key() if key is None else key, rep_index)
    return np.random.Generator(np.random.PCG64(seed))


# ------------------------------------------------------------ data model


def _pvalues(z: np.ndarray, s: Scenario, mu: np.ndarray) -> np.ndarray:
    # z has shape (..., m + 1); the last column is the shared factor
    y = math.sqrt(s.rho) * z[..., -1:] + math.sqrt(1.0 - s.rho) * z[..., :-1] + mu
    # Phi(-y) rather than 1 - Phi(y): no cancellation in the upper tail
    return special.ndtr(-y)


def generate_dataset(s: Scenario, rep_index: int) -> PValueVector:
    if not 0 <= rep_index < s.reps:
        raise DomainError(f"rep_index must lie in [0, {s.reps}), got {rep_index}")
    z = _rng(s, rep_index).standard_normal(s.m + 1)
    truth = np.zeros(s.m, dtype=bool)
    truth[: s.m0] = True
    return PValueVector(_pvalues(z, s, s.shifts()), truth=truth)


def _pvalue_block(s: Scenario, start: int, stop: int) -> np.ndarray:
    """p-values of replications ``[start, stop)`` as rows; identical to
    stacking :func:`generate_dataset` outputs."""
    key = s.key()
    z = np.empty((stop - start, s.m + 1))
    for r in range(stop - start):
        z[r] = _rng(s, start + r, key).standard_normal(s.m + 1)
    return _pvalues(z, s, s.shifts())


def _block_counts(s: Scenario, procs: Sequence[str], start: int, stop: int, lam: float):
    """``(V, S)`` for every replication in ``[start, stop)`` and every
    procedure; shape ``(stop - start, len(procs), 2)``."""
    p = _pvalue_block(s, start, stop)
    n = p.shape[0]
    order = np.argsort(p, axis=1, kind="stable")
    sp = np.ascontiguousarray(np.take_along_axis(p, order, axis=1))
    null_sorted = np.ascontiguousarray((order < s.m0).astype(np.int64))
    out = np.empty((n, len(procs), 2), dtype=np.int64)
    for j, tag in enumerate(procs):
        k = reject_counts(tag, sp, s.q, m0=s.m0, lam=lam)
        v = K.prefix_sum_at(null_sorted, k)
        out[:, j, 0] = v
        out[:, j, 1] = k - v
    return out


def run_replication(s: Scenario, procs: Sequence[str], rep_index: int, lam: float = 0.5) -> dict:
    """Confusion counts for each procedure on replication ``rep_index``."""
    procs = _check_procs(procs)
    if not 0 <= rep_index < s.reps:
        raise DomainError(f"rep_index must lie in [0, {s.reps}), got {rep_index}")
    counts = _block_counts(s, procs, rep_index, rep_index + 1, lam)[0]
    return {
        tag: ConfusionCounts(V=int(v), S=int(sv), R=int(v + sv), m0=s.m0, m1=s.m1)
        for tag, (v, sv) in zip(procs, counts)
    }


def _check_procs(procs) -> list:
    procs = [p.upper() for p in procs]
    for p in procs:
        if p not in PROCEDURES:
            raise DomainError(f"unknown procedure {p!r}; expected one of {PROCEDURES}")
    return procs


# --------------------------------------------------------------- experiment


def _mean_se(x: np.ndarray):
    n = x.size
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return mean, se


def _ratio_se(a: np.ndarray, b: np.ndarray, ratio: float) -> float:
    # delta method for mean(a) / mean(b) on paired replications
    n = a.size
    mb = float(np.mean(b))
    if n < 2 or mb == 0.0 or not math.isfinite(ratio):
        return float("nan")
    return float(np.std(a - ratio * b, ddof=1) / (math.sqrt(n) * mb))


def _summarise(s: Scenario, procs, counts) -> list:
    V = counts[:, :, 0].astype(np.float64)
    S = counts[:, :, 1].astype(np.float64)
    R = V + S
    fdp = V / np.maximum(R, 1.0)
    power = S / s.m1 if s.m1 > 0 else None
    orc = procs.index("ORC")
    cells = []
    for j, tag in enumerate(procs):
        fdr_hat, fdr_se = _mean_se(fdp[:, j])
        if power is None:
            p_hat = p_se = rel = rel_se = float("nan")
        else:
            p_hat, p_se = _mean_se(power[:, j])
            o_hat = float(np.mean(power[:, orc]))
            rel = p_hat / o_hat if o_hat > 0 else float("nan")
            rel_se = _ratio_se(power[:, j], power[:, orc], rel)
        cells.append(ResultCell(tag, s, fdr_hat, fdr_se, p_hat, p_se, rel, rel_se))
    return cells


def _task(args):
    s, procs, start, stop, lam = args
    return _block_counts(s, procs, start, stop, lam)


def _default_workers() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover
        return max(1, os.cpu_count() or 1)


def run_experiment(
    grid: Iterable[Scenario],
    procs: Sequence[str] = PROCEDURES,
    *,
    lam: float = 0.5,
    workers: Optional[int] = None,
    progress=None,
) -> list:
    """Estimate FDR and power for every (scenario, procedure) pair.

    The oracle is always evaluated, since relative power is measured
    against it, but only requested procedures are reported.
    """
    procs = _check_procs(procs)
    internal = procs if "ORC" in procs else procs + ["ORC"]
    grid = list(grid)
    workers = _default_workers() if workers is None else max(1, int(workers))

    tasks, spans = [], []
    for s in grid:
        block = max(1, _BLOCK_ELEMENTS // max(s.m, 1))
        first = len(tasks)
        for start in range(0, s.reps, block):
            tasks.append((s, internal, start, min(start + block, s.reps), lam))
        spans.append((first, len(tasks)))

    if workers == 1:
        blocks = []
        for t in tasks:
            blocks.append(_task(t))
            if progress:
                progress(len(blocks), len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_task, tasks))

    results = []
    for s, (a, b) in zip(grid, spans):
        counts = np.concatenate(blocks[a:b], axis=0)
        cells = _summarise(s, internal, counts)
        results.extend(c for c in cells if c.procedure in procs)
    return results


# ------------------------------------------------------------------ config


def grid_from_config(cfg: dict):
    """``(scenarios, procedures, lam)`` from a parsed config mapping.

    Recognised keys: ``m``, ``pi0``, ``rho`` (scalars or lists), ``q``,
    ``reps``, ``master_seed``, ``mu_pattern``, ``lambda``, ``procedures``.
    """
    if not isinstance(cfg, dict):
        raise DomainError("config must be a mapping")

    def as_list(v):
        return list(v) if isinstance(v, (list, tuple)) else [v]

    unknown = set(cfg) - {"name", "m", "pi0", "rho", "q", "reps", "master_seed", "mu_pattern",
                          "lambda", "procedures", "description"}
    if unknown:
        raise DomainError(f"unknown config keys: {sorted(unknown)}")
    try:
        ms = [int(x) for x in as_list(cfg["m"])]
        pi0s = [float(x) for x in as_list(cfg["pi0"])]
    except KeyError as exc:
        raise DomainError(f"config is missing required key {exc.args[0]!r}") from None
    rhos = [float(x) for x in as_list(cfg.get("rho", 0.0))]
    q = float(cfg.get("q", 0.05))
    reps = int(cfg.get("reps", 5000))
    seed = int(cfg.get("master_seed", DEFAULT_SEED))
    mu = tuple(float(x) for x in as_list(cfg.get("mu_pattern", (1, 2, 3, 4))))
    lam = float(cfg.get("lambda", 0.5))
    if not 0.0 < lam < 1.0:
        raise DomainError(f"lambda must lie in (0, 1), got {lam}")
    procs = _check_procs(as_list(cfg.get("procedures", PROCEDURES)))
    grid = [
        Scenario(m=m, pi0=pi0, rho=rho, q=q, reps=reps, master_seed=seed, mu_pattern=mu)
        for rho in rhos
        for m in ms
        for pi0 in pi0s
    ]
    return grid, procs, lam


def load_config(path) -> dict:
    import yaml

    with open(path) as fh:
        cfg = yaml.safe_load(fh)
    return cfg if cfg is not None else {}


# ------------------------------------------------------------------ output


def _fmt(x) -> str:
    if isinstance(x, float):
        return "NA" if not math.isfinite(x) else repr(x)
    return str(x)


def results_to_csv(results: Sequence[ResultCell]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for cell in results:
        row = cell.row()
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def _json_value(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def results_to_structured(results: Sequence[ResultCell]) -> str:
    rows = [{k: _json_value(v) for k, v in cell.row().items()} for cell in results]
    return json.dumps({"columns": list(CSV_COLUMNS), "results": rows}, indent=2) + "\n"


def write_csv(results, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(results_to_csv(results))


def write_structured(results, path) -> None:
    with open(path, "w") as fh:
        fh.write(results_to_structured(results))


def curve_rows(results: Sequence[ResultCell]) -> list:
    """FDR-versus-pi0 points, one line per (procedure, m, rho)."""
    rows = [
        {"procedure": c.procedure, "m": c.scenario.m, "rho": c.scenario.rho,
         "pi0": c.scenario.pi0, "fdr_hat": c.fdr_hat, "fdr_se": c.fdr_se}
        for c in results
    ]
    order = {p: i for i, p in enumerate(PROCEDURES)}
    rows.sort(key=lambda r: (order[r["procedure"]], r["m"], r["rho"], r["pi0"]))
    return rows


def format_table(results: Sequence[ResultCell], value: str = "fdr_hat") -> str:
    """Procedures by (rho, pi0, m) matrix of one result field."""
    cols = sorted({(c.scenario.rho, c.scenario.pi0, c.scenario.m) for c in results})
    procs = [p for p in PROCEDURES if any(c.procedure == p for c in results)]
    lookup = {(c.procedure, c.scenario.rho, c.scenario.pi0, c.scenario.m): getattr(c, value) for c in results}
    lines = []
    for rho in sorted({c[0] for c in cols}):
        sub = [c for c in cols if c[0] == rho]
        lines.append(f"{value}  rho={rho:g}")
        lines.append("pi0   " + "".join(f"{c[1]:>8.2f}" for c in sub))
        lines.append("m     " + "".join(f"{c[2]:>8d}" for c in sub))
        for p in procs:
            vals = (lookup.get((p,) + c, float("nan")) for c in sub)
            lines.append(f"{p:<6}" + "".join("      NA" if not math.isfinite(v) else f"{v:>8.3f}" for v in vals))
        lines.append("")
    return "\n".join(lines)
