"""Dataset ingestion, synthetic data, the epsilon-sweep experiment and output files."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Dataset, normalize_to_unit_ball
from .errors import ClusteringError, EmptyInput, ParseError
from .kmeans import kmeans, kmeans_fixed_center
from .kmedian import kmedian, kmedian_fixed_center
from .pipeline import PipelineConfig, private_clustering, private_explanations

log = logging.getLogger(__name__)

CSV_COLUMNS = ("epsilon", "rep", "PO", "RO", "mean_PC", "mean_RC", "APE", "AE")

NOTES = (
    "Every (epsilon, rep) row is a fresh private run on the same data; repeating "
    "private runs composes their budgets, so the repetitions serve evaluation only.",
    "AE is reported as mean(RC_i - RO), the same orientation as APE = mean(PC_i - PO).",
)

JSON_SCHEMA = {
    "type": "object",
    "required": ["metadata", "rows"],
    "properties": {
        "metadata": {"type": "object"},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": list(CSV_COLUMNS),
                "properties": {
                    "epsilon": {"type": "number"},
                    "rep": {"type": "integer", "minimum": 0},
                    **{c: {"type": ["number", "null"]} for c in CSV_COLUMNS[2:]},
                    "error": {"type": ["string", "null"]},
                },
            },
        },
    },
}


def ingest_csv(path, id_column: Optional[str] = None) -> tuple[Dataset, list]:
    """Numeric CSV with a header row, normalized into the unit ball.

    Every column other than ``id_column`` must be numeric. Returns the
    dataset and the row ids (the ``id_column`` values, else 1-based row
    numbers). Row numbers in errors count the header as row 1.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInput(f"{path} is empty") from None
        header = [h.strip() for h in header]
        if id_column is not None and id_column not in header:
            raise ParseError(f"id column {id_column!r} not in header", row=1)
        coord_cols = [j for j, h in enumerate(header) if h != id_column]
        if not coord_cols:
            raise ParseError("no coordinate columns", row=1)
        rows, ids = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(f"row {lineno} has {len(rec)} fields, expected {len(header)}", row=lineno)
            vals = []
            for j in coord_cols:
                try:
                    v = float(rec[j])
                except ValueError:
                    raise ParseError(
                        f"row {lineno}, column {header[j]!r}: not a number: {rec[j]!r}",
                        row=lineno, column=header[j],
                    ) from None
                if not math.isfinite(v):
                    raise ParseError(
                        f"row {lineno}, column {header[j]!r}: non-finite value", row=lineno, column=header[j]
                    )
                vals.append(v)
            rows.append(vals)
            ids.append(rec[header.index(id_column)] if id_column is not None else len(ids) + 1)
    if not rows:
        raise EmptyInput(f"{path} has no data rows")
    data, _ = normalize_to_unit_ball(np.array(rows))
    return data, ids


def synthetic_dataset(n: int = 100, d: int = 2, rng: Optional[np.random.Generator] = None) -> Dataset:
    """``n`` points uniform on ``[-1, 1]^d``, normalized into the unit ball."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = rng if rng is not None else np.random.default_rng()
    data, _ = normalize_to_unit_ball(rng.uniform(-1.0, 1.0, (n, d)))
    return data


@dataclass(frozen=True)
class ExperimentConfig:
    k: int
    p: int = 1
    eps_grid: tuple = (0.5, 1.0, 2.0, 4.0)
    reps: int = 25
    sample_size: int = 100
    seed: int = 0
    beta: float = 0.1
    alpha: float = 1.0
    gamma: float = 0.5
    d_prime: Optional[int] = None
    input_path: Optional[str] = None     # None: synthetic data
    n_synthetic: int = 100
    d_synthetic: int = 2
    workers: int = 1

    def __post_init__(self):
        grid = tuple(float(e) for e in self.eps_grid)
        object.__setattr__(self, "eps_grid", grid)
        if not grid:
            raise ValueError("eps_grid must be nonempty")
        if any(e <= 0 for e in grid) or any(a >= b for a, b in zip(grid, grid[1:])):
            raise ValueError("eps_grid must be positive and strictly increasing")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.sample_size < 1:
            raise ValueError("sample_size must be at least 1")


@dataclass
class MetricsRow:
    epsilon: float
    rep: int
    PO: Optional[float]
    RO: Optional[float]
    mean_PC: Optional[float]
    mean_RC: Optional[float]
    APE: Optional[float]
    AE: Optional[float]
    error: Optional[str] = None


@dataclass
class ExperimentResult:
    rows: list
    metadata: dict
    agents: list = field(default_factory=list)   # per (epsilon, rep): PC_i per sampled agent

    @property
    def has_errors(self) -> bool:
        return any(r.error for r in self.rows)


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.input_path:
        return ingest_csv(cfg.input_path)[0]
    return synthetic_dataset(cfg.n_synthetic, cfg.d_synthetic, np.random.default_rng(cfg.seed))


def regular_costs(X: Dataset, k: int, p: int, gamma: float, agents: Sequence[int]):
    """Non-private RO and RC_i on the raw data with the same solvers."""
    if p == 1:
        RO = kmedian(X.points, k).cost
        RC = [kmedian_fixed_center(X.points, k, X.points[i]).cost for i in agents]
    else:
        RO = kmeans(X.points, k, gamma).cost
        RC = [kmeans_fixed_center(X.points, k, X.points[i], gamma).cost for i in agents]
    return RO, RC


def _private_rep(args):
    X, pcfg, agents = args
    res = private_clustering(X, pcfg)
    reqs = [(i, res.X_low.points[i]) for i in agents]
    recs = private_explanations(res.coreset, res.cost_S_eps, reqs, pcfg, X.n)
    return res.cost_S_eps, [r.cost_S_i_eps for r in recs], [r.error for r in recs]


def _rep_seeds(master: int, count: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(master).spawn(count)]


def run_experiment(cfg: ExperimentConfig, X: Optional[Dataset] = None) -> ExperimentResult:
    """RO/RC once, then PO and PC_i for every (epsilon, rep)."""
    X = X if X is not None else load_dataset(cfg)
    if cfg.k > X.n:
        raise ValueError(f"k={cfg.k} exceeds n={X.n}")
    if cfg.sample_size > X.n:
        raise ValueError(f"sample size {cfg.sample_size} exceeds n={X.n}")
    rng = np.random.default_rng(cfg.seed)
    agents = sorted(int(i) for i in rng.choice(X.n, cfg.sample_size, replace=False))
    RO, RC = regular_costs(X, cfg.k, cfg.p, cfg.gamma, agents)
    mean_RC = float(np.mean(RC))
    AE = float(np.mean(np.asarray(RC) - RO))

    tasks = [(e, r) for e in cfg.eps_grid for r in range(cfg.reps)]
    seeds = _rep_seeds(cfg.seed, len(tasks))
    jobs = [
        (X, PipelineConfig(k=cfg.k, p=cfg.p, epsilon=e, beta=cfg.beta, alpha=cfg.alpha,
                           d_prime=cfg.d_prime, gamma=cfg.gamma, seed=s), agents)
        for (e, _), s in zip(tasks, seeds)
    ]
    outcomes = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_private_rep, j) for j in jobs]
            for f in futures:
                try:
                    outcomes.append(f.result())
                except (ClusteringError, ValueError) as exc:
                    outcomes.append(exc)
    else:
        for j in jobs:
            try:
                outcomes.append(_private_rep(j))
            except (ClusteringError, ValueError) as exc:
                outcomes.append(exc)

    rows, per_agent = [], []
    for (e, r), out in zip(tasks, outcomes):
        if isinstance(out, Exception):
            log.warning("epsilon=%g rep=%d failed: %s", e, r, out)
            rows.append(MetricsRow(e, r, None, RO, None, mean_RC, None, AE,
                                   error=f"{type(out).__name__}: {out}"))
            per_agent.append({"epsilon": e, "rep": r, "PC": None})
            continue
        PO, PC, errs = out
        pc = np.array(PC, dtype=float)
        ok = np.isfinite(pc)
        err = None
        if not ok.all():
            err = f"{int((~ok).sum())} of {len(pc)} explanations failed: {next(x for x in errs if x)}"
        if ok.any():
            row = MetricsRow(e, r, PO, RO, float(pc[ok].mean()), mean_RC, float((pc[ok] - PO).mean()), AE, err)
        else:
            row = MetricsRow(e, r, PO, RO, None, mean_RC, None, AE, err)
        rows.append(row)
        per_agent.append({"epsilon": e, "rep": r, "PC": [x if math.isfinite(x) else None for x in PC]})

    meta = {
        "config": {k: v for k, v in asdict(cfg).items() if k != "workers"},
        "n": X.n,
        "d": X.d,
        "agents": agents,
        "RC": RC,
        "notes": list(NOTES),
        "errors": [{"epsilon": r.epsilon, "rep": r.rep, "error": r.error} for r in rows if r.error],
    }
    return ExperimentResult(rows, meta, per_agent)


def _fmt(x) -> str:
    return "%.17g" % x


def _to_json(obj) -> str:
    """JSON text with every float written to 17 significant digits."""
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj)) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_to_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def emit(rows: Sequence[MetricsRow], fmt: str, path, metadata: Optional[dict] = None) -> None:
    """Write rows as CSV (fixed columns) or JSON (metadata plus rows)."""
    if not rows:
        raise ValueError("no rows to emit")
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in rows:
                vals = []
                for c in CSV_COLUMNS:
                    v = getattr(r, c)
                    vals.append("" if v is None else (str(v) if c == "rep" else _fmt(v)))
                w.writerow(vals)
    elif fmt == "json":
        doc = {"metadata": metadata or {}, "rows": [asdict(r) for r in rows]}
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_to_json(doc))
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def read_csv_rows(path) -> list[MetricsRow]:
    """Parse a CSV written by ``emit`` back into rows."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            vals = {c: (None if rec[c] == "" else float(rec[c])) for c in CSV_COLUMNS}
            vals["rep"] = int(rec["rep"])
            out.append(MetricsRow(**vals))
    return out
