"""Seeded Monte Carlo runs of the spatial-sign test over scenario grids.

Replication ``r`` of a cell always samples from ``RngStream(cell.seed, r)``,
and the per-replication outcome is a small integer code, so a report depends
only on the cells and seeds and not on how the work was split across
processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Literal, Optional, Sequence

from .ellipgen import SCENARIOS, RngStream, ScenarioSpec, sample_scenario, scenario
from .ellipgen import trace_r2_closed_form, trace_r4
from .errors import InvalidParameterError, SpatialSignError
from .signcore import EstimationConfig, Mode, ss_test

Format = Literal["csv", "json", "table"]

CSV_COLUMNS = ("scenario", "n", "p", "pattern", "mode", "reps", "seed", "rate", "stderr", "failures")

ACCEPT, REJECT, FAILED = 0, 1, 2

GRID_N = (50, 100)
GRID_P = (200, 400, 1000)
PATTERNS = ("null", "dense", "sparse")


@dataclass(frozen=True)
class SimulationCell:
    scenario: ScenarioSpec
    reps: int = 500
    alpha: float = 0.05
    mode: Mode = "plugin"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise InvalidParameterError(f"reps must be >= 1, got {self.reps}")
        if not 0 < self.alpha < 1:
            raise InvalidParameterError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class CellRecord:
    scenario: str
    n: int
    p: int
    pattern: str
    mode: str
    reps: int
    seed: int
    rejections: int
    failures: int
    rate: float
    stderr: float
    wall_time: float = field(default=0.0, compare=False)


@dataclass
class SimulationReport:
    records: list[CellRecord] = field(default_factory=list)

    @property
    def total_failures(self) -> int:
        return sum(r.failures for r in self.records)


@dataclass(frozen=True)
class ConditionDiagnostics:
    c1_ratio: float
    c2_ratio: float
    c3_ratio: float
    notes: tuple[str, ...] = ()


def replicate(cell: SimulationCell, rep: int, cfg: Optional[EstimationConfig] = None) -> int:
    """Run one replication and return ``REJECT``, ``ACCEPT`` or ``FAILED``.

    Non-convergence of any fixed-point solve counts as a failure.
    """
    cfg = cfg or EstimationConfig(mode=cell.mode)
    try:
        X = sample_scenario(cell.scenario, RngStream(cell.seed, rep))
        out = ss_test(X, cell.alpha, cfg)
    except SpatialSignError:
        return FAILED
    if not out.converged:
        return FAILED
    return REJECT if out.reject else ACCEPT


def _run_block(cell: SimulationCell, start: int, stop: int) -> tuple[list[int], float]:
    t0 = time.perf_counter()
    cfg = EstimationConfig(mode=cell.mode)
    codes = [replicate(cell, r, cfg) for r in range(start, stop)]
    return codes, time.perf_counter() - t0


def _record(cell: SimulationCell, codes: Sequence[int], elapsed: float) -> CellRecord:
    failures = sum(c == FAILED for c in codes)
    rejections = sum(c == REJECT for c in codes)
    valid = len(codes) - failures
    rate = rejections / valid if valid else math.nan
    stderr = math.sqrt(rate * (1 - rate) / valid) if valid else math.nan
    spec = cell.scenario
    return CellRecord(
        scenario=spec.label or spec.family,
        n=spec.n,
        p=spec.p,
        pattern=spec.mu_pattern,
        mode=cell.mode,
        reps=cell.reps,
        seed=cell.seed,
        rejections=rejections,
        failures=failures,
        rate=rate,
        stderr=stderr,
        wall_time=elapsed,
    )


def _blocks(reps: int, parallelism: int) -> list[tuple[int, int]]:
    size = max(1, math.ceil(reps / max(1, 4 * parallelism)))
    return [(s, min(reps, s + size)) for s in range(0, reps, size)]


def run_cell(cell: SimulationCell) -> CellRecord:
    codes, elapsed = _run_block(cell, 0, cell.reps)
    return _record(cell, codes, elapsed)


def run_suite(cells: Sequence[SimulationCell], parallelism: int = 1) -> SimulationReport:
    """Run every cell; replications are farmed out to ``parallelism`` processes.

    The records are identical to a serial run (apart from ``wall_time``,
    which sums the per-block compute time).
    """
    if parallelism < 1:
        raise InvalidParameterError(f"parallelism must be >= 1, got {parallelism}")
    if not cells:
        return SimulationReport()
    if parallelism == 1:
        return SimulationReport([run_cell(c) for c in cells])

    jobs = [(ci, start, stop) for ci, c in enumerate(cells) for start, stop in _blocks(c.reps, parallelism)]
    codes: list[list[int]] = [[] for _ in cells]
    elapsed = [0.0] * len(cells)
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        futures = [pool.submit(_run_block, cells[ci], start, stop) for ci, start, stop in jobs]
        # jobs are in replication order within each cell
        for (ci, _, _), fut in zip(jobs, futures):
            block_codes, t = fut.result()
            codes[ci].extend(block_codes)
            elapsed[ci] += t
    return SimulationReport([_record(c, codes[i], elapsed[i]) for i, c in enumerate(cells)])


def grid_cells(
    reps: int = 500,
    seed: int = 0,
    mode: Mode = "plugin",
    eta: float = 0.03,
    alpha: float = 0.05,
    scenarios: Iterable[str] = SCENARIOS,
    ns: Iterable[int] = GRID_N,
    ps: Iterable[int] = GRID_P,
) -> list[SimulationCell]:
    """Full grid: scenario x n x p x {null, dense, sparse}; cell ``k`` uses seed ``seed + k``."""
    cells = []
    for label in scenarios:
        for n in ns:
            for p in ps:
                for pattern in PATTERNS:
                    spec = scenario(label, n, p, pattern, eta=0.0 if pattern == "null" else eta)
                    cells.append(SimulationCell(spec, reps=reps, alpha=alpha, mode=mode, seed=seed + len(cells)))
    return cells


def condition_diagnostics(p: int, rho: float, n: int) -> ConditionDiagnostics:
    """Finite-sample sizes of the three asymptotic conditions for an AR(1) correlation."""
    if n < 1 or p < 2:
        raise InvalidParameterError(f"need n >= 1 and p >= 2, got n={n}, p={p}")
    tr2 = trace_r2_closed_form(p, rho)
    tr4 = trace_r4(p, rho)
    c1 = tr4 / tr2**2
    c2 = p * p / (n * n * tr2)
    c3 = (tr2 - p) * n / (p * p)
    notes = []
    if c2 > 1:
        notes.append("c2_ratio > 1: p is large relative to n^2")
    if p / n < 5:
        notes.append("p/n < 5: diagonal scale estimates may be inaccurate")
    return ConditionDiagnostics(c1, c2, c3, tuple(notes))


def _fmt_rate(x: float) -> str:
    return "nan" if math.isnan(x) else repr(round(x, 10))


def render_report(report: SimulationReport, fmt: Format = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in report.records:
            w.writerow([r.scenario, r.n, r.p, r.pattern, r.mode, r.reps, r.seed,
                        _fmt_rate(r.rate), _fmt_rate(r.stderr), r.failures])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps({"records": [asdict(r) for r in report.records]}, indent=2) + "\n"
    if fmt == "table":
        return _render_table(report)
    raise InvalidParameterError(f"unknown format {fmt!r}")


def _pct(rate: Optional[float]) -> str:
    if rate is None or math.isnan(rate):
        return "-"
    return f"{100 * rate:.1f}"


def _render_table(report: SimulationReport) -> str:
    """Rows per (scenario, n, p) with Size / Dense / Sparse rejection percentages."""
    groups: dict[tuple[str, int, int], dict[str, float]] = {}
    for r in report.records:
        groups.setdefault((r.scenario, r.n, r.p), {})[r.pattern] = r.rate
    lines = [f"{'n':>5} {'p':>5} {'Size':>7} {'Dense':>7} {'Sparse':>7}"]
    current = None
    for (label, n, p), rates in groups.items():
        if label != current:
            lines.append(f"Scenario {label}")
            current = label
        lines.append(
            f"{n:>5} {p:>5} {_pct(rates.get('null')):>7} {_pct(rates.get('dense')):>7} {_pct(rates.get('sparse')):>7}"
        )
    return "\n".join(lines) + "\n"


def diagnostics_dict(diag: ConditionDiagnostics) -> dict:
    d = asdict(diag)
    d["notes"] = list(diag.notes)
    return d
