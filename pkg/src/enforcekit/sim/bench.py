"""Per-event dispatch overhead as the number of active modules grows."""

from __future__ import annotations

import csv
import io
import dataclasses
import gc
import random
import statistics
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from ..catalog import ApiCatalog
from ..engine import EnforcementPlan, SessionConfig
from ..model import EnforcementModel
from .scenario import Scenario, scenario_catalog, simulate


@dataclass(frozen=True)
class BenchRow:
    n_modules: int
    mean_us_per_event: float
    overhead_pct: float
    overhead_us: float
    stdev_us: float


def module_pool(primary: Sequence[EnforcementModel], others: Sequence[EnforcementModel],
                n: int) -> list[EnforcementModel]:
    """``n`` models: the scenario's own first, then the rest cycled, renamed on reuse."""
    base = list(primary) + [m for m in others if m.name not in {p.name for p in primary}]
    if not base:
        raise ValueError("no models to draw from")
    out = []
    for i in range(n):
        m = base[i % len(base)]
        copy = i // len(base)
        out.append(m if copy == 0 else dataclasses.replace(m, name=f"{m.name}_{copy}"))
    return out


def _time_runs(s: Scenario, cat: ApiCatalog, plan: Optional[EnforcementPlan], runs: int) -> float:
    """Seconds per event over ``runs`` fresh replays; sessions are built outside the timer."""
    sessions = [plan.session() if plan is not None else None for _ in range(runs)]
    events = 0
    gc_was_on = gc.isenabled()
    gc.disable()  # as timeit does: collections would land in arbitrary rows
    try:
        t0 = time.perf_counter()
        for session in sessions:
            events += len(simulate(s, session, cat).trace_in)
        elapsed = time.perf_counter() - t0
    finally:
        if gc_was_on:
            gc.enable()
    return elapsed / events


def bench_overhead(s: Scenario, pool_primary: Sequence[EnforcementModel],
                   pool_others: Sequence[EnforcementModel] = (),
                   n_modules: Iterable[int] = (0, 1, 5, 10, 20, 40, 60), repetitions: int = 10,
                   *, runs_per_rep: int = 50, catalog: Optional[ApiCatalog] = None,
                   seed: int = 0) -> list[BenchRow]:
    """Mean per-event time for each module count, relative to enforcement off.

    Within each repetition the module counts are measured in a shuffled
    order (seeded) so that slow drift in machine speed spreads evenly.
    """
    cat = scenario_catalog(s, catalog)
    counts = sorted(set(n_modules) | {0})
    plans = {n: (EnforcementPlan(module_pool(pool_primary, pool_others, n), SessionConfig(cat))
                 if n else None) for n in counts}
    for n, plan in plans.items():
        _time_runs(s, cat, plan, 2)  # warm the shared lookup caches
    samples: dict[int, list[float]] = {n: [] for n in counts}
    rng = random.Random(seed)
    for _ in range(repetitions):
        order = list(counts)
        rng.shuffle(order)
        for n in order:
            samples[n].append(_time_runs(s, cat, plans[n], runs_per_rep) * 1e6)
    base = statistics.fmean(samples[0])
    rows = []
    for n in counts:
        mean = statistics.fmean(samples[n])
        sd = statistics.stdev(samples[n]) if len(samples[n]) > 1 else 0.0
        over = 0.0 if n == 0 else mean - base
        rows.append(BenchRow(n, mean, 100.0 * over / base, over, sd))
    return rows


def write_csv(rows: Sequence[BenchRow], path: Union[str, Path, None] = None) -> str:
    """CSV text with the columns n_modules, mean_us_per_event, overhead_pct."""
    lines = [["n_modules", "mean_us_per_event", "overhead_pct"]]
    lines += [[r.n_modules, f"{r.mean_us_per_event:.4f}", f"{r.overhead_pct:.2f}"] for r in rows]
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(lines)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
