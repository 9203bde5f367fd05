"""Run a directory of scenarios, each against the models it names."""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from ..catalog import ApiCatalog, bundled_path
from ..model import EnforceKitError, EnforcementModel
from ..serialization import load_models
from .scenario import Scenario, SimOutcome, Verdict, load_scenario, run_scenario

PathLike = Union[str, Path]


class MissingFixture(EnforceKitError, FileNotFoundError):
    pass


@dataclass
class CaseResult:
    name: str
    app: str
    row: Optional[int]
    expected: Optional[str]
    outcome: SimOutcome

    @property
    def verdict(self) -> Verdict:
        return self.outcome.verdict

    @property
    def as_expected(self) -> bool:
        return self.expected is None or self.expected == self.verdict.value


@dataclass
class CorpusReport:
    cases: list[CaseResult] = field(default_factory=list)

    @property
    def counts(self) -> Counter:
        return Counter(c.verdict.value for c in self.cases)

    def tally(self) -> tuple[int, int]:
        c = self.counts
        return c[Verdict.HEALED.value], c[Verdict.NO_VIOLATION.value]

    @property
    def mismatches(self) -> list[CaseResult]:
        return [c for c in self.cases if not c.as_expected]

    def to_dict(self) -> dict:
        return {
            "counts": dict(sorted(self.counts.items())),
            "cases": [{"row": c.row, "name": c.name, "app": c.app, "expected": c.expected,
                       "verdict": c.verdict.value, "exceptions": len(c.outcome.exceptions),
                       "leaks": len(c.outcome.leaks),
                       "inserted": c.outcome.report.inserted if c.outcome.report else 0,
                       "suppressed": c.outcome.report.suppressed if c.outcome.report else 0}
                      for c in self.cases],
        }

    def to_text(self) -> str:
        lines = [f"{'row':>3}  {'case':<34} {'verdict':<18} {'expected':<12} leaks exc"]
        for c in self.cases:
            mark = "" if c.as_expected else "  <-- mismatch"
            lines.append(f"{c.row if c.row is not None else '-':>3}  {c.name:<34} "
                         f"{c.verdict.value:<18} {c.expected or '-':<12} "
                         f"{len(c.outcome.leaks):>5} {len(c.outcome.exceptions):>3}{mark}")
        healed, clean = self.tally()
        lines.append(f"total {len(self.cases)}: {healed} Healed, {clean} NoViolation, "
                     f"{len(self.cases) - healed - clean} other")
        return "\n".join(lines)


def load_corpus(corpus_dir: Optional[PathLike] = None) -> list[Scenario]:
    d = Path(corpus_dir) if corpus_dir is not None else bundled_path("corpus")
    if not d.is_dir():
        raise MissingFixture(f"corpus directory {d} does not exist")
    files = sorted(d.glob("*.json"))
    if not files:
        raise MissingFixture(f"corpus directory {d} has no scenarios")
    return [load_scenario(p) for p in files]


def models_by_name(models_dir: Optional[PathLike] = None) -> dict[str, EnforcementModel]:
    d = Path(models_dir) if models_dir is not None else bundled_path("models")
    if not d.is_dir():
        raise MissingFixture(f"models directory {d} does not exist")
    return {m.name: m for m in load_models(d)}


def run_corpus(corpus_dir: Optional[PathLike] = None, models_dir: Optional[PathLike] = None, *,
               enforcement: bool = True, catalog: Optional[ApiCatalog] = None,
               workers: int = 1) -> CorpusReport:
    """Run every scenario with the models it lists (bundled fixtures by default)."""
    scenarios = load_corpus(corpus_dir)
    models = models_by_name(models_dir)
    jobs = []
    for s in scenarios:
        missing = [n for n in s.models if n not in models]
        if missing:
            raise MissingFixture(f"scenario {s.name} needs models {missing}")
        jobs.append((s, [models[n] for n in s.models]))

    def one(job) -> CaseResult:
        s, ms = job
        out = run_scenario(s, ms, enforcement, catalog=catalog)
        return CaseResult(s.name, s.app, s.row, s.expected if enforcement else None, out)

    if workers > 1:
        # sessions share nothing, so scenarios are independent
        with ThreadPoolExecutor(workers) as pool:
            cases = list(pool.map(one, jobs))
    else:
        cases = [one(j) for j in jobs]
    return CorpusReport(cases)
