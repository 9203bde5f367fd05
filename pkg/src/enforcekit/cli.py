"""``enforcekit`` command line: validate, enforce, gen, run, corpus, bench.

Exit codes: 0 success, 1 domain failure (validation errors, verdict
mismatch), 2 input error (unreadable or malformed files, bad flags).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import codegen
from .catalog import ApiCatalog, bundled_path, load_catalog
from .engine import SessionConfig, enforce
from .model import EnforceKitError, EnforcementModel
from .serialization import dumps_trace, load_model, loads_trace
from .validation import validate_model

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

#: short names accepted wherever a bundled file may be named
MODEL_ALIASES = {"camera_policy1": "CameraReleaseOnPause", "fig1": "OpsBuffer"}
CATALOG_ALIASES = {"android": "catalog.android.json", "fig1": "catalog.fig1.json"}


class InputError(EnforceKitError, ValueError):
    """Bad command-line input: a missing path or flag."""


@dataclass
class CliConfig:
    subcommand: str
    models: list[str] = field(default_factory=list)
    catalogs: list[str] = field(default_factory=list)
    trace: Optional[str] = None
    scenario: Optional[str] = None
    corpus: Optional[str] = None
    models_dir: Optional[str] = None
    out: Optional[str] = None
    profile: str = "xposed-java"
    enforcement: bool = True
    n_modules: list[int] = field(default_factory=lambda: [0, 1, 5, 10, 20, 40, 60])
    repetitions: int = 10
    runs: int = 50
    expect: Optional[tuple[int, int]] = None
    workers: int = 1
    seed: int = 0
    json: bool = False

    _REQUIRED = {"validate": ("models",), "enforce": ("trace",), "gen": ("models",),
                 "run": ("scenario",), "bench": ("scenario",)}

    def check(self) -> None:
        for name in self._REQUIRED.get(self.subcommand, ()):
            if not getattr(self, name):
                raise InputError(f"{self.subcommand} needs --{name.rstrip('s')}")


# --- resolution of names to files ---------------------------------------------

def resolve_model(ref: str) -> Path:
    p = Path(ref)
    if p.exists():
        return p
    name = MODEL_ALIASES.get(p.stem, p.stem)
    for candidate in (bundled_path("models", f"{name}.json"), bundled_path("fig1", f"{name}.json")):
        if candidate.exists():
            return candidate
    raise InputError(f"no model file or bundled model named {ref!r}")


def resolve_catalog(refs: Sequence[str]) -> ApiCatalog:
    if not refs:
        return load_catalog()
    paths = []
    for ref in refs:
        p = Path(ref)
        if not p.exists() and ref in CATALOG_ALIASES:
            p = bundled_path(CATALOG_ALIASES[ref])
        if not p.exists():
            raise InputError(f"no catalog file {ref!r}")
        paths.append(p)
    return load_catalog(paths)


def resolve_scenario(ref: str):
    from .sim import load_scenario

    p = Path(ref)
    if p.exists():
        return load_scenario(p)
    files = sorted(bundled_path("scenarios").glob("*.json")) + sorted(bundled_path("corpus").glob("*.json"))
    exact = [f for f in files if f.stem == ref or f.stem.split("_", 1)[-1] == ref]
    hits = exact or [f for f in files if f.stem.startswith(ref) or f.stem.split("_", 1)[-1].startswith(ref)]
    if len(hits) != 1:
        known = ", ".join(f.stem for f in files)
        what = "ambiguous" if hits else "unknown"
        raise InputError(f"{what} scenario {ref!r}; bundled: {known}")
    return load_scenario(hits[0])


def _load_models(cfg: CliConfig) -> list[EnforcementModel]:
    return [load_model(resolve_model(r)) for r in cfg.models]


def _emit(cfg: CliConfig, payload: dict, text: str) -> None:
    if cfg.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    elif text:
        print(text)


# --- subcommands ---------------------------------------------------------------

def cmd_validate(cfg: CliConfig) -> int:
    cat = resolve_catalog(cfg.catalogs)
    results, lines, failed = [], [], False
    for ref in cfg.models:
        m = load_model(resolve_model(ref))
        rep = validate_model(m, cat)
        failed |= not rep.ok
        results.append({"model": m.name, "path": str(resolve_model(ref)), **rep.to_dict()})
        lines.append(f"{m.name}: {'ok' if rep.ok else 'INVALID'} "
                     f"({len(rep.errors)} errors, {len(rep.warnings)} warnings)")
        lines += [f"  error   {f}" for f in rep.errors]
        lines += [f"  warning {f}" for f in rep.warnings]
    payload = {"models": results, "ok": not failed}
    if cfg.json and cfg.out:
        Path(cfg.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        _emit(cfg, payload, "\n".join(lines))
    return EXIT_FAIL if failed else EXIT_OK


def cmd_enforce(cfg: CliConfig) -> int:
    cat = resolve_catalog(cfg.catalogs)
    models = _load_models(cfg)
    for m in models:
        rep = validate_model(m, cat)
        if not rep.ok:
            print(f"{m.name}: {rep.errors[0]}", file=sys.stderr)
            return EXIT_FAIL
    path = Path(cfg.trace)
    if not path.exists():
        raise InputError(f"no trace file {cfg.trace!r}")
    text = path.read_text()
    trace = loads_trace(text, origin=str(path))
    out, report = enforce(models, trace, SessionConfig(cat))
    # an unchanged trace is copied verbatim so that it stays byte-identical
    out_text = text if out == trace else dumps_trace(out)
    if cfg.out:
        Path(cfg.out).write_text(out_text)
    summary = (f"events in {report.events_in}, out {report.events_out}, "
               f"suppressed {report.suppressed}, inserted {report.inserted}, "
               f"resumes {report.resumes}, pending {len(report.pending)}")
    if cfg.json:
        payload = {"report": report.to_dict(), "out": cfg.out,
                   "methods": [ev.method_name for ev in out]}
        if not cfg.out:
            payload["trace"] = [json.loads(line) for line in out_text.splitlines() if line.strip()]
        _emit(cfg, payload, "")
    else:
        if not cfg.out:
            sys.stdout.write(out_text)
        print(summary, file=sys.stderr)
    return EXIT_OK


def cmd_gen(cfg: CliConfig) -> int:
    cat = resolve_catalog(cfg.catalogs)
    out_dir = Path(cfg.out) if cfg.out else Path.cwd()
    out_dir.mkdir(parents=True, exist_ok=True)
    files, lines = [], []
    for m in _load_models(cfg):
        g = codegen.generate(m, cfg.profile, cat)
        target = out_dir / codegen.output_name(m, cfg.profile)
        target.write_text(g.source_text)
        sections = codegen.section_report(g)
        files.append({"model": m.name, "path": str(target), "profile": cfg.profile,
                      "sections": sections})
        lines.append(f"{target}: {len(sections)} sections: {', '.join(sections)}")
    _emit(cfg, {"files": files}, "\n".join(lines))
    return EXIT_OK


def _scenario_models(cfg: CliConfig, s) -> list[EnforcementModel]:
    from .sim import MissingFixture, models_by_name

    if cfg.models:
        return _load_models(cfg)
    available = models_by_name(cfg.models_dir)
    missing = [n for n in s.models if n not in available]
    if missing:
        raise MissingFixture(f"scenario {s.name} needs models {missing}")
    return [available[n] for n in s.models]


def cmd_run(cfg: CliConfig) -> int:
    from .sim import run_scenario

    s = resolve_scenario(cfg.scenario)
    cat = resolve_catalog(cfg.catalogs)
    outcome = run_scenario(s, _scenario_models(cfg, s), cfg.enforcement, catalog=cat)
    lines = [f"scenario {s.name} (enforcement {'on' if cfg.enforcement else 'off'})",
             f"verdict: {outcome.verdict.value}",
             f"exceptions: {len(outcome.exceptions)}"]
    lines += [f"  step {step}: {kind}" for step, kind in outcome.exceptions]
    lines.append(f"leaks: {len(outcome.leaks)}")
    lines += [f"  {lk.resource} held by component {lk.component} in state {lk.state}"
              for lk in outcome.leaks]
    if outcome.report is not None:
        r = outcome.report
        lines.append(f"suppressed {r.suppressed}, inserted {r.inserted}, resumes {r.resumes}")
    _emit(cfg, outcome.to_dict(), "\n".join(lines))
    if cfg.enforcement and s.expected is not None and s.expected != outcome.verdict.value:
        print(f"expected {s.expected}, got {outcome.verdict.value}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_corpus(cfg: CliConfig) -> int:
    from .sim import run_corpus

    cat = resolve_catalog(cfg.catalogs) if cfg.catalogs else None
    report = run_corpus(cfg.corpus, cfg.models_dir, enforcement=cfg.enforcement, catalog=cat,
                        workers=cfg.workers)
    _emit(cfg, report.to_dict(), report.to_text())
    if report.mismatches:
        return EXIT_FAIL
    if cfg.expect is not None and report.tally() != cfg.expect:
        healed, clean = report.tally()
        print(f"expected {cfg.expect[0]}:{cfg.expect[1]}, got {healed}:{clean}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_bench(cfg: CliConfig) -> int:
    from .sim import bench_overhead, models_by_name, write_csv

    s = resolve_scenario(cfg.scenario)
    pool = models_by_name(cfg.models_dir)
    primary = _load_models(cfg) if cfg.models else [pool[n] for n in s.models if n in pool]
    cat = resolve_catalog(cfg.catalogs) if cfg.catalogs else None
    rows = bench_overhead(s, primary, sorted(pool.values(), key=lambda m: m.name),
                          cfg.n_modules, cfg.repetitions, runs_per_rep=cfg.runs, catalog=cat,
                          seed=cfg.seed)
    text = write_csv(rows, cfg.out)
    _emit(cfg, {"scenario": s.name, "rows": [vars(r) for r in rows], "csv": cfg.out},
          text.rstrip("\n"))
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "enforce": cmd_enforce, "gen": cmd_gen, "run": cmd_run,
            "corpus": cmd_corpus, "bench": cmd_bench}


# --- argument parsing ------------------------------------------------------------

def _expect(text: str) -> tuple[int, int]:
    try:
        h, v = text.split(":")
        return int(h), int(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected H:V, got {text!r}") from None


def _counts(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N[,N...], got {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors are input errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", dest="models", action="append", default=[],
                        help="model file or bundled model name (repeatable)")
    common.add_argument("--catalog", dest="catalogs", action="append", default=[],
                        help="catalog file, or 'android' / 'fig1' (repeatable)")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--out", help="output file or directory")

    p = _Parser(prog="enforcekit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    sub.add_parser("validate", parents=[common], help="check models against a catalog")
    e = sub.add_parser("enforce", parents=[common], help="rewrite a JSONL trace")
    e.add_argument("--trace", required=True)
    g = sub.add_parser("gen", parents=[common], help="generate hook-module source")
    g.add_argument("--profile", choices=sorted(codegen.PROFILES), default="xposed-java")

    scenario_flags = argparse.ArgumentParser(add_help=False)
    scenario_flags.add_argument("--models-dir")
    scenario_flags.add_argument("--enforce", choices=("on", "off"), default="on")

    r = sub.add_parser("run", parents=[common, scenario_flags], help="simulate one scenario")
    r.add_argument("scenario_ref", nargs="?", metavar="SCENARIO")
    r.add_argument("--scenario")
    c = sub.add_parser("corpus", parents=[common, scenario_flags], help="simulate a corpus")
    c.add_argument("--corpus")
    c.add_argument("--expect", type=_expect, metavar="H:V",
                   help="required Healed:NoViolation tally")
    c.add_argument("--workers", type=int, default=1)
    b = sub.add_parser("bench", parents=[common, scenario_flags], help="dispatch overhead")
    b.add_argument("--scenario", default="bluechat")
    b.add_argument("--modules", type=_counts, default=[0, 1, 5, 10, 20, 40, 60],
                   help="comma-separated module counts")
    b.add_argument("--reps", type=int, default=10)
    b.add_argument("--runs", type=int, default=50, help="replays per repetition")
    b.add_argument("--seed", type=int, default=0)
    return p


def config_from_args(ns: argparse.Namespace) -> CliConfig:
    cfg = CliConfig(ns.subcommand, models=ns.models, catalogs=ns.catalogs, out=ns.out,
                    json=ns.json)
    cfg.trace = getattr(ns, "trace", None)
    cfg.profile = getattr(ns, "profile", cfg.profile)
    cfg.scenario = getattr(ns, "scenario_ref", None) or getattr(ns, "scenario", None)
    cfg.corpus = getattr(ns, "corpus", None)
    cfg.models_dir = getattr(ns, "models_dir", None)
    cfg.enforcement = getattr(ns, "enforce", "on") == "on"
    cfg.expect = getattr(ns, "expect", None)
    cfg.workers = getattr(ns, "workers", 1)
    cfg.n_modules = getattr(ns, "modules", cfg.n_modules)
    cfg.repetitions = getattr(ns, "reps", cfg.repetitions)
    cfg.runs = getattr(ns, "runs", cfg.runs)
    cfg.seed = getattr(ns, "seed", cfg.seed)
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
        cfg.check()
        return COMMANDS[cfg.subcommand](cfg)
    except codegen.UnvalidatedModel as exc:
        print(f"enforcekit: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (EnforceKitError, OSError, ValueError) as exc:
        print(f"enforcekit: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
