"""Deterministic lifecycle and resource simulator with policy acceptors."""

from .acceptor import (
    BadTemplateParams, PolicyAcceptor, PolicySpec, Template, acceptor_for, derive_acceptor,
)
from .bench import BenchRow, bench_overhead, module_pool, write_csv
from .corpus import CaseResult, CorpusReport, MissingFixture, load_corpus, models_by_name, run_corpus
from .scenario import (
    Component, Leak, ResourceRegistry, Scenario, ScenarioError, SimOutcome, SimRun, Verdict,
    judge, load_scenario, run_scenario, scenario_catalog, simulate,
)
