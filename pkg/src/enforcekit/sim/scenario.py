"""Scripted app scenarios: component lifecycles, API calls and a resource registry.

A scenario script is replayed step by step.  Lifecycle steps produce a
framework ``before#``/``after#`` pair around the callback body; API calls
produce an app ``before#``/``after#`` pair.  With enforcement on, every event
goes through an engine session first and whatever comes out is executed
against the registry, so calls the enforcer inserts really release or
reacquire resources.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence, Union

from ..catalog import ApiCatalog, ParseError, ResourceKind, load_catalog
from ..engine import EnforcementReport, Session, SessionConfig
from ..model import EnforceKitError, EnforcementModel, Event, Phase, Source
from .acceptor import PolicySpec, acceptor_for

ACTIVITY = "android.app.Activity"
SERVICE = "android.app.Service"
BASE_CLASS = {"Activity": ACTIVITY, "Service": SERVICE}

CALLBACKS = {
    "create": "onCreate", "start": "onStart", "resume": "onResume", "pause": "onPause",
    "stop": "onStop", "restart": "onRestart", "destroy": "onDestroy",
    "startCommand": "onStartCommand",
}

# legal next lifecycle steps keyed by the last step taken (None: not created yet)
_NEXT = {
    "Activity": {
        None: {"create"}, "create": {"start"}, "start": {"resume"}, "resume": {"pause"},
        "pause": {"resume", "stop"}, "stop": {"restart", "destroy"}, "restart": {"start"},
        "destroy": {"create"},
    },
    "Service": {
        None: {"create"}, "create": {"startCommand", "destroy"},
        "startCommand": {"startCommand", "destroy"}, "destroy": {"create"},
    },
}

# components in these states should not be holding resources any more
_IDLE = {"Activity": {"pause", "stop", "destroy"}, "Service": {"destroy"}}


class ScenarioError(EnforceKitError, ValueError):
    pass


class Verdict(enum.Enum):
    HEALED = "Healed"
    NO_VIOLATION = "NoViolation"
    VIOLATION_UNHEALED = "ViolationUnhealed"


@dataclass(frozen=True)
class Component:
    name: str
    class_name: str
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in BASE_CLASS:
            raise ScenarioError(f"component {self.name}: unknown kind {self.kind!r}")


@dataclass
class Scenario:
    name: str
    components: list[Component]
    script: list[dict]
    policies: list[PolicySpec] = field(default_factory=list)
    models: list[str] = field(default_factory=list)
    expected: Optional[str] = None
    app: str = ""
    row: Optional[int] = None

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        try:
            comps = [Component(c["name"], c["class"], c["kind"]) for c in d["components"]]
            return cls(d["name"], comps, list(d["script"]),
                       [PolicySpec.from_dict(p) for p in d.get("policies", ())],
                       list(d.get("models", ())), d.get("expected"), d.get("app", ""), d.get("row"))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed scenario: {exc!r}") from exc

    def component(self, name: str) -> Component:
        for c in self.components:
            if c.name == name:
                return c
        raise ScenarioError(f"{self.name}: unknown component {name!r}")


def load_scenario(path: Union[str, Path]) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return Scenario.from_dict(data)


@lru_cache(maxsize=1)
def default_catalog() -> ApiCatalog:
    return load_catalog()


def scenario_catalog(s: Scenario, base: Optional[ApiCatalog] = None) -> ApiCatalog:
    """``base`` plus the scenario's own component classes."""
    base = base if base is not None else default_catalog()
    return base.with_components({c.class_name: BASE_CLASS[c.kind] for c in s.components})


class ResourceRegistry:
    """Who holds which resource.  Holders are (component, receiver) pairs."""

    def __init__(self, catalog: ApiCatalog):
        self.catalog = catalog
        self.holders: dict[str, set[tuple[int, int]]] = {}

    def apply(self, ev: Event) -> Optional[str]:
        """Execute the effect of a call start; returns an exception kind on failure."""
        if ev.phase is not Phase.BEFORE:
            return None
        cat = self.catalog
        res = cat.resource_class(ev.class_name)
        if res is None:
            return None
        holder = (ev.component_id, ev.receiver_id)
        if cat.is_acquire(ev.class_name, ev.method_name):
            held = self.holders.setdefault(res, set())
            if cat.resource_kind(res) is ResourceKind.EXCLUSIVE and held and holder not in held:
                return f"{res.rsplit('.', 1)[-1]}InUse"
            held.add(holder)
        elif cat.is_release(ev.class_name, ev.method_name):
            held = self.holders.get(res, set())
            for h in [h for h in held if h[1] == ev.receiver_id]:
                held.discard(h)
        return None

    def exclusive_ok(self) -> bool:
        return all(len(hs) <= 1 for res, hs in self.holders.items()
                   if self.catalog.resource_kind(res) is ResourceKind.EXCLUSIVE)


@dataclass(frozen=True)
class Leak:
    resource: str
    component: str
    receiver: int
    state: str


@dataclass
class SimRun:
    """Raw result of replaying a script."""

    trace_in: list[Event]
    trace_out: list[Event]
    exceptions: list[tuple[int, str]]
    leaks: list[Leak]
    registry: ResourceRegistry
    exclusive_ok: bool = True


class _Simulator:
    def __init__(self, s: Scenario, session: Optional[Session], catalog: ApiCatalog):
        self.s = s
        self.session = session
        self.registry = ResourceRegistry(catalog)
        self.trace_in: list[Event] = []
        self.trace_out: list[Event] = []
        self.exceptions: list[tuple[int, str]] = []
        self.exclusive_ok = True
        self._next_token = 1
        self.receivers: dict[str, int] = {}
        self.comp_token: dict[str, int] = {}
        self.comp_state: dict[int, str] = {}
        self.comp_of_token: dict[int, Component] = {}
        self.last_step: dict[str, Optional[str]] = {c.name: None for c in s.components}

    def _token(self) -> int:
        t = self._next_token
        self._next_token += 1
        return t

    def _emit(self, ev: Event, step: int) -> bool:
        """Push ``ev`` through enforcement and execute the result; True if ``ev`` itself ran."""
        self.trace_in.append(ev)
        outs = self.session.dispatch(ev) if self.session is not None else (ev,)
        ran = False
        for o in outs:
            self.trace_out.append(o)
            failure = self.registry.apply(o)
            if failure is not None:
                self.exceptions.append((step, failure))
            if o is ev:
                ran = failure is None
        if not self.registry.exclusive_ok():
            self.exclusive_ok = False
        return ran

    def _call(self, d: dict, comp_name: str, step: int) -> None:
        comp_tok = self.comp_token.get(comp_name)
        if comp_tok is None or self.comp_state.get(comp_tok) == "destroy":
            raise ScenarioError(f"{self.s.name} step {step}: {comp_name} is not alive")
        name = d.get("receiver")
        if name == "@self":
            receiver = comp_tok
        elif name is None:
            receiver = 0
        elif d.get("new"):
            receiver = self.receivers[name] = self._token()
        elif name in self.receivers:
            receiver = self.receivers[name]
        else:
            raise ScenarioError(f"{self.s.name} step {step}: receiver {name!r} used before creation")
        args = tuple(d.get("args", ()))
        before = Event(Phase.BEFORE, d["class"], d["method"], receiver, comp_tok, args, Source.APP)
        if self._emit(before, step):
            self._emit(Event(Phase.AFTER, d["class"], d["method"], receiver, comp_tok, args,
                             Source.APP), step)

    def _lifecycle(self, d: dict, step: int) -> None:
        comp = self.s.component(d["component"])
        event = d["event"]
        if event not in CALLBACKS:
            raise ScenarioError(f"{self.s.name} step {step}: unknown lifecycle event {event!r}")
        last = self.last_step[comp.name]
        if event not in _NEXT[comp.kind][last]:
            raise ScenarioError(f"{self.s.name} step {step}: {comp.kind} {comp.name} cannot go "
                                f"from {last or 'nothing'} to {event}")
        if event == "create":
            tok = self._token()
            self.comp_token[comp.name] = tok
            self.comp_of_token[tok] = comp
        tok = self.comp_token[comp.name]
        self.last_step[comp.name] = event
        method = CALLBACKS[event]
        body_runs = self._emit(Event(Phase.BEFORE, comp.class_name, method, tok, tok, (),
                                     Source.FRAMEWORK), step)
        if body_runs:
            for call in d.get("body", ()):
                self._call(call, comp.name, step)
        self.comp_state[tok] = event
        self._emit(Event(Phase.AFTER, comp.class_name, method, tok, tok, (), Source.FRAMEWORK), step)

    def run(self) -> SimRun:
        for step, d in enumerate(self.s.script):
            kind = d.get("step")
            if kind == "lifecycle":
                self._lifecycle(d, step)
            elif kind == "call":
                if "component" not in d:
                    raise ScenarioError(f"{self.s.name} step {step}: call without component")
                self._call(d, d["component"], step)
            elif kind == "user":
                pass
            else:
                raise ScenarioError(f"{self.s.name} step {step}: unknown directive {kind!r}")
        return SimRun(self.trace_in, self.trace_out, self.exceptions, self._leaks(),
                      self.registry, self.exclusive_ok)

    def _leaks(self) -> list[Leak]:
        out = []
        for res in sorted(self.registry.holders):
            for comp_tok, receiver in sorted(self.registry.holders[res]):
                comp = self.comp_of_token.get(comp_tok)
                state = self.comp_state.get(comp_tok, "")
                if comp is not None and state in _IDLE[comp.kind]:
                    out.append(Leak(res, comp.name, receiver, state))
        return out


def simulate(s: Scenario, session: Optional[Session] = None,
             catalog: Optional[ApiCatalog] = None) -> SimRun:
    """Replay ``s``; ``session=None`` runs without enforcement."""
    cat = catalog if catalog is not None else scenario_catalog(s)
    return _Simulator(s, session, cat).run()


@dataclass
class SimOutcome:
    scenario: str
    verdict: Verdict
    leaks: list[Leak]
    exceptions: list[tuple[int, str]]
    trace_in: list[Event]
    trace_out: list[Event]
    report: Optional[EnforcementReport] = None
    #: first rejecting index per policy on the input trace (None = accepted)
    violations: dict[str, Optional[int]] = field(default_factory=dict)
    exclusive_ok: bool = True

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "verdict": self.verdict.value,
            "leaks": [vars(l) for l in self.leaks],
            "exceptions": [{"step": s, "kind": k} for s, k in self.exceptions],
            "events_in": len(self.trace_in),
            "events_out": len(self.trace_out),
            "violations": self.violations,
            "report": self.report.to_dict() if self.report is not None else None,
        }


def judge(policies: Sequence[PolicySpec], trace_in: Sequence[Event], trace_out: Sequence[Event],
          catalog: ApiCatalog) -> tuple[Verdict, dict[str, Optional[int]]]:
    """Verdict from the acceptors and the two traces only."""
    h = catalog.hierarchy()
    acceptors = [acceptor_for(p, h) for p in policies]
    violations = {p.describe(): a.first_violation(trace_in) for p, a in zip(policies, acceptors)}
    if all(v is None for v in violations.values()):
        return Verdict.NO_VIOLATION, violations
    if all(a.accepts(trace_out) for a in acceptors):
        return Verdict.HEALED, violations
    return Verdict.VIOLATION_UNHEALED, violations


def run_scenario(s: Scenario, models: Sequence[EnforcementModel], enforcement: bool = True, *,
                 catalog: Optional[ApiCatalog] = None) -> SimOutcome:
    cat = scenario_catalog(s, catalog)
    session = Session(models, SessionConfig(cat)) if enforcement else None
    run = simulate(s, session, cat)
    verdict, violations = judge(s.policies, run.trace_in, run.trace_out, cat)
    return SimOutcome(s.name, verdict, run.leaks, run.exceptions, run.trace_in, run.trace_out,
                      session.finalize() if session is not None else None, violations,
                      run.exclusive_ok)
