"""Independent reference implementations used as test oracles.

Nothing here calls into the engine's matching or stepping code: the brute
force drives the public session API and judges outputs with the policy
acceptors, the reference interpreter re-implements a single edit automaton
from scratch, and the switch decoder reads generated SimScript text back
into transitions without looking at the embedded model.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from enforcekit import (
    AnyExcept, ApiCatalog, ClassHierarchy, Emit, EmitBound, EnforcementModel, Event, Exact, Phase,
    Source, Special, State, Transition, parse_signature,
)
from enforcekit.engine import EnforcementPlan, SessionConfig
from enforcekit.sim import PolicyAcceptor, acceptor_for, load_corpus

LIFECYCLE_BASES = ("android.app.Activity", "android.app.Service", "demo.Component")

COMPONENT = 1
API_RECEIVER = 2


def is_lifecycle_class(cls: str, h: ClassHierarchy) -> bool:
    return cls in h and any(b in h and h.is_subclass(cls, b) for b in LIFECYCLE_BASES)


def model_alphabet(m: EnforcementModel, catalog: ApiCatalog) -> list[Event]:
    """One event per signature in the model's guards and outputs.

    Lifecycle events come from the framework on the component itself; API
    events come from the app on a single resource object.
    """
    h = catalog.hierarchy()
    out = []
    for sig in m.signatures():
        if sig.class_name == "e":
            continue
        if is_lifecycle_class(sig.class_name, h):
            out.append(Event(sig.phase, sig.class_name, sig.method_name, COMPONENT, COMPONENT,
                             (), Source.FRAMEWORK))
        else:
            out.append(Event(sig.phase, sig.class_name, sig.method_name, API_RECEIVER,
                             COMPONENT, (), Source.APP))
    return out


def all_traces(alphabet: Sequence[Event], max_len: int) -> Iterator[tuple[Event, ...]]:
    for n in range(max_len + 1):
        yield from itertools.product(alphabet, repeat=n)


def corpus_acceptors(catalog: ApiCatalog) -> dict[str, list[PolicyAcceptor]]:
    """model name -> acceptors of every corpus row enforced by that model."""
    h = catalog.hierarchy()
    found: dict[str, dict] = {}
    for s in load_corpus():
        for name in s.models:
            for p in s.policies:
                found.setdefault(name, {})[p] = None
    return {name: [acceptor_for(p, h) for p in ps] for name, ps in found.items()}


@dataclass
class BruteForceResult:
    traces: int = 0
    compliant: int = 0
    transparency_failures: list = field(default_factory=list)
    soundness_failures: list = field(default_factory=list)
    bookkeeping_failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.transparency_failures or self.soundness_failures
                    or self.bookkeeping_failures)


def brute_force(m: EnforcementModel, catalog: ApiCatalog, acceptors: Sequence[PolicyAcceptor],
                max_len: int = 6) -> BruteForceResult:
    """Every trace up to ``max_len`` over the model's alphabet, judged by ``acceptors``."""
    plan = EnforcementPlan([m], SessionConfig(catalog))
    res = BruteForceResult()
    for trace in all_traces(model_alphabet(m, catalog), max_len):
        session = plan.session()
        out = session.run(trace)
        rep = session.finalize()
        res.traces += 1
        if not rep.balanced or rep.enforcer_state_changes:
            res.bookkeeping_failures.append(trace)
        if all(a.accepts(trace) for a in acceptors):
            res.compliant += 1
            if list(out) != list(trace):
                res.transparency_failures.append(trace)
        if not all(a.accepts(out) for a in acceptors):
            res.soundness_failures.append(trace)
    return res


# --- reference edit automaton -------------------------------------------------

def _sig_matches(sig, ev: Event, h: ClassHierarchy) -> bool:
    return (sig.phase == ev.phase and sig.method_name == ev.method_name
            and sig.class_name in h.ancestors(ev.class_name))


def _guard_matches(g, ev: Event, h: ClassHierarchy) -> bool:
    if isinstance(g, Exact):
        return _sig_matches(g.signature, ev, h)
    return not any(_sig_matches(s, ev, h) for s in g.exclude)


def reference_rewrite(m: EnforcementModel, trace: Iterable[Event],
                      h: ClassHierarchy) -> list[tuple[str, Source]]:
    """One automaton over the whole trace, written from the edit-automaton rules.

    Returns (signature, source) pairs.  Only meaningful for models without
    special operations and traces on a single component and receiver.
    """
    state = m.initial
    dropped: list[tuple] = []
    out: list[tuple[str, Source]] = []
    for ev in trace:
        key = (ev.receiver_id, ev.class_name, ev.method_name)
        if ev.phase is Phase.AFTER and key in dropped:
            dropped.remove(key)
            continue
        t = next((t for t in m.transitions
                  if t.source == state and _guard_matches(t.intercepted, ev, h)), None)
        if t is None:
            out.append((str(ev), ev.source))
            continue
        state = t.target
        kept = False
        for o in t.outputs:
            if isinstance(o, EmitBound) or (isinstance(o, Emit) and not kept
                                            and _sig_matches(o.signature, ev, h)):
                out.append((str(ev), ev.source if not kept else Source.ENFORCER))
                kept = True
            elif isinstance(o, Emit):
                out.append((str(o.signature), Source.ENFORCER))
        if not kept and ev.phase is Phase.BEFORE:
            dropped.append(key)
    return out


# --- SimScript switch decoder ---------------------------------------------------

_CASE = re.compile(r"^case (\d+):$")
_IF = re.compile(r"^if \((.*)\) \{$")
_IS = re.compile(r'^(!?)is\(sig, "([^"]+)"\)$')
_GOTO = re.compile(r"^goto\(key, (\d+)\);$")
_EMIT = re.compile(r'^emit\(key, "([^"]+)"\);$')
_KEEP_VAR = re.compile(r"^keep\((\w+)\);$")


def decode_simscript(text: str) -> EnforcementModel:
    """Transitions read from the rendered switch; names and initial state from the header."""
    data = json.loads(text)
    header = data["model"]
    lines = [ln.strip() for ln in data["switch"]]
    states: list[int] = []
    transitions: list[Transition] = []
    state = None
    i = 0
    while i < len(lines):
        ln = lines[i]
        if (mc := _CASE.match(ln)):
            state = int(mc.group(1))
            states.append(state)
        elif (mi := _IF.match(ln)):
            atoms = [_IS.match(a.strip()) for a in mi.group(1).split("&&")]
            negated = {a.group(1) for a in atoms}
            sigs = tuple(parse_signature(a.group(2)) for a in atoms)
            if negated == {""} and len(sigs) == 1:
                guard = Exact(sigs[0])
                binder = None
            elif negated == {"!"}:
                guard, binder = sigs, "e"
            else:
                raise ValueError(f"cannot decode condition {ln!r}")
            target, outputs = None, []
            i += 1
            while lines[i] != "return;":
                body = lines[i]
                if (mg := _GOTO.match(body)):
                    target = int(mg.group(1))
                elif (me := _EMIT.match(body)):
                    outputs.append(Emit(parse_signature(me.group(1))))
                elif body == "keep(event);":
                    outputs.append(Emit(guard.signature))
                elif (mk := _KEEP_VAR.match(body)):
                    binder = mk.group(1)
                    outputs.append(EmitBound(binder))
                elif body == "e.resume(key);":
                    outputs.append(Special("resume"))
                elif body != "drop(event);":
                    raise ValueError(f"cannot decode action {body!r}")
                i += 1
            if isinstance(guard, tuple):
                guard = AnyExcept(guard, binder)
            transitions.append(Transition(state, target, guard, tuple(outputs)))
        i += 1
    initial = {s["id"] for s in header["states"] if s["initial"]}
    return EnforcementModel(header["name"], header["lifecycleObject"], header["api"],
                            tuple(State(s, s in initial) for s in states), tuple(transitions))


def session_outputs(m: EnforcementModel, catalog: ApiCatalog, traces) -> list:
    plan = EnforcementPlan([m], SessionConfig(catalog))
    results = []
    for trace in traces:
        s = plan.session()
        out = s.run(trace)
        results.append((tuple(out), [(i.current_state, i.suppressed, i.inserted)
                                     for i in s.instances]))
    return results
