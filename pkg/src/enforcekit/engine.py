"""Policy enforcer: runs enforcement models as streaming event rewriters.

A :class:`Session` owns one enforcer instance per (model, component,
resource) triple.  Each incoming event is offered to the active models in
activation order.  Within a model, the first transition (declaration order)
of the instance's current state whose guard matches fires, and its outputs
replace the event in the stream.  Events the enforcer inserts carry
``Source.ENFORCER`` and are never offered to any instance, so an enforcer
cannot react to its own calls.
"""

from __future__ import annotations

import dataclasses
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .catalog import ApiCatalog
from .model import (
    ENFORCER_CLASS, AnyExcept, Emit, EmitBound, EnforceKitError, EnforcementModel, Event, Exact,
    Phase, Source, Special, Transition, guard_matches, signature_matches,
)
from .validation import validate_model

log = logging.getLogger(__name__)


class InvalidConfig(EnforceKitError, ValueError):
    pass


class ResumeUnavailable(EnforceKitError):
    """``e.resume`` fired on an instance that never observed an acquisition."""


@dataclass
class ResourceRecord:
    """What the resource manager remembers to recreate a released resource."""

    class_name: str
    acquisition_calls: list[tuple[str, tuple]] = field(default_factory=list)
    held: bool = False
    forced_release: bool = False


@dataclass
class EnforcerInstance:
    model: EnforcementModel
    current_state: int
    component_id: int
    resource_receiver: Optional[int] = None
    resume_store: Optional[ResourceRecord] = None
    suppressed: int = 0
    inserted: int = 0
    resumes: int = 0
    steps: int = 0
    errors: list[str] = field(default_factory=list)

    @property
    def key(self) -> tuple[str, int, Optional[int]]:
        return (self.model.name, self.component_id, self.resource_receiver)

    @property
    def pending(self) -> bool:
        """Trace ended away from the initial state while still holding the resource."""
        held = self.resume_store is not None and self.resume_store.held
        return held and self.current_state != self.model.initial


@dataclass
class SessionConfig:
    catalog: ApiCatalog = field(default_factory=ApiCatalog)
    #: component classes or package prefixes to enforce on; empty means all
    target_components: frozenset[str] = frozenset()
    #: names of the models to activate, in chaining order; None means all
    active_models: Optional[Sequence[str]] = None

    @property
    def hierarchy(self):
        return self.catalog.hierarchy()


@dataclass
class InstanceReport:
    model: str
    component: int
    receiver: Optional[int]
    final_state: int
    suppressed: int
    inserted: int
    resumes: int
    pending: bool
    errors: list[str]


@dataclass
class EnforcementReport:
    events_in: int
    events_out: int
    instances: list[InstanceReport]
    enforcer_state_changes: int = 0

    @property
    def suppressed(self) -> int:
        return sum(i.suppressed for i in self.instances)

    @property
    def inserted(self) -> int:
        return sum(i.inserted for i in self.instances)

    @property
    def resumes(self) -> int:
        return sum(i.resumes for i in self.instances)

    @property
    def pending(self) -> list[InstanceReport]:
        return [i for i in self.instances if i.pending]

    @property
    def balanced(self) -> bool:
        return self.events_out == self.events_in - self.suppressed + self.inserted

    def to_dict(self) -> dict:
        return {
            "events_in": self.events_in,
            "events_out": self.events_out,
            "suppressed": self.suppressed,
            "inserted": self.inserted,
            "resumes": self.resumes,
            "pending": len(self.pending),
            "instances": [dataclasses.asdict(i) for i in self.instances],
        }


def resume(instance: EnforcerInstance) -> list[Event]:
    """Replay the stored acquisition calls unless the app already reacquired."""
    store = instance.resume_store
    if store is None:
        raise ResumeUnavailable(f"{instance.model.name}: no acquisition recorded for "
                                f"component {instance.component_id}")
    if store.held:
        return []
    receiver = instance.resource_receiver or 0
    events = []
    for method, args in store.acquisition_calls:
        for phase in (Phase.BEFORE, Phase.AFTER):
            events.append(Event(phase, store.class_name, method, receiver,
                                instance.component_id, args, Source.ENFORCER))
    store.held = True
    store.forced_release = False
    instance.resumes += 1
    return events


class _Compiled:
    """Routing tables for one model; shared by every session built from a plan."""

    def __init__(self, model: EnforcementModel, plan: "EnforcementPlan"):
        self.model = model
        self.hierarchy = plan.hierarchy
        self.initial = model.initial
        self.by_state: dict[int, list[Transition]] = defaultdict(list)
        for t in model.transitions:
            self.by_state[t.source].append(t)
        self.classes = tuple(model.classes())
        self.has_wildcard = any(isinstance(t.intercepted, AnyExcept) for t in model.transitions)
        self.exact_guards = {t.intercepted.signature for t in model.transitions
                             if isinstance(t.intercepted, Exact)}
        self._match_cache: dict[tuple, Optional[Transition]] = {}
        self._lifecycle_cache: dict[str, bool] = {}

    def first_match(self, state: int, ev: Event) -> Optional[Transition]:
        key = (state, ev.phase is Phase.AFTER, ev.class_name, ev.method_name)
        try:
            return self._match_cache[key]
        except KeyError:
            pass
        found = None
        for t in self.by_state.get(state, ()):
            if guard_matches(t.intercepted, ev, self.hierarchy) is not None:
                found = t
                break
        self._match_cache[key] = found
        return found

    def is_lifecycle(self, class_name: str) -> bool:
        try:
            return self._lifecycle_cache[class_name]
        except KeyError:
            res = self.hierarchy.is_subclass(class_name, self.model.lifecycle_object)
            self._lifecycle_cache[class_name] = res
            return res

    def covers(self, class_name: str) -> bool:
        h = self.hierarchy
        return any(h.is_subclass(class_name, c) for c in self.classes)


class EnforcementPlan:
    """Validated models plus the event index used to route events to them.

    Building a plan is the expensive part of starting enforcement; sessions
    created from the same plan share its lookup caches and differ only in
    their live instances.
    """

    def __init__(self, models: Sequence[EnforcementModel], cfg: Optional[SessionConfig] = None):
        cfg = cfg or SessionConfig()
        names = [m.name for m in models]
        if len(set(names)) != len(names):
            raise InvalidConfig(f"duplicate model names in {names}")
        by_name = {m.name: m for m in models}
        active = list(cfg.active_models) if cfg.active_models is not None else names
        unknown = [n for n in active if n not in by_name]
        if unknown:
            raise InvalidConfig(f"active models not loaded: {unknown}")
        for name in active:
            rep = validate_model(by_name[name])
            if not rep.ok:
                raise InvalidConfig(f"model {name} is invalid: {rep.errors[0]}")
        self.config = cfg
        self.catalog = cfg.catalog
        extra = {c: None for m in models for c in m.classes()}
        extra[ENFORCER_CLASS] = None
        self.hierarchy = cfg.catalog.hierarchy().extended(extra)
        self.compiled = [_Compiled(by_name[n], self) for n in active]
        self._relevant: dict[tuple, tuple[tuple[int, bool], ...]] = {}

    def relevant(self, ev: Event) -> tuple[tuple[int, bool], ...]:
        """Models that could react to an event with this signature.

        Each entry is ``(model index, starts)`` where ``starts`` says whether
        the model's initial state reacts, i.e. whether the event can create
        an instance.  Models with neither a live instance nor ``starts`` are
        skipped without routing.
        """
        key = (ev.phase is Phase.AFTER, ev.class_name, ev.method_name)
        try:
            return self._relevant[key]
        except KeyError:
            pass
        out = []
        if ev.class_name in self.hierarchy:
            acquisition = ev.phase is Phase.AFTER and self.catalog.is_acquire(ev.class_name, ev.method_name)
            for i, cm in enumerate(self.compiled):
                if not cm.covers(ev.class_name):
                    continue
                if (cm.has_wildcard or acquisition
                        or any(signature_matches(s, ev, self.hierarchy) for s in cm.exact_guards)):
                    out.append((i, cm.first_match(cm.initial, ev) is not None))
        res = tuple(out)
        self._relevant[key] = res
        return res

    def session(self) -> "Session":
        return Session(plan=self)


class Session:
    """Single-threaded enforcement session; see module docstring for semantics."""

    def __init__(self, models: Sequence[EnforcementModel] = (), cfg: Optional[SessionConfig] = None,
                 *, plan: Optional[EnforcementPlan] = None):
        if plan is None:
            plan = EnforcementPlan(models, cfg)
        self.plan = plan
        self.config = plan.config
        self.catalog = plan.catalog
        self.hierarchy = plan.hierarchy
        self._active = plan.compiled
        self._instances: list[dict[int, list[EnforcerInstance]]] = [{} for _ in plan.compiled]
        self._component_class: dict[int, str] = {}
        self._suppressed_calls: dict[tuple, list[EnforcerInstance]] = defaultdict(list)
        self._all_instances: list[EnforcerInstance] = []
        self.events_in = 0
        self.events_out = 0
        self.enforcer_state_changes = 0

    # -- routing helpers ----------------------------------------------------

    def _targeted(self, ev: Event) -> bool:
        targets = self.config.target_components
        if not targets:
            return True
        cls = self._component_class.get(ev.component_id)
        if cls is None:
            return False
        return any(cls == t or cls.startswith(t + ".") for t in targets)

    def _new_instance(self, idx: int, comp: int, receiver: Optional[int]) -> EnforcerInstance:
        cm = self._active[idx]
        inst = EnforcerInstance(cm.model, cm.initial, comp, receiver)
        self._instances[idx].setdefault(comp, []).append(inst)
        self._all_instances.append(inst)
        return inst

    def _route(self, idx: int, ev: Event) -> list[EnforcerInstance]:
        cm = self._active[idx]
        comp = ev.component_id
        insts = self._instances[idx].get(comp, ())
        if cm.is_lifecycle(ev.class_name):
            if insts:
                return list(insts)
            if cm.first_match(cm.initial, ev) is not None:
                return [self._new_instance(idx, comp, None)]
            return []
        for inst in insts:
            if inst.resource_receiver == ev.receiver_id:
                return [inst]
        for inst in insts:
            store = inst.resume_store
            if store is not None and store.forced_release and self._is_app_acquisition(ev, store):
                # the app took the resource back on its own, through a new object
                inst.resource_receiver = ev.receiver_id
                return [inst]
            unbound = inst.resource_receiver is None
            if unbound and cm.first_match(inst.current_state, ev) is not None:
                inst.resource_receiver = ev.receiver_id
                return [inst]
        if cm.first_match(cm.initial, ev) is not None:
            return [self._new_instance(idx, comp, ev.receiver_id)]
        return []

    def _is_app_acquisition(self, ev: Event, store: Optional[ResourceRecord] = None) -> bool:
        if ev.phase is not Phase.AFTER or ev.source is Source.ENFORCER:
            return False
        if not self.catalog.is_acquire(ev.class_name, ev.method_name):
            return False
        return store is None or self.hierarchy.is_subclass(ev.class_name, store.class_name)

    # -- stepping -------------------------------------------------------------

    def _record_acquisition(self, inst: EnforcerInstance, ev: Event) -> None:
        store = inst.resume_store
        call = (ev.method_name, ev.args)
        if store is not None and store.held and inst.resource_receiver == ev.receiver_id:
            store.acquisition_calls.append(call)
        else:
            inst.resume_store = ResourceRecord(ev.class_name, [call], held=True)

    def _materialize(self, inst: EnforcerInstance, cm: _Compiled, sig) -> Event:
        if cm.is_lifecycle(sig.class_name):
            receiver = inst.component_id
        else:
            receiver = inst.resource_receiver or 0
        return Event(sig.phase, sig.class_name, sig.method_name, receiver,
                     inst.component_id, (), Source.ENFORCER)

    def _step(self, cm: _Compiled, inst: EnforcerInstance, ev: Event) -> list[Event]:
        if ev.source is Source.ENFORCER:
            self.enforcer_state_changes += 1  # unreachable by construction; audited by tests
        if (ev.phase is Phase.AFTER and not cm.is_lifecycle(ev.class_name)
                and self._is_app_acquisition(ev)):
            self._record_acquisition(inst, ev)
        t = cm.first_match(inst.current_state, ev)
        if t is None:
            return [ev]
        inst.steps += 1
        inst.current_state = t.target
        out: list[Event] = []
        passed = False
        for action in t.outputs:
            if isinstance(action, EmitBound) or (
                    isinstance(action, Emit) and not passed
                    and signature_matches(action.signature, ev, self.hierarchy)):
                if not passed:
                    out.append(ev)
                    passed = True
                else:
                    out.append(dataclasses.replace(ev, source=Source.ENFORCER))
                    inst.inserted += 1
            elif isinstance(action, Emit):
                new = self._materialize(inst, cm, action.signature)
                out.append(new)
                inst.inserted += 1
                store = inst.resume_store
                if (store is not None and store.held
                        and self.catalog.is_release(new.class_name, new.method_name)):
                    store.held = False
                    store.forced_release = True
            elif isinstance(action, Special):
                try:
                    replay = resume(inst)
                except ResumeUnavailable as exc:
                    log.debug("%s", exc)
                    inst.errors.append("ResumeUnavailable")
                    replay = []
                out.extend(replay)
                inst.inserted += len(replay)
        if not passed:
            inst.suppressed += 1
            if ev.phase is Phase.BEFORE:
                self._suppressed_calls[ev.call_key].append(inst)
        return out

    def _offer(self, idx: int, ev: Event, insts: list[EnforcerInstance]) -> list[Event]:
        """Step each routed instance in turn; returns what replaces ``ev``."""
        cm = self._active[idx]
        stream = [ev]
        for inst in insts:
            nxt: list[Event] = []
            for e in stream:
                if e is ev:
                    nxt.extend(self._step(cm, inst, e))
                else:
                    nxt.append(e)
            stream = nxt
        return stream

    # -- public API -----------------------------------------------------------

    def dispatch(self, ev: Event) -> list[Event]:
        """Transform one event; returns the events to execute in its place."""
        self.events_in += 1
        out = self._dispatch(ev)
        self.events_out += len(out)
        return out

    def _dispatch(self, ev: Event) -> list[Event]:
        if ev.source is Source.ENFORCER:
            return [ev]
        if ev.source is Source.FRAMEWORK and ev.receiver_id == ev.component_id:
            self._component_class.setdefault(ev.component_id, ev.class_name)
        if ev.phase is Phase.AFTER:
            owners = self._suppressed_calls.get(ev.call_key)
            if owners:
                # the call never ran, so its return is dropped too
                owners.pop().suppressed += 1
                return []
        relevant = self.plan.relevant(ev)
        if not relevant or not self._targeted(ev):
            return [ev]
        stream = [ev]
        pos = 0
        live = self._instances
        comp = ev.component_id
        for idx, starts in relevant:
            if not starts and comp not in live[idx]:
                continue
            insts = self._route(idx, ev)
            if not insts:
                continue
            stream[pos:pos + 1] = self._offer(idx, ev, insts)
            pos = next((i for i, e in enumerate(stream) if e is ev), -1)
            if pos < 0:
                break  # suppressed: later models never see it
        return stream

    def run(self, trace: Iterable[Event]) -> list[Event]:
        out: list[Event] = []
        for ev in trace:
            out.extend(self.dispatch(ev))
        return out

    @property
    def instances(self) -> list[EnforcerInstance]:
        return list(self._all_instances)

    def finalize(self) -> EnforcementReport:
        return EnforcementReport(
            events_in=self.events_in,
            events_out=self.events_out,
            instances=[
                InstanceReport(i.model.name, i.component_id, i.resource_receiver,
                               i.current_state, i.suppressed, i.inserted, i.resumes,
                               i.pending, list(i.errors))
                for i in self._all_instances
            ],
            enforcer_state_changes=self.enforcer_state_changes,
        )


def new_session(models: Sequence[EnforcementModel], cfg: Optional[SessionConfig] = None) -> Session:
    return Session(models, cfg)


def dispatch(session: Session, ev: Event) -> list[Event]:
    return session.dispatch(ev)


def finalize(session: Session) -> EnforcementReport:
    return session.finalize()


def enforce(models: Sequence[EnforcementModel], trace: Iterable[Event],
            cfg: Optional[SessionConfig] = None) -> tuple[list[Event], EnforcementReport]:
    """Batch helper: run ``trace`` through a fresh session."""
    s = Session(models, cfg)
    out = s.run(trace)
    return out, s.finalize()
