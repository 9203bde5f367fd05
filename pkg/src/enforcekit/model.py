"""Domain types for enforcement models and the event traces they rewrite.

An enforcement model is an edit automaton whose input symbols are typed
method events (``before#`` a call starts, ``after#`` it returns) on either
a lifecycle object or the governed API class.  Everything in this module is
an immutable value; matching against a class hierarchy is the only logic.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

#: Pseudo-class for operations implemented by the enforcer itself (``e.resume``).
ENFORCER_CLASS = "e"

#: Special operations the engine and code generator know how to expand.
SPECIAL_OPERATIONS = frozenset({"resume"})

_IDENT = r"[A-Za-z_$][A-Za-z0-9_$]*"
_CLASS_RE = re.compile(rf"^{_IDENT}(\.{_IDENT})*$")
_METHOD_RE = re.compile(rf"^({_IDENT}|<init>)$")
_SIG_RE = re.compile(r"^(before|after)#(.+)\.([^.]+)$")


class EnforceKitError(Exception):
    """Base class for all errors raised by this package."""


class MalformedSignature(EnforceKitError, ValueError):
    pass


class UnknownClass(EnforceKitError, KeyError):
    pass


class Phase(enum.Enum):
    BEFORE = "before"
    AFTER = "after"


class Source(enum.Enum):
    APP = "app"
    ENFORCER = "enforcer"
    FRAMEWORK = "framework"


def is_class_name(text: str) -> bool:
    return bool(_CLASS_RE.match(text))


def is_identifier(text: str) -> bool:
    return bool(re.match(rf"^{_IDENT}$", text))


@dataclass(frozen=True, slots=True)
class ActionSignature:
    phase: Phase
    class_name: str
    method_name: str

    def __post_init__(self) -> None:
        if not is_class_name(self.class_name):
            raise MalformedSignature(f"bad class name {self.class_name!r}")
        if not _METHOD_RE.match(self.method_name):
            raise MalformedSignature(f"bad method name {self.method_name!r}")

    def __str__(self) -> str:
        return f"{self.phase.value}#{self.class_name}.{self.method_name}"

    @property
    def short(self) -> str:
        """``phase#Class.method`` with the package stripped, for display."""
        return f"{self.phase.value}#{self.class_name.rsplit('.', 1)[-1]}.{self.method_name}"


def parse_signature(text: str) -> ActionSignature:
    """Parse ``before#pkg.Class.method`` / ``after#pkg.Class.method``.

    >>> str(parse_signature("after#android.app.Activity.onPause"))
    'after#android.app.Activity.onPause'
    """
    m = _SIG_RE.match(text.strip())
    if m is None:
        raise MalformedSignature(f"expected before#/after# signature, got {text!r}")
    phase, cls, method = m.groups()
    return ActionSignature(Phase(phase), cls, method)


def print_signature(sig: ActionSignature) -> str:
    return str(sig)


class ClassHierarchy:
    """Single-inheritance class table: ``child -> parent`` (``None`` for roots)."""

    def __init__(self, parents: Mapping[str, Optional[str]] | None = None):
        self._parents: dict[str, Optional[str]] = dict(parents or {})
        self._ancestors: dict[str, frozenset[str]] = {}

    def __contains__(self, class_name: object) -> bool:
        return class_name in self._parents

    def __iter__(self) -> Iterator[str]:
        return iter(self._parents)

    def __len__(self) -> int:
        return len(self._parents)

    def parent(self, class_name: str) -> Optional[str]:
        if class_name not in self._parents:
            raise UnknownClass(class_name)
        return self._parents[class_name]

    def ancestors(self, class_name: str) -> frozenset[str]:
        """The class itself plus every transitive parent."""
        cached = self._ancestors.get(class_name)
        if cached is not None:
            return cached
        if class_name not in self._parents:
            raise UnknownClass(class_name)
        chain = []
        cur: Optional[str] = class_name
        while cur is not None:
            if cur in chain:
                raise ValueError(f"inheritance cycle through {cur}")
            chain.append(cur)
            cur = self._parents.get(cur)
        result = frozenset(chain)
        self._ancestors[class_name] = result
        return result

    def is_subclass(self, class_name: str, base: str) -> bool:
        return base in self.ancestors(class_name)

    def extended(self, parents: Mapping[str, Optional[str]]) -> "ClassHierarchy":
        """Return a copy with extra classes; existing entries are kept."""
        merged = dict(parents)
        merged.update(self._parents)
        return ClassHierarchy(merged)


@dataclass(frozen=True, slots=True)
class Event:
    phase: Phase
    class_name: str
    method_name: str
    receiver_id: int = 0
    component_id: int = 0
    args: tuple = ()
    source: Source = Source.APP

    @property
    def signature(self) -> ActionSignature:
        return ActionSignature(self.phase, self.class_name, self.method_name)

    @property
    def call_key(self) -> tuple[int, str, str]:
        return (self.receiver_id, self.class_name, self.method_name)

    def __str__(self) -> str:
        return f"{self.phase.value}#{self.class_name}.{self.method_name}"


Trace = list  # list[Event]; kept as a plain list so traces stay cheap to build


def well_formed_violation(trace: Sequence[Event]) -> Optional[int]:
    """Index of the first AfterCall without an open BeforeCall, else ``None``."""
    open_calls: dict[tuple[int, str, str], int] = {}
    for i, ev in enumerate(trace):
        key = ev.call_key
        if ev.phase is Phase.BEFORE:
            open_calls[key] = open_calls.get(key, 0) + 1
        else:
            if open_calls.get(key, 0) == 0:
                return i
            open_calls[key] -= 1
    return None


def signature_matches(sig: ActionSignature, ev: Event, hierarchy: ClassHierarchy) -> bool:
    if ev.class_name not in hierarchy:
        raise UnknownClass(ev.class_name)
    if sig.phase is not ev.phase or sig.method_name != ev.method_name:
        return False
    return hierarchy.is_subclass(ev.class_name, sig.class_name)


@dataclass(frozen=True)
class Exact:
    signature: ActionSignature

    def __str__(self) -> str:
        return str(self.signature)


@dataclass(frozen=True)
class AnyExcept:
    """Matches any event not matched by one of ``exclude``; binds it to ``binder``."""

    exclude: tuple[ActionSignature, ...]
    binder: Optional[str] = "e"

    def __post_init__(self) -> None:
        if not self.exclude:
            raise ValueError("AnyExcept needs a non-empty exclusion set")
        if len(set(self.exclude)) != len(self.exclude):
            raise ValueError("AnyExcept exclusion set has duplicates")
        if self.binder is not None and not is_identifier(self.binder):
            raise ValueError(f"bad binder {self.binder!r}")

    def __str__(self) -> str:
        name = self.binder or "_"
        return f"{name} not in {{{', '.join(map(str, self.exclude))}}}"


Guard = Union[Exact, AnyExcept]


def guard_matches(g: Guard, ev: Event, hierarchy: ClassHierarchy) -> Optional[dict[str, Event]]:
    """Return a (possibly empty) binding dict when ``g`` matches ``ev``, else ``None``."""
    if isinstance(g, Exact):
        return {} if signature_matches(g.signature, ev, hierarchy) else None
    for sig in g.exclude:
        if signature_matches(sig, ev, hierarchy):
            return None
    return {g.binder: ev} if g.binder else {}


def guard_signatures(g: Guard) -> tuple[ActionSignature, ...]:
    return (g.signature,) if isinstance(g, Exact) else g.exclude


@dataclass(frozen=True)
class Emit:
    signature: ActionSignature


@dataclass(frozen=True)
class EmitBound:
    variable: str


@dataclass(frozen=True)
class Special:
    name: str


OutputAction = Union[Emit, EmitBound, Special]


@dataclass(frozen=True)
class Transition:
    source: int
    target: int
    intercepted: Guard
    outputs: tuple[OutputAction, ...] = ()

    @property
    def suppresses(self) -> bool:
        """True when no output can re-emit the intercepted event."""
        for out in self.outputs:
            if isinstance(out, EmitBound):
                return False
            if isinstance(out, Emit) and isinstance(self.intercepted, Exact):
                if out.signature == self.intercepted.signature:
                    return False
        return True


@dataclass(frozen=True)
class State:
    id: int
    initial: bool = False


@dataclass(frozen=True)
class EnforcementModel:
    """An edit automaton bound to one lifecycle object and one API class.

    Structural invariants (single initial state, declared state references)
    are not enforced here so that a bad model can still be built and handed
    to the validator, which reports every problem at once.
    """

    name: str
    lifecycle_object: str
    api: str
    states: tuple[State, ...]
    transitions: tuple[Transition, ...] = ()

    @property
    def initial_states(self) -> list[int]:
        return [s.id for s in self.states if s.initial]

    @property
    def initial(self) -> int:
        ids = self.initial_states
        if len(ids) != 1:
            raise ValueError(f"model {self.name} has {len(ids)} initial states")
        return ids[0]

    @property
    def state_ids(self) -> frozenset[int]:
        return frozenset(s.id for s in self.states)

    def transitions_from(self, state: int) -> list[Transition]:
        return [t for t in self.transitions if t.source == state]

    def signatures(self) -> list[ActionSignature]:
        """Every signature appearing in guards or outputs, first-seen order."""
        seen: dict[ActionSignature, None] = {}
        for t in self.transitions:
            for sig in guard_signatures(t.intercepted):
                seen.setdefault(sig)
            for out in t.outputs:
                if isinstance(out, Emit):
                    seen.setdefault(out.signature)
        return list(seen)

    def guard_signatures(self) -> list[ActionSignature]:
        seen: dict[ActionSignature, None] = {}
        for t in self.transitions:
            for sig in guard_signatures(t.intercepted):
                seen.setdefault(sig)
        return list(seen)

    def uses_special(self, name: str) -> bool:
        return any(isinstance(o, Special) and o.name == name
                   for t in self.transitions for o in t.outputs)

    def classes(self) -> list[str]:
        """Classes the model governs: lifecycle object, API, then any others seen."""
        out = [self.lifecycle_object, self.api]
        for sig in self.signatures():
            if sig.class_name not in out and sig.class_name != ENFORCER_CLASS:
                out.append(sig.class_name)
        return out


def make_event(sig: Union[str, ActionSignature], *, receiver: int = 0, component: int = 0,
               args: Iterable = (), source: Source = Source.APP) -> Event:
    """Convenience constructor used by tests, demos and the simulator."""
    if isinstance(sig, str):
        sig = parse_signature(sig)
    return Event(sig.phase, sig.class_name, sig.method_name, receiver, component,
                 tuple(args), source)
