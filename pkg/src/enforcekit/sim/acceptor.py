"""Policy acceptors: the ground-truth oracle for verdicts.

Each acceptor is derived directly from a policy template instance and never
looks at an enforcement model, so agreement between an enforced trace and
its acceptor is an independent check on the engine.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional

from ..model import ClassHierarchy, EnforceKitError, Event, Phase


class BadTemplateParams(EnforceKitError, ValueError):
    pass


class Template(enum.Enum):
    INVOKE_WHEN_CALLBACK = "InvokeWhenCallback"
    REPLACE_WITH = "ReplaceWith"
    DO_NOT_INVOKE = "DoNotInvoke"


def _split(qualified: str) -> tuple[str, str]:
    cls, dot, method = qualified.rpartition(".")
    if not dot or not cls or not method:
        raise BadTemplateParams(f"expected Class.method, got {qualified!r}")
    return cls, method


@dataclass(frozen=True)
class PolicySpec:
    template: Template
    method_a: str
    method_b: str
    callback: Optional[str] = None
    lifecycle: str = "android.app.Activity"

    @classmethod
    def from_dict(cls, d: dict) -> "PolicySpec":
        try:
            return cls(Template(d["template"]), d["method_a"], d["method_b"], d.get("callback"),
                       d.get("lifecycle", "android.app.Activity"))
        except (KeyError, ValueError) as exc:
            raise BadTemplateParams(f"bad policy {d!r}: {exc}") from exc

    def to_dict(self) -> dict:
        out = {"template": self.template.value, "method_a": self.method_a, "method_b": self.method_b}
        if self.callback is not None:
            out["callback"] = self.callback
            out["lifecycle"] = self.lifecycle
        return out

    def describe(self) -> str:
        a, b = self.method_a, self.method_b
        if self.template is Template.INVOKE_WHEN_CALLBACK:
            return f"if {a} is invoked, invoke {b} when {self.callback}"
        if self.template is Template.REPLACE_WITH:
            return f"if {a} is invoked, replace it with {b}"
        return f"if {a} is invoked, do not invoke {b}"


class PolicyAcceptor:
    """Finite-state acceptor for one policy instance, run over a whole trace.

    State is kept per key: (component, receiver) obligations for
    InvokeWhenCallback and per-component flags for DoNotInvoke.  The
    rejecting sink is global: once a violation is seen the trace is rejected.
    """

    def __init__(self, spec: PolicySpec, hierarchy: Optional[ClassHierarchy] = None):
        self.spec = spec
        self.hierarchy = hierarchy
        self.a_class, self.a_method = _split(spec.method_a)
        self.b_class, self.b_method = _split(spec.method_b)

    def _is(self, ev: Event, cls: str, method: str) -> bool:
        if ev.method_name != method:
            return False
        if ev.class_name == cls:
            return True
        h = self.hierarchy
        return h is not None and ev.class_name in h and h.is_subclass(ev.class_name, cls)

    def first_violation(self, trace: Iterable[Event]) -> Optional[int]:
        """Index of the event that drives the acceptor into its rejecting sink."""
        t = self.spec.template
        obligations: set[tuple[int, int]] = set()
        started: set[int] = set()
        for i, ev in enumerate(trace):
            if t is Template.REPLACE_WITH:
                if ev.phase is Phase.BEFORE and self._is(ev, self.a_class, self.a_method):
                    return i
            elif t is Template.DO_NOT_INVOKE:
                if ev.phase is Phase.AFTER and self._is(ev, self.a_class, self.a_method):
                    started.add(ev.component_id)
                elif (ev.phase is Phase.BEFORE and ev.component_id in started
                      and self._is(ev, self.b_class, self.b_method)):
                    return i
            else:
                if ev.phase is Phase.AFTER and self._is(ev, self.a_class, self.a_method):
                    obligations.add((ev.component_id, ev.receiver_id))
                elif ev.phase is Phase.BEFORE and self._is(ev, self.b_class, self.b_method):
                    obligations = {o for o in obligations if o[1] != ev.receiver_id}
                elif (ev.phase is Phase.AFTER
                      and self._is(ev, self.spec.lifecycle, self.spec.callback)
                      and any(c == ev.component_id for c, _ in obligations)):
                    return i
        return None

    def accepts(self, trace: Iterable[Event]) -> bool:
        return self.first_violation(trace) is None


def derive_acceptor(template, method_a: str, method_b: str, callback: Optional[str] = None, *,
                    lifecycle: str = "android.app.Activity",
                    hierarchy: Optional[ClassHierarchy] = None) -> PolicyAcceptor:
    template = Template(template)
    needs_callback = template is Template.INVOKE_WHEN_CALLBACK
    if needs_callback and not callback:
        raise BadTemplateParams(f"{template.value} needs a callback")
    if not needs_callback and callback:
        raise BadTemplateParams(f"{template.value} takes no callback")
    return PolicyAcceptor(PolicySpec(template, method_a, method_b, callback, lifecycle), hierarchy)


def acceptor_for(spec: PolicySpec, hierarchy: Optional[ClassHierarchy] = None) -> PolicyAcceptor:
    return derive_acceptor(spec.template, spec.method_a, spec.method_b, spec.callback,
                           lifecycle=spec.lifecycle, hierarchy=hierarchy)
