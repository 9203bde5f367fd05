"""Static checks run on a model before it is interpreted or turned into code."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .catalog import ApiCatalog
from .model import (
    ENFORCER_CLASS, SPECIAL_OPERATIONS, ActionSignature, AnyExcept, Emit, EmitBound,
    EnforcementModel, Exact, Guard, Phase, Special, guard_signatures,
)

ERROR_CODES = (
    "MissingInitialState", "MultipleInitialStates", "DanglingStateRef", "UnknownMethod",
    "ForeignClass", "UnboundVariable", "UnknownSpecial",
)
WARNING_CODES = ("OverlappingGuards", "UnreachableState")


@dataclass(frozen=True)
class Finding:
    code: str
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} at {self.location}: {self.message}"


@dataclass
class ValidationReport:
    errors: list[Finding] = field(default_factory=list)
    warnings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def codes(self) -> list[str]:
        return [f.code for f in self.errors]

    def warning_codes(self) -> list[str]:
        return [f.code for f in self.warnings]

    def to_dict(self) -> dict:
        conv = lambda fs: [{"code": f.code, "location": f.location, "message": f.message} for f in fs]
        return {"errors": conv(self.errors), "warnings": conv(self.warnings)}


def _sig_overlap(a: ActionSignature, b: ActionSignature, cat: Optional[ApiCatalog]) -> bool:
    if a.phase is not b.phase or a.method_name != b.method_name:
        return False
    if a.class_name == b.class_name:
        return True
    if cat is None or a.class_name not in cat or b.class_name not in cat:
        return False
    h = cat.hierarchy()
    # single inheritance: two classes share a subclass iff one contains the other
    return h.is_subclass(a.class_name, b.class_name) or h.is_subclass(b.class_name, a.class_name)


def _covers(excl: ActionSignature, sig: ActionSignature, cat: Optional[ApiCatalog]) -> bool:
    """True when every event matched by ``sig`` is also matched by ``excl``."""
    if excl.phase is not sig.phase or excl.method_name != sig.method_name:
        return False
    if excl.class_name == sig.class_name:
        return True
    if cat is None or sig.class_name not in cat or excl.class_name not in cat:
        return False
    return cat.hierarchy().is_subclass(sig.class_name, excl.class_name)


def guards_overlap(g1: Guard, g2: Guard, cat: Optional[ApiCatalog] = None) -> bool:
    if isinstance(g1, Exact) and isinstance(g2, Exact):
        return _sig_overlap(g1.signature, g2.signature, cat)
    if isinstance(g1, AnyExcept) and isinstance(g2, Exact):
        g1, g2 = g2, g1
    if isinstance(g1, Exact):
        return not any(_covers(s, g1.signature, cat) for s in g2.exclude)
    # two wildcards: they share any event outside both exclusion sets
    if cat is None:
        return True
    excluded = set(g1.exclude) | set(g2.exclude)
    for cls in cat.classes:
        for method in cat.methods(cls):
            for phase in Phase:
                sig = ActionSignature(phase, cls, method)
                if not any(_covers(x, sig, cat) for x in excluded):
                    return True
    return False


def validate_model(m: EnforcementModel, cat: Optional[ApiCatalog] = None) -> ValidationReport:
    """Check ``m``; catalog-dependent checks are skipped when ``cat`` is None."""
    rep = ValidationReport()
    err = lambda code, loc, msg: rep.errors.append(Finding(code, loc, msg))
    warn = lambda code, loc, msg: rep.warnings.append(Finding(code, loc, msg))

    initials = m.initial_states
    if not initials:
        err("MissingInitialState", m.name, "no state is marked initial")
    elif len(initials) > 1:
        err("MultipleInitialStates", m.name, f"states {initials} are all initial")

    declared = m.state_ids
    allowed_classes = {m.lifecycle_object, m.api, ENFORCER_CLASS}

    if cat is not None:
        for cls in (m.lifecycle_object, m.api):
            if cls not in cat:
                err("UnknownMethod", m.name, f"class {cls} is not in the catalog")

    def check_sig(sig: ActionSignature, loc: str) -> None:
        if sig.class_name not in allowed_classes:
            err("ForeignClass", loc, f"{sig} is neither on {m.lifecycle_object} nor on {m.api}")
        if cat is None or sig.class_name == ENFORCER_CLASS:
            return
        if sig.class_name not in cat:
            err("UnknownMethod", loc, f"class {sig.class_name} is not in the catalog")
        elif not cat.has_method(sig.class_name, sig.method_name):
            err("UnknownMethod", loc, f"{sig.class_name} has no method {sig.method_name}")

    for i, t in enumerate(m.transitions):
        loc = f"transition[{i}] {t.source}->{t.target}"
        for sid in (t.source, t.target):
            if sid not in declared:
                err("DanglingStateRef", loc, f"state {sid} is not declared")
        for sig in guard_signatures(t.intercepted):
            check_sig(sig, loc)
        binder = t.intercepted.binder if isinstance(t.intercepted, AnyExcept) else None
        for out in t.outputs:
            if isinstance(out, Emit):
                check_sig(out.signature, loc)
            elif isinstance(out, EmitBound):
                if out.variable != binder:
                    err("UnboundVariable", loc, f"output {out.variable!r} is not bound by the guard")
            elif isinstance(out, Special):
                if out.name not in SPECIAL_OPERATIONS:
                    err("UnknownSpecial", loc, f"unknown special operation e.{out.name}")

    by_state: dict[int, list[tuple[int, Guard]]] = {}
    for i, t in enumerate(m.transitions):
        by_state.setdefault(t.source, []).append((i, t.intercepted))
    for state, guards in by_state.items():
        for a in range(len(guards)):
            for b in range(a + 1, len(guards)):
                (i, g1), (j, g2) = guards[a], guards[b]
                if guards_overlap(g1, g2, cat):
                    warn("OverlappingGuards", f"state {state}",
                         f"transitions {i} and {j} can match the same event; {i} wins")

    if len(initials) == 1:
        seen = {initials[0]}
        queue = deque(seen)
        while queue:
            s = queue.popleft()
            for t in m.transitions:
                if t.source == s and t.target not in seen:
                    seen.add(t.target)
                    queue.append(t.target)
        for s in m.states:
            if s.id not in seen:
                warn("UnreachableState", f"state {s.id}", "not reachable from the initial state")
    # a signature used twice in one transition would otherwise be reported twice
    rep.errors = list(dict.fromkeys(rep.errors))
    return rep
