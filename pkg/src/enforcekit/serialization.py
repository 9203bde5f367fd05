"""JSON encodings for enforcement models and JSONL encodings for traces."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Mapping, Union

from .catalog import ParseError
from .model import (
    AnyExcept, EmitBound, Emit, EnforceKitError, EnforcementModel, Event, Exact,
    MalformedSignature, OutputAction, Phase, Source, Special, State, Transition,
    parse_signature, well_formed_violation,
)


class IllFormedTrace(EnforceKitError, ValueError):
    pass


PathLike = Union[str, Path]


def _guard_from(d: Mapping[str, Any]):
    kind = d["kind"]
    if kind == "exact":
        return Exact(parse_signature(d["signature"]))
    if kind == "anyExcept":
        return AnyExcept(tuple(parse_signature(s) for s in d["exclude"]), d.get("binder"))
    raise ParseError(f"unknown guard kind {kind!r}")


def _guard_to(g) -> dict:
    if isinstance(g, Exact):
        return {"kind": "exact", "signature": str(g.signature)}
    out = {"kind": "anyExcept", "exclude": [str(s) for s in g.exclude]}
    if g.binder is not None:
        out["binder"] = g.binder
    return out


def _output_from(d: Mapping[str, Any]) -> OutputAction:
    kind, value = d["kind"], d["value"]
    if kind == "emit":
        return Emit(parse_signature(value))
    if kind == "emitBound":
        return EmitBound(value)
    if kind == "special":
        # surface form ``e.resume`` is accepted as well as the bare name
        return Special(value[2:] if value.startswith("e.") else value)
    raise ParseError(f"unknown output kind {kind!r}")


def _output_to(o: OutputAction) -> dict:
    if isinstance(o, Emit):
        return {"kind": "emit", "value": str(o.signature)}
    if isinstance(o, EmitBound):
        return {"kind": "emitBound", "value": o.variable}
    return {"kind": "special", "value": o.name}


def model_from_dict(data: Mapping[str, Any]) -> EnforcementModel:
    """Decode a model; raises ParseError on schema violations.

    More than one initial state is rejected here.  A missing initial state or
    a dangling state reference is left for ``validate_model`` to report.
    """
    try:
        states = tuple(State(int(s["id"]), bool(s.get("initial", False))) for s in data["states"])
        transitions = tuple(
            Transition(int(t["from"]), int(t["to"]), _guard_from(t["intercepted"]),
                       tuple(_output_from(o) for o in t.get("outputs", ())))
            for t in data["transitions"]
        )
        model = EnforcementModel(str(data["name"]), str(data["lifecycleObject"]),
                                 str(data["api"]), states, transitions)
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError, MalformedSignature) as exc:
        raise ParseError(f"malformed model: {exc!r}") from exc
    if len({s.id for s in states}) != len(states):
        raise ParseError(f"model {model.name}: duplicate state ids")
    if len(model.initial_states) > 1:
        raise ParseError(f"model {model.name}: {len(model.initial_states)} initial states")
    return model


def model_to_dict(m: EnforcementModel) -> dict:
    return {
        "name": m.name,
        "lifecycleObject": m.lifecycle_object,
        "api": m.api,
        "states": [{"id": s.id, "initial": s.initial} for s in m.states],
        "transitions": [
            {"from": t.source, "to": t.target, "intercepted": _guard_to(t.intercepted),
             "outputs": [_output_to(o) for o in t.outputs]}
            for t in m.transitions
        ],
    }


def _read_json(path: PathLike) -> Any:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        context = lines[exc.lineno - 1] if 0 < exc.lineno <= len(lines) else ""
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}: {context.strip()!r}") from exc


def load_model(path: PathLike) -> EnforcementModel:
    data = _read_json(path)
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top-level value must be an object")
    try:
        return model_from_dict(data)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def dump_model(m: EnforcementModel) -> str:
    return json.dumps(model_to_dict(m), indent=2) + "\n"


def store_model(m: EnforcementModel, path: PathLike) -> None:
    Path(path).write_text(dump_model(m))


def load_models(directory: PathLike) -> list[EnforcementModel]:
    return [load_model(p) for p in sorted(Path(directory).glob("*.json"))]


# --- traces -----------------------------------------------------------------

def event_to_dict(ev: Event) -> dict:
    return {"phase": ev.phase.value, "class": ev.class_name, "method": ev.method_name,
            "receiver": ev.receiver_id, "component": ev.component_id,
            "args": list(ev.args), "source": ev.source.value}


def event_from_dict(d: Mapping[str, Any]) -> Event:
    args = d.get("args", [])
    if not isinstance(args, list) or not all(isinstance(a, (str, int, bool)) for a in args):
        raise ParseError(f"args must be a list of scalars: {args!r}")
    return Event(Phase(d["phase"]), str(d["class"]), str(d["method"]),
                 int(d.get("receiver", 0)), int(d.get("component", 0)),
                 tuple(args), Source(d.get("source", "app")))


def dumps_trace(trace: Iterable[Event]) -> str:
    return "".join(json.dumps(event_to_dict(ev)) + "\n" for ev in trace)


def loads_trace(text: str, *, origin: str = "<string>") -> list[Event]:
    trace = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            trace.append(event_from_dict(json.loads(line)))
        except ParseError as exc:
            raise ParseError(f"{origin}:{lineno}: {exc}") from exc
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{origin}:{lineno}: {exc!r}: {line.strip()!r}") from exc
    bad = well_formed_violation(trace)
    if bad is not None:
        raise IllFormedTrace(f"{origin}: event {bad + 1} ({trace[bad]}) returns from a call "
                             "that never started")
    return trace


def load_trace(path: PathLike) -> list[Event]:
    return loads_trace(Path(path).read_text(), origin=str(path))


def store_trace(trace: Iterable[Event], path: PathLike) -> None:
    Path(path).write_text(dumps_trace(trace))
