"""Walk a small buffering model over a toy trace, one event at a time.

The model holds back calls to ``opA`` and emits ``opAA`` in their place once
it sees what follows, so the printout shows which inputs were suppressed and
which outputs were inserted by the enforcer.

    python3 demos/buffer_rewrite.py
"""

from enforcekit import Source, bundled_path, load_catalog, load_model, load_trace, validate_model
from enforcekit.engine import EnforcementPlan, SessionConfig


def main() -> None:
    cat = load_catalog(bundled_path("catalog.fig1.json"))
    model = load_model(bundled_path("fig1", "OpsBuffer.json"))
    report = validate_model(model, cat)
    print(f"model {model.name}: {len(model.states)} states, {len(model.transitions)} transitions, "
          f"valid={report.ok}")

    session = EnforcementPlan([model], SessionConfig(cat)).session()
    for ev in load_trace(bundled_path("fig1", "fig1_input.jsonl")):
        out = session.dispatch(ev)
        shown = ", ".join(f"{e.method_name}{'*' if e.source is Source.ENFORCER else ''}" for e in out)
        print(f"  in {ev.phase.value:6} {ev.method_name:5} -> [{shown}]")

    rep = session.finalize()
    print(f"suppressed {rep.suppressed}, inserted {rep.inserted}, balanced {rep.balanced}")
    print("(* marks an event produced by the enforcer)")


if __name__ == "__main__":
    main()
