import itertools
import re

from hypothesis import given

from enforcekit import (
    AnyExcept, EmitBound, EnforcementModel, Exact, Phase, Special, State, Transition,
    guard_matches, make_event, parse_signature, validate_model,
)
from enforcekit.model import ActionSignature
from enforcekit.validation import guards_overlap

from strategies import models

ACT = "android.app.Activity"
CAM = "android.hardware.Camera"
sig = parse_signature


def _model(transitions, states=(State(0, True), State(1), State(2)), lifecycle=ACT, api=CAM):
    return EnforcementModel("T", lifecycle, api, tuple(states), tuple(transitions))


def _overlapping_pairs_by_enumeration(m, cat):
    """(i, j) pairs of same-state transitions that some catalog event satisfies together."""
    h = cat.hierarchy()
    events = [make_event(ActionSignature(p, c, meth))
              for c in cat.classes for meth in cat.methods(c) for p in Phase]
    pairs = set()
    for (i, t1), (j, t2) in itertools.combinations(enumerate(m.transitions), 2):
        if t1.source != t2.source:
            continue
        if any(guard_matches(t1.intercepted, ev, h) is not None
               and guard_matches(t2.intercepted, ev, h) is not None for ev in events):
            pairs.add((i, j))
    return pairs


def _reported_pairs(rep):
    out = set()
    for f in rep.warnings:
        if f.code == "OverlappingGuards":
            i, j = re.search(r"transitions (\d+) and (\d+)", f.message).groups()
            out.add((int(i), int(j)))
    return out


class TestBundledModels:
    def test_camera_model_is_clean(self, camera_model, android):
        rep = validate_model(camera_model, android)
        assert rep.errors == [] and rep.warnings == []

    def test_all_corpus_models_clean(self, corpus_models, android):
        assert len(corpus_models) == 19
        for m in corpus_models.values():
            rep = validate_model(m, android)
            assert rep.ok and not rep.warnings, (m.name, rep.errors, rep.warnings)

    def test_buffer_needs_ordered_evaluation(self, buffer_model, demo_catalog):
        rep = validate_model(buffer_model, demo_catalog)
        assert rep.ok


class TestErrors:
    def test_typo_method(self, android):
        m = _model([Transition(0, 1, Exact(sig(f"after#{CAM}.openn")))])
        assert validate_model(m, android).codes() == ["UnknownMethod"]

    def test_missing_initial(self):
        m = _model([], states=(State(0), State(1)))
        assert "MissingInitialState" in validate_model(m).codes()

    def test_multiple_initial(self):
        m = _model([], states=(State(0, True), State(1, True)))
        assert "MultipleInitialStates" in validate_model(m).codes()

    def test_dangling_state(self):
        m = _model([Transition(0, 7, Exact(sig(f"after#{CAM}.open")))])
        assert validate_model(m).codes() == ["DanglingStateRef"]

    def test_unbound_variable(self):
        m = _model([Transition(0, 1, Exact(sig(f"after#{CAM}.open")), (EmitBound("e"),))])
        assert validate_model(m).codes() == ["UnboundVariable"]

    def test_binder_name_must_agree(self):
        g = AnyExcept((sig(f"after#{CAM}.open"),), "x")
        m = _model([Transition(0, 1, g, (EmitBound("e"),))])
        assert validate_model(m).codes() == ["UnboundVariable"]

    def test_unknown_special(self):
        m = _model([Transition(0, 1, Exact(sig(f"after#{CAM}.open")), (Special("restart"),))])
        assert validate_model(m).codes() == ["UnknownSpecial"]

    def test_second_api_client_rejected(self, android):
        # one model governs one API class; a second library is a separate model
        m = _model([Transition(0, 1, Exact(sig("after#android.media.MediaPlayer.start")))])
        assert validate_model(m, android).codes() == ["ForeignClass"]

    def test_unknown_lifecycle_class(self, android):
        m = _model([], lifecycle="com.nowhere.Thing")
        assert validate_model(m, android).codes() == ["UnknownMethod"]

    def test_catalog_checks_skipped_without_catalog(self):
        m = _model([Transition(0, 1, Exact(sig(f"after#{CAM}.openn")))])
        assert validate_model(m).ok


class TestWarnings:
    def test_exact_and_wildcard_overlap(self, android):
        m = _model([
            Transition(1, 2, Exact(sig(f"before#{CAM}.open"))),
            Transition(1, 0, AnyExcept((sig(f"before#{ACT}.onPause"),), "e"), (EmitBound("e"),)),
            Transition(0, 1, Exact(sig(f"before#{ACT}.onCreate"))),
        ])
        rep = validate_model(m, android)
        assert rep.ok
        assert _reported_pairs(rep) == _overlapping_pairs_by_enumeration(m, android) == {(0, 1)}

    def test_wildcard_excluding_the_exact_does_not_overlap(self, android):
        g = AnyExcept((sig(f"before#{CAM}.open"),), "e")
        assert not guards_overlap(Exact(sig(f"before#{CAM}.open")), g, android)

    def test_subclass_exact_guards_overlap(self, android):
        a = Exact(sig(f"after#{ACT}.onPause"))
        b = Exact(sig("after#android.content.Context.onPause"))
        assert guards_overlap(a, b, android) and guards_overlap(b, a, android)

    def test_unreachable(self):
        m = _model([Transition(0, 1, Exact(sig(f"after#{CAM}.open")))])
        assert validate_model(m).warning_codes() == ["UnreachableState"]

    @given(models())
    def test_overlap_matches_enumeration(self, demo_catalog, m):
        rep = validate_model(m, demo_catalog)
        assert _reported_pairs(rep) == _overlapping_pairs_by_enumeration(m, demo_catalog)


class TestProperties:
    @given(models())
    def test_random_models_validate(self, demo_catalog, m):
        assert validate_model(m, demo_catalog).ok

    @given(models())
    def test_pure(self, demo_catalog, m):
        first, second = validate_model(m, demo_catalog), validate_model(m, demo_catalog)
        assert first == second
        assert first.to_dict() == second.to_dict()
