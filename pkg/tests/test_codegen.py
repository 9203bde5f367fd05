import json
import os
import re

import pytest
from hypothesis import given

from enforcekit import EnforcementModel, ParseError, State, bundled_path, load_model
from enforcekit.codegen import (
    SIMSCRIPT, SWITCH_OPERATIONS, TargetProfile, UnsupportedProfile,
    UnvalidatedModel, dispatch_order, generate, hooked_methods, java_binary_name,
    load_simscript, output_name, section_report, switch_template,
)

from conftest import GOLDEN_DIR
from oracles import all_traces, decode_simscript, model_alphabet, session_outputs
from strategies import models

LAYERS = ["entry", "identity-check", "data-classes"]
_HOOK = re.compile(r'(?:findAndHookMethod\(target, "([^"]+)"|hookAllMethods\(target)')
_WRAP = re.compile(r"protected void (before|after)HookedMethod")


def structure_lines(g):
    """Section names, and for hook blocks the hooked methods with their wrappers."""
    out = []
    for name in section_report(g):
        out.append(name)
        if name.startswith("hook:"):
            method = None
            for line in g.section(name).splitlines():
                if (mh := _HOOK.search(line)):
                    method = mh.group(1) or "*"
                elif (mw := _WRAP.search(line)):
                    out.append(f"  {method} {mw.group(1)}")
    return out


def _is_layered(sections):
    hooks = sections[len(LAYERS):]
    return sections[:len(LAYERS)] == LAYERS and hooks and all(h.startswith("hook:") for h in hooks)


class TestSections:
    def test_camera_model(self, camera_model, android):
        g = generate(camera_model, "xposed-java", android)
        assert section_report(g) == LAYERS + ["hook:Camera", "hook:Activity"]

    def test_empty_model(self):
        m = EnforcementModel("Empty", "android.app.Activity", "android.hardware.Camera", (State(0, True),))
        assert section_report(generate(m)) == ["entry", "identity-check"]

    def test_spans_tile_in_order(self, corpus_models, android):
        for m in corpus_models.values():
            g = generate(m, "xposed-java", android)
            spans = [span for _, span in g.section_index]
            assert all(a <= b for a, b in spans)
            assert all(prev[1] < nxt[0] for prev, nxt in zip(spans, spans[1:]))
            assert spans[-1][1] == len(g.source_text.splitlines())

    def test_every_hook_has_a_wrapper(self, corpus_models, android):
        for m in corpus_models.values():
            lines = structure_lines(generate(m, "xposed-java", android))
            for i, line in enumerate(lines):
                if line.startswith("hook:"):
                    assert i + 1 < len(lines) and lines[i + 1].startswith("  "), (m.name, line)

    def test_wrappers_cover_the_guards(self, camera_model, android):
        lines = structure_lines(generate(camera_model, "xposed-java", android))
        assert lines == LAYERS + ["hook:Camera", "  open after", "  release before",
                                  "hook:Activity", "  onCreate before", "  onPause after",
                                  "  onResume before", "  onResume after"]

    @pytest.mark.parametrize("name", sorted(p.stem for p in bundled_path("models").glob("*.json")))
    def test_golden(self, name, corpus_models, android):
        g = generate(corpus_models[name], "xposed-java", android)
        text = "\n".join(structure_lines(g)) + "\n"
        path = GOLDEN_DIR / f"{name}.sections.txt"
        if os.environ.get("ENFORCEKIT_UPDATE_GOLDEN"):
            path.write_text(text)
        assert path.read_text() == text
        assert _is_layered(section_report(g))


class TestSwitch:
    def test_profiles_share_switch(self, corpus_models, android):
        for m in corpus_models.values():
            java = generate(m, "xposed-java", android)
            sim = generate(m, "simscript", android)
            assert java.switch_template == sim.switch_template == switch_template(m)

    def test_java_embeds_substituted_switch(self, camera_model, android):
        g = generate(camera_model, "xposed-java", android)
        body = [ln.strip() for ln in g.switch_text.splitlines()]
        data = [ln.strip() for ln in g.section("data-classes").splitlines()]
        start = data.index(body[0])
        assert data[start:start + len(body)] == body

    def test_no_placeholders_left(self, corpus_models, android):
        for m in corpus_models.values():
            for prof in ("xposed-java", "simscript"):
                assert "$" not in generate(m, prof, android).switch_text

    def test_suppression_rendered(self, android):
        m = load_model(bundled_path("models", "ReplaceManagedQuery.json"))
        text = generate(m, "simscript", android).switch_text
        assert "drop(event);" in text and 'emit(key, "before#' in text


class TestSimScript:
    def test_is_json_with_dispatch(self, camera_model, android):
        g = generate(camera_model, "simscript", android)
        data = json.loads(g.source_text)
        assert data["profile"] == "simscript"
        assert {int(k): v for k, v in data["dispatch"].items()} == dispatch_order(camera_model)
        assert section_report(g) == ["header", "model", "dispatch", "switch"]

    def test_round_trip(self, corpus_models, android):
        for m in corpus_models.values():
            assert load_simscript(generate(m, "simscript", android).source_text) == m

    def test_tampered_dispatch_rejected(self, camera_model, android):
        data = json.loads(generate(camera_model, "simscript", android).source_text)
        data["dispatch"]["0"] = list(reversed(data["dispatch"]["0"]))
        with pytest.raises(ParseError):
            load_simscript(json.dumps(data))

    def test_switch_decodes_to_equivalent_model(self, camera_model, android):
        decoded = decode_simscript(generate(camera_model, "simscript", android).source_text)
        traces = list(all_traces(model_alphabet(camera_model, android), 4))
        assert session_outputs(decoded, android, traces) == session_outputs(camera_model, android, traces)

    @given(models())
    def test_random_models_decode(self, demo_catalog, m):
        decoded = decode_simscript(generate(m, "simscript", demo_catalog).source_text)
        traces = list(all_traces(model_alphabet(m, demo_catalog), 3))
        assert session_outputs(decoded, demo_catalog, traces) == session_outputs(m, demo_catalog, traces)


class TestGenerate:
    @given(models())
    def test_deterministic(self, demo_catalog, m):
        a = generate(m, "xposed-java", demo_catalog)
        b = generate(m, "xposed-java", demo_catalog)
        assert a.source_text == b.source_text and a.section_index == b.section_index

    @given(models())
    def test_random_models_are_layered(self, demo_catalog, m):
        sections = section_report(generate(m, "xposed-java", demo_catalog))
        if m.transitions:
            assert _is_layered(sections)
        else:
            assert sections == ["entry", "identity-check"]

    def test_unknown_profile(self, camera_model):
        with pytest.raises(UnsupportedProfile):
            generate(camera_model, "kotlin")

    def test_invalid_model(self, camera_model):
        bad = EnforcementModel("Bad", "android.app.Activity", "android.hardware.Camera", (State(0),))
        with pytest.raises(UnvalidatedModel):
            generate(bad)

    def test_profile_must_populate_everything(self):
        with pytest.raises(ValueError):
            TargetProfile("half", "txt", {"state_of": "s"})
        with pytest.raises(ValueError):
            TargetProfile("noslots", "txt", dict.fromkeys(SWITCH_OPERATIONS, "x"),
                          required_slots=("entry",))

    def test_output_names(self, camera_model):
        assert output_name(camera_model, "xposed-java") == "CameraReleaseOnPause.xposed-java.txt"
        assert output_name(camera_model, SIMSCRIPT) == "CameraReleaseOnPause.simscript.json"

    def test_binary_names(self):
        assert java_binary_name("android.os.PowerManager.WakeLock") == "android.os.PowerManager$WakeLock"
        assert java_binary_name("android.hardware.Camera") == "android.hardware.Camera"

    def test_wildcard_hooks_everything(self, buffer_model):
        plan = hooked_methods(buffer_model)
        assert list(plan) == ["demo.Ops", "demo.Component"]
        assert "*" in plan["demo.Ops"] and "*" in plan["demo.Component"]
