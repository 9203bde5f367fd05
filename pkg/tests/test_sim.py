import csv
import io

import pytest

from enforcekit import Phase, Source, bundled_path, load_catalog, make_event
from enforcekit.engine import EnforcementPlan, SessionConfig
from enforcekit.sim import (
    BadTemplateParams, MissingFixture, PolicySpec, ResourceRegistry, Scenario, ScenarioError,
    Template, Verdict, bench_overhead, derive_acceptor, judge, load_corpus, load_scenario,
    module_pool, run_corpus, run_scenario, scenario_catalog, simulate, write_csv,
)

CAM = "android.hardware.Camera"
ACT = "android.app.Activity"


@pytest.fixture(scope="module")
def plumeria():
    return load_scenario(bundled_path("scenarios", "plumeria_camera_leak.json"))


def _ev(text, recv=5, comp=1, source=Source.APP):
    return make_event(text, receiver=recv, component=comp, source=source)


class TestAcceptors:
    def test_invoke_when_callback(self, android):
        a = derive_acceptor("InvokeWhenCallback", f"{CAM}.open", f"{CAM}.release", "onPause",
                            hierarchy=android.hierarchy())
        leak = [_ev(f"after#{CAM}.open"), _ev(f"after#{ACT}.onPause", recv=1)]
        fixed = [_ev(f"after#{CAM}.open"), _ev(f"before#{CAM}.release"),
                 _ev(f"after#{ACT}.onPause", recv=1)]
        assert a.first_violation(leak) == 1
        assert a.accepts(fixed)

    def test_obligation_is_per_component(self, android):
        a = derive_acceptor("InvokeWhenCallback", f"{CAM}.open", f"{CAM}.release", "onPause",
                            hierarchy=android.hierarchy())
        assert a.accepts([_ev(f"after#{CAM}.open", comp=1), _ev(f"after#{ACT}.onPause", recv=2, comp=2)])

    def test_subclass_callbacks_count(self):
        cat = load_catalog().with_components({"app.Main": ACT})
        a = derive_acceptor("InvokeWhenCallback", f"{CAM}.open", f"{CAM}.release", "onPause",
                            hierarchy=cat.hierarchy())
        assert not a.accepts([_ev(f"after#{CAM}.open"), _ev("after#app.Main.onPause", recv=1)])

    def test_replace_with(self):
        a = derive_acceptor("ReplaceWith", "x.A.old", "x.A.new")
        assert a.first_violation([_ev("before#x.A.new"), _ev("before#x.A.old")]) == 1

    def test_do_not_invoke(self):
        a = derive_acceptor("DoNotInvoke", "x.R.start", "x.C.lock")
        assert a.accepts([_ev("before#x.C.lock"), _ev("after#x.R.start")])
        assert not a.accepts([_ev("after#x.R.start"), _ev("before#x.C.lock")])

    @pytest.mark.parametrize("template, callback", [
        ("InvokeWhenCallback", None), ("ReplaceWith", "onPause"), ("DoNotInvoke", "onStop")])
    def test_callback_arity(self, template, callback):
        with pytest.raises(BadTemplateParams):
            derive_acceptor(template, "x.A.a", "x.A.b", callback)

    def test_bad_method_name(self):
        with pytest.raises(BadTemplateParams):
            derive_acceptor("ReplaceWith", "noclass", "x.A.b")

    def test_spec_round_trip(self):
        spec = PolicySpec(Template.INVOKE_WHEN_CALLBACK, f"{CAM}.open", f"{CAM}.release", "onPause")
        assert PolicySpec.from_dict(spec.to_dict()) == spec
        assert "onPause" in spec.describe()


class TestRegistry:
    def test_exclusive_conflict(self, android):
        r = ResourceRegistry(android)
        assert r.apply(_ev(f"before#{CAM}.open", recv=5, comp=1)) is None
        assert r.apply(_ev(f"before#{CAM}.open", recv=6, comp=2)) == "CameraInUse"

    def test_release_frees(self, android):
        r = ResourceRegistry(android)
        r.apply(_ev(f"before#{CAM}.open", recv=5))
        r.apply(_ev(f"before#{CAM}.release", recv=5))
        assert r.apply(_ev(f"before#{CAM}.open", recv=6, comp=2)) is None

    def test_shared_resources_do_not_conflict(self, android):
        r = ResourceRegistry(android)
        mp = "android.media.MediaPlayer"
        assert r.apply(_ev(f"before#{mp}.<init>", recv=5)) is None
        assert r.apply(_ev(f"before#{mp}.<init>", recv=6, comp=2)) is None

    def test_after_events_have_no_effect(self, android):
        r = ResourceRegistry(android)
        r.apply(_ev(f"after#{CAM}.open", recv=5))
        assert r.holders == {}


def _scenario(script, kind="Activity"):
    return Scenario.from_dict({"name": "t", "components": [{"name": "c", "class": "app.C", "kind": kind}],
                               "script": script})


class TestSimulator:
    def test_lifecycle_order_enforced(self):
        s = _scenario([{"step": "lifecycle", "component": "c", "event": "create"},
                       {"step": "lifecycle", "component": "c", "event": "pause"}])
        with pytest.raises(ScenarioError):
            simulate(s)

    def test_service_lifecycle(self):
        s = _scenario([{"step": "lifecycle", "component": "c", "event": e}
                       for e in ("create", "startCommand", "startCommand", "destroy")], "Service")
        assert len(simulate(s).trace_in) == 8

    def test_call_on_dead_component(self):
        s = _scenario([{"step": "call", "component": "c", "class": CAM, "method": "open"}])
        with pytest.raises(ScenarioError):
            simulate(s)

    def test_unknown_receiver(self):
        s = _scenario([{"step": "lifecycle", "component": "c", "event": "create",
                        "body": [{"step": "call", "class": CAM, "method": "release", "receiver": "x"}]}])
        with pytest.raises(ScenarioError):
            simulate(s)

    def test_events_are_paired(self):
        s = _scenario([{"step": "lifecycle", "component": "c", "event": "create",
                        "body": [{"step": "call", "class": CAM, "method": "open", "receiver": "cam",
                                  "new": True}]}])
        phases = [(e.phase, e.method_name) for e in simulate(s).trace_in]
        assert phases == [(Phase.BEFORE, "onCreate"), (Phase.BEFORE, "open"), (Phase.AFTER, "open"),
                          (Phase.AFTER, "onCreate")]

    def test_leak_needs_idle_component(self):
        s = _scenario([{"step": "lifecycle", "component": "c", "event": "create",
                        "body": [{"step": "call", "class": CAM, "method": "open", "receiver": "cam",
                                  "new": True}]},
                       {"step": "lifecycle", "component": "c", "event": "start"},
                       {"step": "lifecycle", "component": "c", "event": "resume"}])
        assert simulate(s).leaks == []
        s.script.append({"step": "lifecycle", "component": "c", "event": "pause"})
        assert [lk.state for lk in simulate(s).leaks] == ["pause"]


class TestPlumeria:
    def test_without_enforcement(self, plumeria, camera_model):
        out = run_scenario(plumeria, [camera_model], enforcement=False)
        assert out.exceptions == [(15, "CameraInUse")]
        assert out.leaks and out.verdict is Verdict.VIOLATION_UNHEALED

    def test_with_enforcement(self, plumeria, camera_model):
        out = run_scenario(plumeria, [camera_model])
        assert out.verdict is Verdict.HEALED
        assert out.exceptions == [] and out.leaks == []
        assert out.report.resumes == 1 and out.report.balanced

    def test_resumed_camera_keeps_the_app_handle(self, plumeria, camera_model):
        out = run_scenario(plumeria, [camera_model])
        app_open = next(e for e in out.trace_in if e.method_name == "open")
        replayed = [e for e in out.trace_out if e.source is Source.ENFORCER and e.method_name == "open"]
        assert replayed and all(e.receiver_id == app_open.receiver_id for e in replayed)
        # the picture taken after the resume went to the reacquired camera
        later = [e for e in out.trace_out if e.method_name == "takePicture"]
        assert len(later) == 6

    def test_judge_uses_traces_only(self, plumeria, camera_model, android):
        out = run_scenario(plumeria, [camera_model])
        cat = scenario_catalog(plumeria)
        assert judge(plumeria.policies, out.trace_in, out.trace_in, cat)[0] is Verdict.VIOLATION_UNHEALED
        assert judge(plumeria.policies, out.trace_out, out.trace_out, cat)[0] is Verdict.NO_VIOLATION


class TestCorpus:
    def test_tally(self):
        report = run_corpus()
        assert len(report.cases) == 27
        assert report.tally() == (17, 10)
        assert report.mismatches == []

    def test_without_enforcement(self):
        counts = run_corpus(enforcement=False).counts
        assert counts == {"ViolationUnhealed": 17, "NoViolation": 10}

    def test_clean_cases_untouched(self):
        for case in run_corpus().cases:
            if case.verdict is Verdict.NO_VIOLATION:
                assert case.outcome.trace_out == case.outcome.trace_in, case.name

    def test_parallel_matches_serial(self):
        assert run_corpus(workers=4).to_dict() == run_corpus().to_dict()

    def test_text_report(self):
        text = run_corpus().to_text()
        assert text.splitlines()[-1] == "total 27: 17 Healed, 10 NoViolation, 0 other"

    def test_missing_dirs(self, tmp_path):
        with pytest.raises(MissingFixture):
            run_corpus(tmp_path / "nope")
        with pytest.raises(MissingFixture):
            run_corpus(tmp_path)

    def test_rows_are_numbered(self):
        assert [s.row for s in load_corpus()] == list(range(1, 28))


class TestBench:
    def test_pool_renames_repeats(self, corpus_models):
        pool = module_pool([corpus_models["CameraReleaseOnPause"]], list(corpus_models.values()), 40)
        names = [m.name for m in pool]
        assert len(set(names)) == 40
        assert names[0] == "CameraReleaseOnPause"
        assert "CameraReleaseOnPause_1" in names

    def test_pool_plans_build(self, corpus_models, android):
        pool = module_pool([], list(corpus_models.values()), 60)
        EnforcementPlan(pool, SessionConfig(android))

    def test_rows_and_csv(self, corpus_models, tmp_path):
        s = load_corpus()[1]
        rows = bench_overhead(s, [corpus_models[n] for n in s.models], list(corpus_models.values()),
                              n_modules=(1, 3), repetitions=2, runs_per_rep=2)
        assert [r.n_modules for r in rows] == [0, 1, 3]
        assert rows[0].overhead_pct == 0.0
        path = tmp_path / "bench.csv"
        text = write_csv(rows, path)
        assert path.read_text() == text
        parsed = list(csv.DictReader(io.StringIO(text)))
        assert list(parsed[0]) == ["n_modules", "mean_us_per_event", "overhead_pct"]
        assert len(parsed) == 3
