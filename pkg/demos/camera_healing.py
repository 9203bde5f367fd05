"""Replay the camera-leak scenario with and without its enforcement model.

Without the model, a second activity fails to open the camera because the
first one kept it across a pause. With the model, the camera is released on
pause and reacquired on resume under the handle the app already holds.

    python3 demos/camera_healing.py
"""

from enforcekit import Source, bundled_path, load_model
from enforcekit.sim import load_scenario, run_scenario


def describe(label, outcome) -> None:
    print(f"{label}: verdict {outcome.verdict.value}")
    for step, kind in outcome.exceptions:
        print(f"  exception at step {step}: {kind}")
    for leak in outcome.leaks:
        print(f"  leak: {leak}")


def main() -> None:
    scenario = load_scenario(bundled_path("scenarios", "plumeria_camera_leak.json"))
    model = load_model(bundled_path("models", "CameraReleaseOnPause.json"))

    describe("enforcement off", run_scenario(scenario, [model], enforcement=False))
    on = run_scenario(scenario, [model])
    describe("enforcement on", on)

    print("events added by the enforcer:")
    for e in on.trace_out:
        if e.source is Source.ENFORCER:
            print(f"  {e.phase.value}#{e.class_name}.{e.method_name} on receiver {e.receiver_id}")


if __name__ == "__main__":
    main()
