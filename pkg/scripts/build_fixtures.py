"""Regenerate the bundled models and scenario corpus under src/enforcekit/data.

The 27 corpus cases are reconstructions: each scripts the smallest app
behaviour that exercises one resource policy on the reported API and
lifecycle object.  Apps with several rows share one script and differ only
in the policy and model under test.

Run from the repository root:  python3 scripts/build_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "src" / "enforcekit" / "data"

ACTIVITY = "android.app.Activity"
SERVICE = "android.app.Service"
CAMERA = "android.hardware.Camera"
PLAYER = "android.media.MediaPlayer"
RECORDER = "android.media.MediaRecorder"
SENSORS = "android.hardware.SensorManager"
LOCATION = "android.location.LocationManager"
CALLBACKS = "android.os.RemoteCallbackList"
WAKELOCK = "android.os.PowerManager.WakeLock"
MULTICAST = "android.net.wifi.WifiManager.MulticastLock"
THREAD = "java.lang.Thread"
BLUETOOTH = "android.bluetooth.BluetoothAdapter"
LRU = "android.util.LruCache"
RESOURCES = "android.content.res.Resources"
RESOLVER = "android.content.ContentResolver"
DRAWABLES = "android.support.v7.widget.AppCompatDrawableManager"


# --- models -------------------------------------------------------------------

def exact(sig):
    return {"kind": "exact", "signature": sig}


def emit(*sigs):
    return [{"kind": "emit", "value": s} for s in sigs]


def tr(src, dst, sig, outputs=None):
    """Transition on an exact signature; ``outputs=None`` means pass-through."""
    return {"from": src, "to": dst, "intercepted": exact(sig),
            "outputs": emit(sig) if outputs is None else outputs}


def model(name, lifecycle, api, n_states, transitions):
    return {"name": name, "lifecycleObject": lifecycle, "api": api,
            "states": [{"id": i, "initial": i == 0} for i in range(n_states)],
            "transitions": transitions}


def invoke_when_callback(name, lifecycle, api, acquire, release, callback):
    """0 --after#acquire--> 1 --before#release--> 0; the callback in 1 inserts the release."""
    cb = f"after#{lifecycle}.{callback}"
    rel = f"before#{api}.{release}"
    ts = [tr(0, 1, f"after#{api}.{a}") for a in acquire]
    ts.append(tr(1, 0, rel))
    ts.append(tr(1, 0, cb, emit(rel, cb)))
    return model(name, lifecycle, api, 2, ts)


def replace_with(name, lifecycle, old, api, new):
    return model(name, lifecycle, api, 1, [
        tr(0, 0, f"before#{lifecycle}.{old}", emit(f"before#{api}.{new}")),
    ])


def camera_release_on_pause():
    a_open = f"after#{CAMERA}.open"
    b_release = f"before#{CAMERA}.release"
    a_pause = f"after#{ACTIVITY}.onPause"
    a_resume = f"after#{ACTIVITY}.onResume"
    return model("CameraReleaseOnPause", ACTIVITY, CAMERA, 4, [
        tr(0, 1, f"before#{ACTIVITY}.onCreate"),
        tr(0, 1, f"before#{ACTIVITY}.onResume"),
        tr(1, 2, a_open),
        tr(2, 1, b_release),
        tr(1, 0, a_pause),
        tr(2, 3, a_pause, emit(b_release, a_pause)),
        tr(3, 2, a_resume, emit(a_resume) + [{"kind": "special", "value": "e.resume"}]),
        # the app took the camera back by itself; resume has nothing to do
        tr(3, 2, a_open),
        # an activity instance first seen while already holding a camera
        tr(0, 2, a_open),
    ])


def fig1():
    ops = "demo.Ops"
    op = lambda m: f"before#{ops}.{m}"
    bound = [{"kind": "emitBound", "value": "e"}]
    any_except = lambda *ms: {"kind": "anyExcept", "exclude": [op(m) for m in ms], "binder": "e"}
    return model("OpsBuffer", "demo.Component", ops, 2, [
        tr(0, 0, op("opA"), []),
        {"from": 0, "to": 1, "intercepted": any_except("opA"), "outputs": bound},
        tr(1, 1, op("opA"), emit(op("opAA"))),
        tr(1, 0, op("stop"), emit(op("opAA"), op("stop"))),
        {"from": 1, "to": 1, "intercepted": any_except("opA", "stop"), "outputs": bound},
    ])


MODELS = [
    replace_with("ReplaceManagedQuery", ACTIVITY, "managedQuery", RESOLVER, "query"),
    invoke_when_callback("BluetoothDisableOnDestroy", ACTIVITY, BLUETOOTH, ["enable"], "disable", "onDestroy"),
    invoke_when_callback("MediaPlayerReleaseOnPause", ACTIVITY, PLAYER, ["<init>", "create"], "release", "onPause"),
    invoke_when_callback("LruCacheEvictAllOnDestroy", ACTIVITY, LRU, ["<init>"], "evictAll", "onDestroy"),
    camera_release_on_pause(),
    invoke_when_callback("CameraStopPreviewOnPause", ACTIVITY, CAMERA, ["startPreview"], "stopPreview", "onPause"),
    model("CameraNoLockAfterRecorderStart", RECORDER, CAMERA, 2, [
        tr(0, 1, f"after#{RECORDER}.start"),
        tr(1, 1, f"before#{CAMERA}.lock", []),
    ]),
    invoke_when_callback("SensorUnregisterOnPause", ACTIVITY, SENSORS, ["registerListener"], "unregisterListener", "onPause"),
    invoke_when_callback("LocationRemoveUpdatesOnPause", ACTIVITY, LOCATION, ["requestLocationUpdates"], "removeUpdates", "onPause"),
    invoke_when_callback("CallbackListUnregisterOnPause", ACTIVITY, CALLBACKS, ["register"], "unregister", "onPause"),
    invoke_when_callback("SensorUnregisterOnServiceDestroy", SERVICE, SENSORS, ["registerListener"], "unregisterListener", "onDestroy"),
    invoke_when_callback("LocationRemoveUpdatesOnServiceDestroy", SERVICE, LOCATION, ["requestLocationUpdates"], "removeUpdates", "onDestroy"),
    invoke_when_callback("CallbackListUnregisterOnServiceDestroy", SERVICE, CALLBACKS, ["register"], "unregister", "onDestroy"),
    replace_with("ReplaceResourcesGetDrawable", RESOURCES, "getDrawable", DRAWABLES, "getDrawable"),
    invoke_when_callback("CameraReleaseAfterPreviewOnPause", ACTIVITY, CAMERA, ["startPreview"], "release", "onPause"),
    invoke_when_callback("WakeLockReleaseOnPause", ACTIVITY, WAKELOCK, ["acquire"], "release", "onPause"),
    invoke_when_callback("ThreadInterruptOnServiceDestroy", SERVICE, THREAD, ["<init>"], "interrupt", "onDestroy"),
    invoke_when_callback("MulticastLockReleaseOnDestroy", ACTIVITY, MULTICAST, ["acquire"], "release", "onDestroy"),
    invoke_when_callback("MulticastLockReleaseOnServiceDestroy", SERVICE, MULTICAST, ["acquire"], "release", "onDestroy"),
]


# --- scenario scripts -----------------------------------------------------------

def lc(component, event, *body):
    return {"step": "lifecycle", "component": component, "event": event, "body": list(body)}


def call(cls, method, receiver=None, *, new=False, args=(), component=None):
    d = {"step": "call", "class": cls, "method": method}
    if component is not None:
        d["component"] = component
    if receiver is not None:
        d["receiver"] = receiver
    if new:
        d["new"] = True
    if args:
        d["args"] = list(args)
    return d


def user(label, *calls, component="main"):
    out = [{"step": "user", "label": label}]
    out += [dict(c, component=component) for c in calls]
    return out


def activity(name, cls):
    return {"name": name, "class": cls, "kind": "Activity"}


def service(name, cls):
    return {"name": name, "class": cls, "kind": "Service"}


def opening(c="main", create=(), resume=()):
    return [lc(c, "create", *create), lc(c, "start"), lc(c, "resume", *resume)]


def closing(c="main", pause=(), destroy=()):
    return [lc(c, "pause", *pause), lc(c, "stop"), lc(c, "destroy", *destroy)]


APPS = {
    "AndroidHacks": ([activity("main", "com.androidhacks.ContactsActivity")],
                     opening(create=[call(ACTIVITY, "managedQuery", "@self", args=["content://contacts"])])
                     + closing()),
    "BlueChat": ([activity("main", "com.bluechat.BluetoothChat")],
                 opening(create=[call(BLUETOOTH, "getDefaultAdapter"),
                                 call(BLUETOOTH, "enable", "bt", new=True)])
                 + user("send message") + closing()),
    "CheDengWo": ([activity("main", "com.chedengwo.PlayerActivity")],
                  opening(create=[call(PLAYER, "<init>", "mp", new=True),
                                  call(PLAYER, "setDataSource", "mp", args=["song.mp3"]),
                                  call(PLAYER, "prepare", "mp"), call(PLAYER, "start", "mp")])
                  + user("listen") + closing()),
    "ErWeiMaL": ([activity("main", "com.erweima.ScanActivity")],
                 opening(resume=[call(PLAYER, "<init>", "beep", new=True),
                                 call(PLAYER, "setDataSource", "beep", args=["beep.ogg"]),
                                 call(PLAYER, "prepare", "beep")])
                 + user("scan code", call(PLAYER, "start", "beep")) + closing()),
    "FontMaster": ([activity("main", "com.fontmaster.FontListActivity")],
                   opening(create=[call(LRU, "<init>", "cache", new=True, args=[4096]),
                                   call(LRU, "put", "cache", args=["serif"])])
                   + user("browse fonts", call(LRU, "get", "cache", args=["serif"])) + closing()),
    "Foocam": ([activity("main", "com.foocam.CameraActivity")],
               opening(resume=[call(CAMERA, "open", "cam", new=True),
                               call(CAMERA, "setPreviewDisplay", "cam"),
                               call(CAMERA, "startPreview", "cam")])
               + user("take picture", call(CAMERA, "takePicture", "cam"))
               + [lc("main", "pause", call(CAMERA, "release", "cam")), lc("main", "stop"),
                  lc("main", "restart"), lc("main", "start"),
                  lc("main", "resume", call(CAMERA, "open", "cam", new=True),
                     call(CAMERA, "setPreviewDisplay", "cam"), call(CAMERA, "startPreview", "cam"))]
               + closing(pause=[call(CAMERA, "release", "cam")])),
    "FromCat": ([activity("main", "com.fromcat.RecorderActivity")],
                opening(create=[call(PLAYER, "create", "tone", new=True, args=["tone.ogg"])],
                        resume=[call(CAMERA, "open", "cam", new=True),
                                call(CAMERA, "lock", "cam"), call(CAMERA, "unlock", "cam"),
                                call(RECORDER, "<init>", "rec", new=True),
                                call(RECORDER, "setCamera", "rec"), call(RECORDER, "prepare", "rec")])
                + user("record", call(RECORDER, "start", "rec"))
                + user("stop recording", call(RECORDER, "stop", "rec"), call(RECORDER, "release", "rec"))
                + closing(pause=[call(CAMERA, "release", "cam")])),
    "GetBackGPS": ([activity("main", "com.getbackgps.CompassActivity"),
                    service("nav", "com.getbackgps.NavigationService")],
                   opening(resume=[call(SENSORS, "registerListener", "compass", new=True)])
                   + [lc("nav", "create",
                         call(SENSORS, "registerListener", "motion", new=True),
                         call(LOCATION, "requestLocationUpdates", "gps", new=True, args=["gps"]),
                         call(CALLBACKS, "<init>", "clients", new=True),
                         call(CALLBACKS, "register", "clients")),
                      lc("nav", "startCommand")]
                   + user("mark position", call(LOCATION, "getLastKnownLocation", "gps", component="nav"))
                   + [lc("main", "pause", call(SENSORS, "unregisterListener", "compass")),
                      lc("main", "stop"), lc("nav", "startCommand"), lc("main", "restart"),
                      lc("main", "start"),
                      lc("main", "resume", call(SENSORS, "registerListener", "compass", new=True))]
                   + closing(pause=[call(SENSORS, "unregisterListener", "compass")])
                   + [lc("nav", "destroy",
                         call(SENSORS, "unregisterListener", "motion"),
                         call(LOCATION, "removeUpdates", "gps"),
                         call(CALLBACKS, "unregister", "clients"),
                         call(CALLBACKS, "kill", "clients"))]),
    "IPST2": ([activity("main", "com.ipst2.DetailActivity")],
              opening(create=[call(RESOURCES, "getDrawable", "res", new=True, args=["ic_logo"])])
              + closing()),
    "MaMa": ([activity("main", "com.mama.VideoActivity")],
             opening(create=[call(PLAYER, "<init>", "mp", new=True),
                             call(PLAYER, "setDataSource", "mp", args=["clip.mp4"]),
                             call(PLAYER, "prepare", "mp")],
                     resume=[call(PLAYER, "start", "mp")])
             + user("watch video") + closing(pause=[call(PLAYER, "pause", "mp")])),
    "QiCaiScan": ([activity("main", "com.qicaiscan.CaptureActivity")],
                  opening(create=[call(PLAYER, "<init>", "beep", new=True),
                                  call(PLAYER, "prepare", "beep")],
                          resume=[call(CAMERA, "open", "cam", new=True),
                                  call(CAMERA, "startPreview", "cam")])
                  + user("scan", call(PLAYER, "start", "beep"))
                  + closing(pause=[call(PLAYER, "release", "beep")])),
    "SuperTorch": ([activity("main", "com.supertorch.TorchActivity")],
                   opening(create=[call(PLAYER, "<init>", "click", new=True),
                                   call(PLAYER, "prepare", "click")],
                           resume=[call(LOCATION, "requestLocationUpdates", "gps", new=True,
                                        args=["network"])])
                   + user("toggle torch", call(PLAYER, "start", "click")) + closing()),
    "WebPCSuite": ([activity("main", "com.webpcsuite.ServerActivity")],
                   opening(create=[call(PLAYER, "<init>", "notify", new=True),
                                   call(PLAYER, "prepare", "notify")],
                           resume=[call(WAKELOCK, "acquire", "wl", new=True)])
                   + user("transfer files", call(PLAYER, "start", "notify")) + closing()),
    "WiFiSaver": ([activity("main", "com.wifisaver.SettingsActivity"),
                   service("mon", "com.wifisaver.MonitorService")],
                  opening()
                  + [lc("mon", "create", call(THREAD, "<init>", "worker", new=True),
                        call(THREAD, "start", "worker")),
                     lc("mon", "startCommand")]
                  + closing()
                  + [lc("mon", "startCommand"), lc("mon", "destroy")]),
    "XiaoMiWiFi": ([activity("main", "com.xiaomi.wifi.MainActivity"),
                    service("share", "com.xiaomi.wifi.ShareService")],
                   opening()
                   + [lc("share", "create"),
                      lc("share", "startCommand", call(MULTICAST, "acquire", "mlock", new=True))]
                   + user("share files") + closing()
                   + [lc("share", "destroy")]),
}


def iwc(a, b, callback, lifecycle):
    return {"template": "InvokeWhenCallback", "method_a": a, "method_b": b,
            "callback": callback, "lifecycle": lifecycle}


def replace(a, b):
    return {"template": "ReplaceWith", "method_a": a, "method_b": b}


def do_not(a, b):
    return {"template": "DoNotInvoke", "method_a": a, "method_b": b}


HEALED, CLEAN = "Healed", "NoViolation"

# (row, case name, app, policy, model, expected verdict)
ROWS = [
    (1, "androidhacks_managedquery", "AndroidHacks",
     replace(f"{ACTIVITY}.managedQuery", f"{RESOLVER}.query"), "ReplaceManagedQuery", HEALED),
    (2, "bluechat", "BlueChat",
     iwc(f"{BLUETOOTH}.enable", f"{BLUETOOTH}.disable", "onDestroy", ACTIVITY),
     "BluetoothDisableOnDestroy", HEALED),
    (3, "chedengwo_mediaplayer", "CheDengWo",
     iwc(f"{PLAYER}.<init>", f"{PLAYER}.release", "onPause", ACTIVITY), "MediaPlayerReleaseOnPause", HEALED),
    (4, "erweimal_mediaplayer", "ErWeiMaL",
     iwc(f"{PLAYER}.<init>", f"{PLAYER}.release", "onPause", ACTIVITY), "MediaPlayerReleaseOnPause", HEALED),
    (5, "fontmaster_lrucache", "FontMaster",
     iwc(f"{LRU}.<init>", f"{LRU}.evictAll", "onDestroy", ACTIVITY), "LruCacheEvictAllOnDestroy", HEALED),
    (6, "foocam_camera_release", "Foocam",
     iwc(f"{CAMERA}.open", f"{CAMERA}.release", "onPause", ACTIVITY), "CameraReleaseOnPause", CLEAN),
    (7, "foocam_camera_preview", "Foocam",
     iwc(f"{CAMERA}.startPreview", f"{CAMERA}.stopPreview", "onPause", ACTIVITY),
     "CameraStopPreviewOnPause", HEALED),
    (8, "fromcat_mediaplayer", "FromCat",
     iwc(f"{PLAYER}.create", f"{PLAYER}.release", "onPause", ACTIVITY), "MediaPlayerReleaseOnPause", HEALED),
    (9, "fromcat_camera_lock", "FromCat",
     do_not(f"{RECORDER}.start", f"{CAMERA}.lock"), "CameraNoLockAfterRecorderStart", CLEAN),
    (10, "getbackgps_sensor_activity", "GetBackGPS",
     iwc(f"{SENSORS}.registerListener", f"{SENSORS}.unregisterListener", "onPause", ACTIVITY),
     "SensorUnregisterOnPause", CLEAN),
    (11, "getbackgps_location_activity", "GetBackGPS",
     iwc(f"{LOCATION}.requestLocationUpdates", f"{LOCATION}.removeUpdates", "onPause", ACTIVITY),
     "LocationRemoveUpdatesOnPause", CLEAN),
    (12, "getbackgps_callbacks_activity", "GetBackGPS",
     iwc(f"{CALLBACKS}.register", f"{CALLBACKS}.unregister", "onPause", ACTIVITY),
     "CallbackListUnregisterOnPause", CLEAN),
    (13, "getbackgps_sensor_service", "GetBackGPS",
     iwc(f"{SENSORS}.registerListener", f"{SENSORS}.unregisterListener", "onDestroy", SERVICE),
     "SensorUnregisterOnServiceDestroy", CLEAN),
    (14, "getbackgps_location_service", "GetBackGPS",
     iwc(f"{LOCATION}.requestLocationUpdates", f"{LOCATION}.removeUpdates", "onDestroy", SERVICE),
     "LocationRemoveUpdatesOnServiceDestroy", CLEAN),
    (15, "getbackgps_callbacks_service", "GetBackGPS",
     iwc(f"{CALLBACKS}.register", f"{CALLBACKS}.unregister", "onDestroy", SERVICE),
     "CallbackListUnregisterOnServiceDestroy", CLEAN),
    (16, "ipst2_getdrawable", "IPST2",
     replace(f"{RESOURCES}.getDrawable", f"{DRAWABLES}.getDrawable"), "ReplaceResourcesGetDrawable", HEALED),
    (17, "mama_mediaplayer", "MaMa",
     iwc(f"{PLAYER}.<init>", f"{PLAYER}.release", "onPause", ACTIVITY), "MediaPlayerReleaseOnPause", HEALED),
    (18, "qicaiscan_camera_release", "QiCaiScan",
     iwc(f"{CAMERA}.open", f"{CAMERA}.release", "onPause", ACTIVITY), "CameraReleaseOnPause", HEALED),
    (19, "qicaiscan_camera_preview", "QiCaiScan",
     iwc(f"{CAMERA}.startPreview", f"{CAMERA}.release", "onPause", ACTIVITY),
     "CameraReleaseAfterPreviewOnPause", HEALED),
    (20, "qicaiscan_mediaplayer", "QiCaiScan",
     iwc(f"{PLAYER}.<init>", f"{PLAYER}.release", "onPause", ACTIVITY), "MediaPlayerReleaseOnPause", CLEAN),
    (21, "supertorch_mediaplayer", "SuperTorch",
     iwc(f"{PLAYER}.<init>", f"{PLAYER}.release", "onPause", ACTIVITY), "MediaPlayerReleaseOnPause", HEALED),
    (22, "supertorch_location", "SuperTorch",
     iwc(f"{LOCATION}.requestLocationUpdates", f"{LOCATION}.removeUpdates", "onPause", ACTIVITY),
     "LocationRemoveUpdatesOnPause", HEALED),
    (23, "webpcsuite_mediaplayer", "WebPCSuite",
     iwc(f"{PLAYER}.<init>", f"{PLAYER}.release", "onPause", ACTIVITY), "MediaPlayerReleaseOnPause", HEALED),
    (24, "webpcsuite_wakelock", "WebPCSuite",
     iwc(f"{WAKELOCK}.acquire", f"{WAKELOCK}.release", "onPause", ACTIVITY), "WakeLockReleaseOnPause", HEALED),
    (25, "wifisaver_thread", "WiFiSaver",
     iwc(f"{THREAD}.<init>", f"{THREAD}.interrupt", "onDestroy", SERVICE),
     "ThreadInterruptOnServiceDestroy", HEALED),
    (26, "xiaomiwifi_multicast_activity", "XiaoMiWiFi",
     iwc(f"{MULTICAST}.acquire", f"{MULTICAST}.release", "onDestroy", ACTIVITY),
     "MulticastLockReleaseOnDestroy", CLEAN),
    (27, "xiaomiwifi_multicast_service", "XiaoMiWiFi",
     iwc(f"{MULTICAST}.acquire", f"{MULTICAST}.release", "onDestroy", SERVICE),
     "MulticastLockReleaseOnServiceDestroy", HEALED),
]


def plumeria():
    take = lambda: user("take picture", call(CAMERA, "takePicture", "cam"))
    script = (opening(create=[call(CAMERA, "open", "cam", new=True)]) + take()
              + [lc("main", "pause"), lc("main", "stop"), lc("main", "restart"),
                 lc("main", "start"), lc("main", "resume")]
              + take() + closing()
              + opening(create=[call(CAMERA, "open", "cam", new=True)]) + take())
    return {"name": "plumeria_camera_leak", "app": "Plumeria",
            "components": [activity("main", "com.plumeria.MyActivity")],
            "policies": [iwc(f"{CAMERA}.open", f"{CAMERA}.release", "onPause", ACTIVITY)],
            "models": ["CameraReleaseOnPause"], "expected": HEALED, "script": script}


def write(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


def main() -> None:
    assert len(MODELS) == 19 and len(ROWS) == 27
    for old in (DATA / "models").glob("*.json"):
        old.unlink()
    for old in (DATA / "corpus").glob("*.json"):
        old.unlink()
    for m in MODELS:
        write(DATA / "models" / f"{m['name']}.json", m)
    names = {m["name"] for m in MODELS}
    for row, case, app, policy, model_name, expected in ROWS:
        assert model_name in names, model_name
        components, script = APPS[app]
        write(DATA / "corpus" / f"{row:02d}_{case}.json", {
            "name": case, "app": app, "row": row, "expected": expected,
            "components": components, "policies": [policy], "models": [model_name],
            "script": script,
        })
    write(DATA / "scenarios" / "plumeria_camera_leak.json", plumeria())

    write(DATA / "fig1" / "OpsBuffer.json", fig1())
    ev = lambda m: json.dumps({"phase": "before", "class": "demo.Ops", "method": m, "receiver": 1,
                               "component": 1, "args": [], "source": "app"})
    inputs = ["opA", "opA", "opB", "opA", "opA", "opC", "stop"]
    (DATA / "fig1" / "fig1_input.jsonl").write_text("".join(ev(m) + "\n" for m in inputs))
    expected = ["opB", "opAA", "opAA", "opC", "opAA", "stop"]
    (DATA / "fig1" / "fig1_expected.txt").write_text(";".join(expected) + "\n")


if __name__ == "__main__":
    main()
