"""Module generator: turns a validated model into hook-module source text.

Generation is split in two layers.  The transition logic is rendered once,
as a state switch written against abstract operations (``$set_state``,
``$emit``...).  A target profile then supplies the names those operations
take on its platform and the scaffolding around the switch: package entry,
app identity check, injected data classes and one hook block per
instrumented class.
"""

from __future__ import annotations

import json
import re
import textwrap
from dataclasses import dataclass, field
from string import Template
from typing import Mapping, Optional, Union

from .catalog import ApiCatalog, ParseError
from .model import (
    Emit, EmitBound, EnforceKitError, EnforcementModel, Exact, Phase, Special, Transition,
)
from .serialization import model_from_dict, model_to_dict
from .validation import validate_model


class UnsupportedProfile(EnforceKitError, ValueError):
    pass


class UnvalidatedModel(EnforceKitError, ValueError):
    pass


SWITCH_OPERATIONS = ("state_of", "set_state", "matches", "emit", "emit_intercepted",
                     "emit_bound", "suppress", "resume")


@dataclass(frozen=True)
class TargetProfile:
    name: str
    #: file name suffix, e.g. ``xposed-java.txt``
    extension: str
    #: platform names for the abstract operations used by the switch
    operations: Mapping[str, str]
    #: scaffolding fragments keyed by slot
    slots: Mapping[str, str] = field(default_factory=dict)
    required_slots: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        missing = [op for op in SWITCH_OPERATIONS if op not in self.operations]
        missing += [s for s in self.required_slots if not self.slots.get(s)]
        if missing:
            raise ValueError(f"profile {self.name} leaves {missing} unpopulated")


@dataclass
class GeneratedModule:
    source_text: str
    #: (section name, (first line, last line)), 1-based and inclusive
    section_index: list[tuple[str, tuple[int, int]]]
    profile: str
    switch_template: str
    switch_substitutions: dict[str, str]

    @property
    def switch_text(self) -> str:
        return Template(self.switch_template).substitute(self.switch_substitutions)

    def section(self, name: str) -> str:
        for n, (a, b) in self.section_index:
            if n == name:
                return "\n".join(self.source_text.splitlines()[a - 1:b])
        raise KeyError(name)


def section_report(g: GeneratedModule) -> list[str]:
    return [name for name, _ in g.section_index]


# --- platform-independent switch -------------------------------------------------

def _condition(g) -> str:
    if isinstance(g, Exact):
        return f'$matches(sig, "{g.signature}")'
    return " && ".join(f'!$matches(sig, "{s}")' for s in g.exclude)


def _actions(t: Transition) -> list[str]:
    lines = [f"$set_state(key, {t.target});"]
    passed = False
    body = []
    for o in t.outputs:
        if isinstance(o, EmitBound):
            body.append(f"$emit_bound({o.variable});")
            passed = True
        elif isinstance(o, Emit):
            if isinstance(t.intercepted, Exact) and o.signature == t.intercepted.signature and not passed:
                body.append("$emit_intercepted(event);")
                passed = True
            else:
                body.append(f'$emit(key, "{o.signature}");')
        elif isinstance(o, Special):
            body.append("$resume(key);")
    if not passed:
        lines.append("$suppress(event);")
    return lines + body


def switch_template(m: EnforcementModel) -> str:
    """The transition logic as a switch over states; platform names are placeholders."""
    out = ["switch ($state_of(key)) {"]
    for s in m.states:
        out.append(f"    case {s.id}:")
        for t in m.transitions_from(s.id):
            out.append(f"        if ({_condition(t.intercepted)}) {{")
            out.extend(f"            {line}" for line in _actions(t))
            out.append("            return;")
            out.append("        }")
        out.append("        break;")
    out.append("}")
    out.append("$emit_intercepted(event);")
    return "\n".join(out)


# --- hook planning -----------------------------------------------------------

def hooked_methods(m: EnforcementModel) -> dict[str, dict[str, set[Phase]]]:
    """class -> method -> phases; method ``*`` means every method of the class."""
    plan: dict[str, dict[str, set[Phase]]] = {}
    for t in m.transitions:
        g = t.intercepted
        if isinstance(g, Exact):
            sig = g.signature
            plan.setdefault(sig.class_name, {}).setdefault(sig.method_name, set()).add(sig.phase)
        else:
            for cls in (m.api, m.lifecycle_object):
                plan.setdefault(cls, {}).setdefault("*", set()).update(Phase)
    order = [m.api, m.lifecycle_object] + sorted(c for c in plan if c not in (m.api, m.lifecycle_object))
    return {c: plan[c] for c in order if c in plan}


def short_name(cls: str) -> str:
    return cls.rsplit(".", 1)[-1]


def java_binary_name(cls: str) -> str:
    """``android.os.PowerManager.WakeLock`` -> ``android.os.PowerManager$WakeLock``."""
    parts = cls.split(".")
    for i, p in enumerate(parts):
        if p[:1].isupper():
            return ".".join(parts[:i + 1]) + "".join("$" + q for q in parts[i + 1:])
    return cls


# --- assembly ------------------------------------------------------------------

class _Builder:
    def __init__(self) -> None:
        self.lines: list[str] = []
        self.index: list[tuple[str, tuple[int, int]]] = []

    def section(self, name: str, text: str) -> None:
        body = text.rstrip("\n").split("\n")
        if self.lines:
            self.lines.append("")
        start = len(self.lines) + 1
        self.lines.extend(body)
        self.index.append((name, (start, len(self.lines))))

    def extend_last(self, text: str) -> None:
        self.lines.extend(text.rstrip("\n").split("\n"))
        name, (a, _) = self.index[-1]
        self.index[-1] = (name, (a, len(self.lines)))

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


_JAVA_ENTRY = """\
package enforcekit.generated;

import de.robv.android.xposed.IXposedHookLoadPackage;
import de.robv.android.xposed.XC_MethodHook;
import de.robv.android.xposed.XposedBridge;
import de.robv.android.xposed.callbacks.XC_LoadPackage.LoadPackageParam;
import java.util.HashMap;
import java.util.Map;
import java.util.Objects;
import java.util.Set;

import static de.robv.android.xposed.XposedHelpers.findAndHookMethod;
import static de.robv.android.xposed.XposedHelpers.findClass;

public class ${module} implements IXposedHookLoadPackage {
    private static final Map<Object, Integer> currentStates = new HashMap<>();
    private static final Map<Object, Object> lifeCycleObject2resource = new HashMap<>();
    private static boolean doNotAlterExecution = false;
    private static final Set<String> targetApps = TargetApps.forModule("${model}");

    @Override
    public void handleLoadPackage(final LoadPackageParam lpparam) throws Throwable {"""

_JAVA_IDENTITY = """\
        // check app identity
        if (!targetApps.isEmpty() && !targetApps.contains(lpparam.packageName)) {
            return;
        }"""

_JAVA_DATA = """\
        // inject data classes
        final ResourceManager resourceManager =
                new ResourceManager(lpparam.classLoader, "${api}", lifeCycleObject2resource);
        final class Automaton {
            int stateOf(Object key) {
                Integer s = currentStates.get(key);
                return s == null ? ${initial} : s;
            }

            void setState(Object key, int next) {
                currentStates.put(key, next);
            }

            void proceed(XC_MethodHook.MethodHookParam event) {
            }

            void suppress(XC_MethodHook.MethodHookParam event) {
                // a result set before the call runs means the call is skipped
                event.setResult(null);
            }

            void invoke(Object key, String signature) {
                doNotAlterExecution = true;
                try {
                    resourceManager.invoke(key, signature);
                } finally {
                    doNotAlterExecution = false;
                }
            }

            void dispatch(Object key, String sig, XC_MethodHook.MethodHookParam event) {
${switch}
            }
        }
        final Automaton automaton = new Automaton();"""

_JAVA_RESUME = """\
        final class ResumeSupport {
            void resume(Object key) {
                Object record = lifeCycleObject2resource.get(key);
                if (record == null || resourceManager.isHeld(record)) {
                    return;
                }
                doNotAlterExecution = true;
                try {
                    resourceManager.replayAcquisition(record);
                } finally {
                    doNotAlterExecution = false;
                }
            }
        }
        final ResumeSupport resumeSupport = new ResumeSupport();"""

_JAVA_HOOK_BLOCK = """\
        // hooking class ${cls}
        final Class<?> ${var} = findClass("${binary}", lpparam.classLoader);
        for (final Class<?> target : resourceManager.appClassesAssignableTo(${var}, lpparam)) {
${hooks}
        }"""

_JAVA_HOOK_METHOD = """\
            findAndHookMethod(target, "${method}", new XC_MethodHook() {
${wrappers}
            });"""

_JAVA_HOOK_ALL = """\
            XposedBridge.hookAllMethods(target, null, new XC_MethodHook() {
${wrappers}
            });"""

_JAVA_WRAPPER = """\
                @Override
                protected void ${hook}(MethodHookParam param) throws Throwable {
                    if (doNotAlterExecution) {
                        return;
                    }
                    automaton.dispatch(resourceManager.keyOf(param), ${sig}, param);
                }"""

_JAVA_CLOSE = """\
    }
}"""

XPOSED_JAVA = TargetProfile(
    name="xposed-java",
    extension="xposed-java.txt",
    operations={
        "state_of": "stateOf", "set_state": "setState", "matches": "Objects.equals",
        "emit": "invoke", "emit_intercepted": "proceed", "emit_bound": "proceed",
        "suppress": "suppress", "resume": "resumeSupport.resume",
    },
    slots={"entry": _JAVA_ENTRY, "identity-check": _JAVA_IDENTITY, "data-classes": _JAVA_DATA,
           "resume": _JAVA_RESUME, "hook-block": _JAVA_HOOK_BLOCK, "hook-method": _JAVA_HOOK_METHOD,
           "hook-all": _JAVA_HOOK_ALL, "before-wrapper": _JAVA_WRAPPER,
           "after-wrapper": _JAVA_WRAPPER, "close": _JAVA_CLOSE},
    required_slots=("entry", "identity-check", "data-classes", "hook-block", "before-wrapper",
                    "after-wrapper"),
)

SIMSCRIPT = TargetProfile(
    name="simscript",
    extension="simscript.json",
    operations={
        "state_of": "state", "set_state": "goto", "matches": "is", "emit": "emit",
        "emit_intercepted": "keep", "emit_bound": "keep", "suppress": "drop", "resume": "e.resume",
    },
)

PROFILES = {p.name: p for p in (XPOSED_JAVA, SIMSCRIPT)}


def _java_wrapper(p: TargetProfile, phase: Phase, cls: str, method: str) -> str:
    if method == "*":
        sig = f'"{phase.value}#{cls}." + param.method.getName()'
    else:
        sig = f'"{phase.value}#{cls}.{method}"'
    slot = "before-wrapper" if phase is Phase.BEFORE else "after-wrapper"
    hook = "beforeHookedMethod" if phase is Phase.BEFORE else "afterHookedMethod"
    return Template(p.slots[slot]).substitute(hook=hook, sig=sig)


def _generate_java(m: EnforcementModel, p: TargetProfile, switch: str, subs: dict) -> _Builder:
    b = _Builder()
    b.section("entry", Template(p.slots["entry"]).substitute(module=f"{m.name}Module", model=m.name))
    b.section("identity-check", p.slots["identity-check"])
    if m.transitions:
        rendered = textwrap.indent(Template(switch).substitute(subs), " " * 16)
        data = Template(p.slots["data-classes"]).substitute(
            api=m.api, initial=m.initial, switch=rendered)
        if m.uses_special("resume"):
            data += "\n" + p.slots["resume"]
        b.section("data-classes", data)
        for cls, methods in hooked_methods(m).items():
            hooks = []
            for method, phases in sorted(methods.items()):
                wrappers = "\n\n".join(_java_wrapper(p, ph, cls, method)
                                       for ph in (Phase.BEFORE, Phase.AFTER) if ph in phases)
                slot = "hook-all" if method == "*" else "hook-method"
                hooks.append(Template(p.slots[slot]).substitute(method=method, wrappers=wrappers))
            var = re.sub(r"\W", "", short_name(cls)[:1].lower() + short_name(cls)[1:]) + "Class"
            b.section(f"hook:{short_name(cls)}", Template(p.slots["hook-block"]).substitute(
                cls=cls, var=var, binary=java_binary_name(cls), hooks="\n\n".join(hooks)))
    b.extend_last(p.slots["close"])
    return b


def dispatch_order(m: EnforcementModel) -> dict[int, list[int]]:
    """For each state, the indices of its transitions in evaluation order."""
    return {s.id: [i for i, t in enumerate(m.transitions) if t.source == s.id] for s in m.states}


def _generate_simscript(m: EnforcementModel, switch: str, subs: dict) -> _Builder:
    def member(key: str, value, last: bool) -> list[str]:
        body = json.dumps(value, indent=2).split("\n")
        lines = [f'  "{key}": {body[0]}'] + ["  " + line for line in body[1:]]
        if not last:
            lines[-1] += ","
        return lines

    b = _Builder()
    b.section("header", '{\n  "profile": "simscript",')
    order = {str(k): v for k, v in dispatch_order(m).items()}
    rendered = Template(switch).substitute(subs).split("\n")
    for key, value, last in (("model", model_to_dict(m), False), ("dispatch", order, False),
                             ("switch", rendered, True)):
        start = len(b.lines) + 1
        b.lines.extend(member(key, value, last))
        b.index.append((key, (start, len(b.lines))))
    b.extend_last("}")
    return b


def generate(m: EnforcementModel, profile: Union[str, TargetProfile] = "xposed-java",
             catalog: Optional[ApiCatalog] = None) -> GeneratedModule:
    """Render ``m`` for ``profile``; the model must validate with zero errors."""
    if isinstance(profile, str):
        if profile not in PROFILES:
            raise UnsupportedProfile(f"unknown profile {profile!r}; known: {sorted(PROFILES)}")
        profile = PROFILES[profile]
    elif profile.name not in PROFILES:
        raise UnsupportedProfile(f"unknown profile {profile.name!r}")
    rep = validate_model(m, catalog)
    if not rep.ok:
        raise UnvalidatedModel(f"{m.name}: {rep.errors[0]}")
    switch = switch_template(m)
    subs = dict(profile.operations)
    if profile.name == "simscript":
        b = _generate_simscript(m, switch, subs)
    else:
        b = _generate_java(m, profile, switch, subs)
    return GeneratedModule(b.text(), b.index, profile.name, switch, subs)


def output_name(m: EnforcementModel, profile: Union[str, TargetProfile]) -> str:
    name = profile if isinstance(profile, str) else profile.name
    return f"{m.name}.{PROFILES[name].extension}"


def load_simscript(text: str) -> EnforcementModel:
    """Rebuild a model from SimScript; the dispatch annotation must agree with it."""
    try:
        data = json.loads(text)
        m = model_from_dict(data["model"])
        order = {int(k): v for k, v in data["dispatch"].items()}
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"not a SimScript module: {exc}") from exc
    if order != dispatch_order(m):
        raise ParseError(f"{m.name}: dispatch annotation disagrees with the transition list")
    return m
