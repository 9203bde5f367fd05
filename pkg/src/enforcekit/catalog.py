"""API catalog: the ground truth of classes, methods and resource protocols.

The catalog serves three consumers.  Validation checks that every method a
model mentions exists.  The engine and the acceptors need the class
hierarchy for subclass matching.  The simulator needs to know which calls
acquire and release a resource and whether the resource is exclusive.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from .model import ClassHierarchy, EnforceKitError


class ParseError(EnforceKitError, ValueError):
    """Bad JSON or a schema violation in an input file."""


class ResourceKind(enum.Enum):
    EXCLUSIVE = "Exclusive"
    SHARED = "Shared"
    NONE = "None"


@dataclass(frozen=True)
class ClassInfo:
    methods: frozenset[str]
    parent: Optional[str] = None
    resource_kind: ResourceKind = ResourceKind.NONE
    acquire: frozenset[str] = frozenset()
    release: frozenset[str] = frozenset()


@dataclass
class ApiCatalog:
    classes: dict[str, ClassInfo] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, info in self.classes.items():
            if info.parent is not None and info.parent not in self.classes:
                raise ParseError(f"{name}: parent {info.parent} is not declared")
        # ClassHierarchy.ancestors raises on cycles
        h = self.hierarchy()
        for name in self.classes:
            h.ancestors(name)
        self._resource_class: dict[str, Optional[str]] = {}

    def __contains__(self, class_name: object) -> bool:
        return class_name in self.classes

    def hierarchy(self) -> ClassHierarchy:
        return ClassHierarchy({n: c.parent for n, c in self.classes.items()})

    def methods(self, class_name: str) -> frozenset[str]:
        """Declared plus inherited methods."""
        out: set[str] = set()
        cur: Optional[str] = class_name
        while cur is not None and cur in self.classes:
            out |= self.classes[cur].methods
            cur = self.classes[cur].parent
        return frozenset(out)

    def has_method(self, class_name: str, method: str) -> bool:
        return method in self.methods(class_name)

    def resource_class(self, class_name: str) -> Optional[str]:
        """The nearest class (itself or an ancestor) that declares resource behaviour."""
        try:
            return self._resource_class[class_name]
        except KeyError:
            pass
        found = self._find_resource_class(class_name)
        self._resource_class[class_name] = found
        return found

    def _find_resource_class(self, class_name: str) -> Optional[str]:
        cur: Optional[str] = class_name
        while cur is not None and cur in self.classes:
            info = self.classes[cur]
            if info.resource_kind is not ResourceKind.NONE or info.acquire or info.release:
                return cur
            cur = info.parent
        return None

    def _lookup(self, class_name: str) -> Optional[ClassInfo]:
        name = self.resource_class(class_name)
        return None if name is None else self.classes[name]

    def resource_kind(self, class_name: str) -> ResourceKind:
        info = self._lookup(class_name)
        return info.resource_kind if info else ResourceKind.NONE

    def is_acquire(self, class_name: str, method: str) -> bool:
        info = self._lookup(class_name)
        return info is not None and method in info.acquire

    def is_release(self, class_name: str, method: str) -> bool:
        info = self._lookup(class_name)
        return info is not None and method in info.release

    def merged(self, other: "ApiCatalog") -> "ApiCatalog":
        classes = dict(self.classes)
        classes.update(other.classes)
        return ApiCatalog(classes)

    def with_components(self, components: Mapping[str, str]) -> "ApiCatalog":
        """Add app classes (``name -> base class``) that inherit everything."""
        classes = dict(self.classes)
        for name, base in components.items():
            if name not in classes:
                classes[name] = ClassInfo(frozenset(), base)
        return ApiCatalog(classes)

    def to_dict(self) -> dict:
        out = {}
        for name, c in self.classes.items():
            entry: dict = {"methods": sorted(c.methods), "parent": c.parent,
                           "resource_kind": c.resource_kind.value}
            if c.acquire:
                entry["acquire"] = sorted(c.acquire)
            if c.release:
                entry["release"] = sorted(c.release)
            out[name] = entry
        return {"classes": out}

    @classmethod
    def from_dict(cls, data: Mapping) -> "ApiCatalog":
        try:
            raw = data["classes"]
            classes = {}
            for name, entry in raw.items():
                classes[name] = ClassInfo(
                    methods=frozenset(entry.get("methods", ())),
                    parent=entry.get("parent"),
                    resource_kind=ResourceKind(entry.get("resource_kind") or "None"),
                    acquire=frozenset(entry.get("acquire", ())),
                    release=frozenset(entry.get("release", ())),
                )
        except (KeyError, TypeError, AttributeError, ValueError) as exc:
            raise ParseError(f"malformed catalog: {exc}") from exc
        return cls(classes)


def load_catalog(paths: Union[str, Path, Iterable[Union[str, Path]], None] = None) -> ApiCatalog:
    """Load one or more catalog files, later files overriding earlier ones.

    With no argument the bundled Android catalog is returned.
    """
    if paths is None:
        text = resources.files("enforcekit.data").joinpath("catalog.android.json").read_text()
        return ApiCatalog.from_dict(json.loads(text))
    if isinstance(paths, (str, Path)):
        paths = [paths]
    cat = ApiCatalog()
    for p in paths:
        try:
            data = json.loads(Path(p).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"{p}:{exc.lineno}: {exc.msg}") from exc
        cat = cat.merged(ApiCatalog.from_dict(data))
    return cat


def bundled_path(*parts: str) -> Path:
    """Filesystem path of a bundled data file (models, corpus, catalogs)."""
    return Path(str(resources.files("enforcekit.data").joinpath(*parts)))
