"""Typed catalog of invocable tools and skill documents, with runtime
registration of synthesized tools persisted as one JSON manifest per tool.

The registry is strict: it validates schemas and argument maps but never
executes anything and never fuzzy-matches values (callers own that).
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Optional

from .errors import ProtlabError

CATEGORIES = frozenset(
    {
        "research-search",
        "database",
        "discovery",
        "directed-evolution",
        "automl",
        "code-execution",
        "plumbing",
    }
)

PARAM_KINDS = frozenset(
    {"string", "integer", "real", "boolean", "file-path", "enum-choice", "list-of-strings", "map"}
)

MANIFEST_METRIC_KEYS = frozenset(
    {"accuracy", "mcc", "f1", "precision", "recall", "auroc", "spearman", "mse", "loss"}
)


class RegistryError(ProtlabError):
    code = "registry-error"


class DuplicateToolError(RegistryError):
    code = "duplicate-name"


class MalformedSchemaError(RegistryError):
    code = "malformed-schema"


class UnknownToolError(RegistryError):
    code = "unknown-tool"


class MissingRequiredError(RegistryError):
    code = "missing-required"

    def __init__(self, tool: str, param: str):
        super().__init__(f"tool {tool!r} missing required param {param!r}", tool=tool, param=param)
        self.param = param


class InvalidChoiceError(RegistryError):
    code = "invalid-choice"

    def __init__(self, tool: str, param: str, value: Any, allowed: tuple):
        super().__init__(
            f"tool {tool!r} param {param!r}: {value!r} not among allowed values",
            tool=tool,
            param=param,
            value=value,
            allowed=list(allowed),
        )
        self.param = param
        self.value = value
        self.allowed = allowed


class SkillNotFoundError(RegistryError):
    code = "not-found"


class DanglingCheckpointError(RegistryError):
    code = "dangling-checkpoint"


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str = "string"
    required: bool = False
    default: Any = None
    allowed: Optional[tuple] = None

    def validate_spec(self, tool: str) -> None:
        if self.kind not in PARAM_KINDS:
            raise MalformedSchemaError(
                f"tool {tool!r} param {self.name!r}: unknown kind {self.kind!r}"
            )
        if self.kind == "enum-choice" and not self.allowed:
            raise MalformedSchemaError(
                f"tool {tool!r} param {self.name!r}: enum-choice needs allowed values"
            )
        if self.allowed is not None:
            if not self.allowed:
                raise MalformedSchemaError(
                    f"tool {tool!r} param {self.name!r}: allowed list is empty"
                )
            if self.default is not None and self.default not in self.allowed:
                raise MalformedSchemaError(
                    f"tool {tool!r} param {self.name!r}: default {self.default!r} "
                    "not in allowed values"
                )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "required": self.required,
            "default": self.default,
            "allowed": list(self.allowed) if self.allowed is not None else None,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ParamSpec":
        allowed = d.get("allowed")
        return cls(
            name=d["name"],
            kind=d.get("kind", "string"),
            required=bool(d.get("required", False)),
            default=d.get("default"),
            allowed=tuple(allowed) if allowed is not None else None,
        )


@dataclass(frozen=True)
class ToolDescriptor:
    name: str
    description: str
    category: str
    params: tuple[ParamSpec, ...] = ()
    executor: str = "fixture"

    def validate_schema(self) -> None:
        if not self.name:
            raise MalformedSchemaError("tool name must be non-empty")
        if self.category not in CATEGORIES:
            raise MalformedSchemaError(
                f"tool {self.name!r}: unknown category {self.category!r}"
            )
        seen_optional = False
        names = set()
        for p in self.params:
            if p.name in names:
                raise MalformedSchemaError(f"tool {self.name!r}: duplicate param {p.name!r}")
            names.add(p.name)
            p.validate_spec(self.name)
            if p.required and seen_optional:
                raise MalformedSchemaError(
                    f"tool {self.name!r}: required param {p.name!r} listed after optionals"
                )
            if not p.required:
                seen_optional = True

    def param(self, name: str) -> Optional[ParamSpec]:
        for p in self.params:
            if p.name == name:
                return p
        return None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "category": self.category,
            "params": [p.to_dict() for p in self.params],
            "executor": self.executor,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ToolDescriptor":
        return cls(
            name=d["name"],
            description=d.get("description", ""),
            category=d["category"],
            params=tuple(ParamSpec.from_dict(p) for p in d.get("params", [])),
            executor=d.get("executor", "fixture"),
        )


@dataclass(frozen=True)
class SkillDoc:
    skill_id: str
    title: str
    body: str


@dataclass(frozen=True)
class SynthesizedToolManifest:
    """A packaged model checkpoint published as a reusable tool."""

    tool: ToolDescriptor
    checkpoint_ref: str
    inference_schema: dict
    metrics: dict[str, float]
    created_at: str
    provenance: str

    def validate_schema(self) -> None:
        self.tool.validate_schema()
        if self.tool.category != "automl":
            raise MalformedSchemaError(
                f"synthesized tool {self.tool.name!r} must be automl-category, "
                f"got {self.tool.category!r}"
            )
        bad = set(self.metrics) - MANIFEST_METRIC_KEYS
        if bad:
            raise MalformedSchemaError(
                f"manifest {self.tool.name!r}: invalid metric keys {sorted(bad)}"
            )

    def to_dict(self) -> dict:
        return {
            "tool": self.tool.to_dict(),
            "checkpoint_ref": self.checkpoint_ref,
            "inference_schema": {
                "inputs": [p.to_dict() for p in self.inference_schema.get("inputs", [])],
                "outputs": self.inference_schema.get("outputs", ""),
            },
            "metrics": dict(self.metrics),
            "created_at": self.created_at,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "SynthesizedToolManifest":
        schema = d.get("inference_schema", {})
        return cls(
            tool=ToolDescriptor.from_dict(d["tool"]),
            checkpoint_ref=d["checkpoint_ref"],
            inference_schema={
                "inputs": [ParamSpec.from_dict(p) for p in schema.get("inputs", [])],
                "outputs": schema.get("outputs", ""),
            },
            metrics={k: float(v) for k, v in d.get("metrics", {}).items()},
            created_at=d.get("created_at", ""),
            provenance=d.get("provenance", ""),
        )

    @classmethod
    def from_json(cls, text: str) -> "SynthesizedToolManifest":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class RegistrationReceipt:
    name: str
    version: int
    manifest_path: Optional[str] = None


# Sentinel meaning "no dependency yet"; used by validate_invocation callers
# that defer some params to runtime resolution.
class Registry:
    """Read-mostly tool catalog. Registrations are serialized by a lock;
    descriptors are immutable after registration."""

    def __init__(
        self,
        executor_keys: Optional[Iterable[str]] = None,
        manifests_dir: Optional[str | Path] = None,
        checkpoint_resolver: Optional[Callable[[str], bool]] = None,
    ):
        self._tools: dict[str, ToolDescriptor] = {}
        self._skills: dict[str, SkillDoc] = {}
        self._manifests: dict[str, SynthesizedToolManifest] = {}
        self._version = 0
        self._lock = threading.Lock()
        self._executor_keys = set(executor_keys) if executor_keys is not None else None
        self._manifests_dir = Path(manifests_dir) if manifests_dir else None
        self._checkpoint_resolver = checkpoint_resolver
        if self._manifests_dir and self._manifests_dir.is_dir():
            self._load_manifests()

    def _load_manifests(self) -> None:
        for path in sorted(self._manifests_dir.glob("*.json")):
            manifest = SynthesizedToolManifest.from_json(path.read_text())
            self._tools[manifest.tool.name] = manifest.tool
            self._manifests[manifest.tool.name] = manifest
            self._version += 1

    @property
    def version(self) -> int:
        return self._version

    def _check_executor(self, key: str, tool: str) -> None:
        if self._executor_keys is not None and key not in self._executor_keys:
            raise RegistryError(
                f"tool {tool!r} names unknown executor {key!r}",
                executor=key,
            )

    def register_tool(self, desc: ToolDescriptor) -> RegistrationReceipt:
        desc.validate_schema()
        with self._lock:
            if desc.name in self._tools:
                raise DuplicateToolError(f"tool {desc.name!r} already registered")
            self._check_executor(desc.executor, desc.name)
            self._tools[desc.name] = desc
            self._version += 1
            return RegistrationReceipt(desc.name, self._version)

    def register_skill(self, doc: SkillDoc) -> None:
        with self._lock:
            if doc.skill_id in self._skills:
                raise DuplicateToolError(f"skill {doc.skill_id!r} already registered")
            self._skills[doc.skill_id] = doc

    def register_synthesized(self, manifest: SynthesizedToolManifest) -> RegistrationReceipt:
        manifest.validate_schema()
        with self._lock:
            name = manifest.tool.name
            if name in self._tools:
                raise DuplicateToolError(f"tool {name!r} already registered")
            self._check_executor(manifest.tool.executor, name)
            if self._checkpoint_resolver and not self._checkpoint_resolver(manifest.checkpoint_ref):
                raise DanglingCheckpointError(
                    f"checkpoint {manifest.checkpoint_ref!r} is not resolvable",
                    checkpoint_ref=manifest.checkpoint_ref,
                )
            manifest_path = None
            if self._manifests_dir:
                self._manifests_dir.mkdir(parents=True, exist_ok=True)
                path = self._manifests_dir / f"{name}.json"
                path.write_text(manifest.to_json())
                manifest_path = str(path)
            self._tools[name] = manifest.tool
            self._manifests[name] = manifest
            self._version += 1
            return RegistrationReceipt(name, self._version, manifest_path)

    def has_tool(self, name: str) -> bool:
        return name in self._tools

    def lookup(self, name: str) -> ToolDescriptor:
        try:
            return self._tools[name]
        except KeyError:
            raise UnknownToolError(f"no tool named {name!r}", tool=name)

    def manifest_for(self, name: str) -> Optional[SynthesizedToolManifest]:
        return self._manifests.get(name)

    def tools(self) -> list[ToolDescriptor]:
        return list(self._tools.values())

    def tools_in_category(self, category: str) -> list[ToolDescriptor]:
        return [t for t in self._tools.values() if t.category == category]

    def lookup_skill(self, skill_id: str) -> SkillDoc:
        try:
            return self._skills[skill_id]
        except KeyError:
            raise SkillNotFoundError(f"no skill named {skill_id!r}", skill_id=skill_id)

    def skills(self) -> list[SkillDoc]:
        return list(self._skills.values())

    def validate_invocation(
        self,
        name: str,
        args: Mapping[str, Any],
        defer: Iterable[str] = (),
    ) -> dict[str, Any]:
        """Check required params and allowed values, fill defaults, and return
        the fully-populated argument map. Params named in `defer` are left
        untouched (their values resolve later). Idempotent on its output."""
        desc = self.lookup(name)
        deferred = set(defer)
        known = {p.name for p in desc.params}
        normalized = {k: v for k, v in args.items() if k in known}
        for p in desc.params:
            if p.name in deferred:
                continue
            if p.name not in normalized or normalized[p.name] is None:
                if p.required:
                    raise MissingRequiredError(name, p.name)
                if p.default is not None:
                    normalized[p.name] = p.default
                continue
            if p.allowed is not None and normalized[p.name] not in p.allowed:
                raise InvalidChoiceError(name, p.name, normalized[p.name], p.allowed)
        return normalized

    def describe_tools(self) -> str:
        """Render the catalog for prompt embedding, deterministically."""
        lines = []
        for t in self.tools():
            parts = []
            for p in t.params:
                bits = p.kind
                if p.required:
                    bits += ", required"
                if p.allowed:
                    bits += ", one of: " + ", ".join(str(a) for a in p.allowed)
                if p.default is not None:
                    bits += f", default {p.default}"
                parts.append(f"{p.name} ({bits})")
            lines.append(f"- {t.name} [{t.category}]: {t.description}")
            if parts:
                lines.append("    params: " + "; ".join(parts))
        return "\n".join(lines)
