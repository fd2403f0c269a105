"""Hierarchical event/entity ontology: model, loader, validator, queries.

The on-disk format is a small YAML document (see README for the schema).
Ontology values are immutable after loading and safe to share across
threads.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path

import yaml

logger = logging.getLogger(__name__)

IDENTIFIER_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
PLACEHOLDER_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


class OntologyError(Exception):
    """Base class for ontology loading problems."""


class OntologyParseError(OntologyError):
    """The document is not structurally well-formed."""


class OntologyValidationError(OntologyError):
    """The document parsed but violates an ontology invariant."""


def derive_class_name(raw_name: str) -> str:
    """Class identifier for a source type string.

    Takes the last colon-separated segment and maps ``-`` to ``_``,
    e.g. ``"Justice:Arrest-Jail"`` -> ``"Arrest_Jail"``.
    """
    return raw_name.rsplit(":", 1)[-1].replace("-", "_")


def instance_variable(class_name: str) -> str:
    """Variable name used when instantiating an event class."""
    return class_name.lower() + "_event"


@dataclass(frozen=True)
class EntityTypeDef:
    name: str
    description: str


@dataclass(frozen=True)
class RoleSpec:
    name: str
    allowed_entity_types: tuple[str, ...]
    role_description: str = ""


@dataclass(frozen=True)
class EventTypeDef:
    raw_name: str
    class_name: str
    parent: str | None  # class_name of the parent event type
    roles: tuple[RoleSpec, ...]
    description_template: str
    keywords: tuple[str, ...] = ()


@dataclass(frozen=True)
class Ontology:
    """Validated ontology. Maps preserve file order."""

    entity_types: dict[str, EntityTypeDef]
    event_types: dict[str, EventTypeDef]  # keyed by class_name

    def resolve_event(self, name: str) -> EventTypeDef:
        """Look up an event type by raw name or class name."""
        cls = derive_class_name(name)
        try:
            return self.event_types[cls]
        except KeyError:
            raise OntologyError(f"unknown event type: {name!r}") from None

    def children(self, parent: str) -> list[str]:
        """Class names of the direct children of ``parent``, in file order."""
        pcls = self.resolve_event(parent).class_name
        return [e.class_name for e in self.event_types.values() if e.parent == pcls]


def ancestors(ontology: Ontology, event_type: str) -> list[str]:
    """Parent chain of ``event_type``, immediate parent first.

    Excludes the type itself and the synthetic base class.
    """
    node = ontology.resolve_event(event_type)
    chain: list[str] = []
    while node.parent is not None:
        chain.append(node.parent)
        node = ontology.event_types[node.parent]
    return chain


def siblings(ontology: Ontology, event_type: str) -> set[str]:
    """Event types sharing the immediate parent of ``event_type``.

    A type with no parent has no siblings; that case is logged and yields
    the empty set.
    """
    node = ontology.resolve_event(event_type)
    if node.parent is None:
        logger.warning("siblings(%s): type has no parent", node.class_name)
        return set()
    return {
        e.class_name
        for e in ontology.event_types.values()
        if e.parent == node.parent and e.class_name != node.class_name
    }


def load_ontology(path: str | Path) -> Ontology:
    """Load and validate an ontology document from ``path``."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_ontology(text)


def parse_ontology(text: str) -> Ontology:
    """Parse and validate an ontology document given as a string."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise OntologyParseError(f"malformed ontology document: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise OntologyParseError("ontology document must be a mapping")
    unknown = set(doc) - {"entities", "events"}
    if unknown:
        raise OntologyParseError(f"unknown top-level keys: {sorted(unknown)}")

    problems: list[str] = []
    entity_types = _parse_entities(doc.get("entities", []), problems)
    event_types = _parse_events(doc.get("events", []), entity_types, problems)
    if problems:
        raise OntologyValidationError(
            "invalid ontology:\n  " + "\n  ".join(problems)
        )
    return Ontology(entity_types=entity_types, event_types=event_types)


def _parse_entities(raw: object, problems: list[str]) -> dict[str, EntityTypeDef]:
    out: dict[str, EntityTypeDef] = {}
    if not isinstance(raw, list):
        raise OntologyParseError("'entities' must be a list")
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            raise OntologyParseError(f"entities[{i}] must be a mapping")
        name = item.get("name")
        description = item.get("description")
        if not isinstance(name, str) or not IDENTIFIER_RE.match(name):
            problems.append(f"entity name {name!r} is not a valid identifier")
            continue
        if name in out:
            problems.append(f"duplicate entity type {name!r}")
            continue
        if not isinstance(description, str) or not description.strip():
            problems.append(f"entity {name!r} has an empty description")
            continue
        out[name] = EntityTypeDef(name=name, description=description)
    return out


def _parse_events(
    raw: object,
    entity_types: dict[str, EntityTypeDef],
    problems: list[str],
) -> dict[str, EventTypeDef]:
    if not isinstance(raw, list):
        raise OntologyParseError("'events' must be a list")

    # First pass: collect names so parents can be declared in any order.
    records: list[dict] = []
    by_class: dict[str, str] = {}  # class_name -> raw_name
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            raise OntologyParseError(f"events[{i}] must be a mapping")
        name = item.get("name")
        if not isinstance(name, str) or not name.strip():
            problems.append(f"events[{i}] has no usable name")
            continue
        cls = derive_class_name(name)
        if not IDENTIFIER_RE.match(cls):
            problems.append(f"event {name!r} derives invalid class name {cls!r}")
            continue
        if cls in by_class:
            problems.append(
                f"event {name!r} collides with {by_class[cls]!r} on class name {cls!r}"
            )
            continue
        by_class[cls] = name
        records.append(item)

    out: dict[str, EventTypeDef] = {}
    for item in records:
        name = item["name"]
        cls = derive_class_name(name)
        parent_ref = item.get("parent")
        parent: str | None = None
        if parent_ref is not None:
            if not isinstance(parent_ref, str):
                problems.append(f"event {name!r}: parent must be a string")
            else:
                pcls = derive_class_name(parent_ref)
                if pcls not in by_class:
                    problems.append(
                        f"event {name!r}: parent {parent_ref!r} is not defined"
                    )
                elif pcls == cls:
                    problems.append(f"event {name!r} is its own parent")
                else:
                    parent = pcls

        template = item.get("template")
        if not isinstance(template, str) or not template.strip():
            problems.append(f"event {name!r} has an empty template")
            template = ""

        keywords_raw = item.get("keywords", [])
        keywords: tuple[str, ...] = ()
        if keywords_raw is not None:
            if not isinstance(keywords_raw, list) or not all(
                isinstance(k, str) and k.strip() for k in keywords_raw
            ):
                problems.append(f"event {name!r}: keywords must be non-empty strings")
            else:
                keywords = tuple(keywords_raw)

        roles = _parse_roles(item.get("roles", []), name, entity_types, problems)
        for ph in PLACEHOLDER_RE.findall(template):
            if ph not in {r.name for r in roles}:
                problems.append(
                    f"event {name!r}: template placeholder {{{ph}}} names no role"
                )

        out[cls] = EventTypeDef(
            raw_name=name,
            class_name=cls,
            parent=parent,
            roles=roles,
            description_template=template,
            keywords=keywords,
        )

    _check_acyclic(out, problems)
    return out


def _parse_roles(
    raw: object,
    event_name: str,
    entity_types: dict[str, EntityTypeDef],
    problems: list[str],
) -> tuple[RoleSpec, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise OntologyParseError(f"event {event_name!r}: roles must be a list")
    roles: list[RoleSpec] = []
    seen: set[str] = set()
    for item in raw:
        if not isinstance(item, dict):
            raise OntologyParseError(f"event {event_name!r}: each role must be a mapping")
        rname = item.get("name")
        if not isinstance(rname, str) or not IDENTIFIER_RE.match(rname):
            problems.append(f"event {event_name!r}: role name {rname!r} is invalid")
            continue
        if rname in seen:
            problems.append(f"event {event_name!r}: duplicate role {rname!r}")
            continue
        seen.add(rname)
        types = item.get("types")
        if not isinstance(types, list) or not types:
            problems.append(f"event {event_name!r}: role {rname!r} lists no types")
            continue
        ok = True
        for t in types:
            if t not in entity_types:
                problems.append(
                    f"event {event_name!r}: role {rname!r} uses unknown entity type {t!r}"
                )
                ok = False
        if not ok:
            continue
        desc = item.get("description", "")
        if desc is None:
            desc = ""
        if not isinstance(desc, str):
            problems.append(f"event {event_name!r}: role {rname!r} description must be text")
            continue
        roles.append(
            RoleSpec(name=rname, allowed_entity_types=tuple(types), role_description=desc)
        )
    return tuple(roles)


def _check_acyclic(events: dict[str, EventTypeDef], problems: list[str]) -> None:
    for cls in events:
        seen = {cls}
        node = events[cls]
        while node.parent is not None:
            if node.parent in seen:
                problems.append(f"event hierarchy cycle through {node.parent!r}")
                return
            seen.add(node.parent)
            node = events[node.parent]


def emit_ontology(ontology: Ontology) -> str:
    """Serialize an ontology back to its document form.

    ``parse_ontology(emit_ontology(o))`` yields an ontology equal to ``o``.
    """
    doc: dict = {
        "entities": [
            {"name": e.name, "description": e.description}
            for e in ontology.entity_types.values()
        ],
        "events": [],
    }
    for ev in ontology.event_types.values():
        rec: dict = {"name": ev.raw_name}
        if ev.parent is not None:
            rec["parent"] = ontology.event_types[ev.parent].raw_name
        rec["template"] = ev.description_template
        if ev.keywords:
            rec["keywords"] = list(ev.keywords)
        if ev.roles:
            rec["roles"] = [
                {
                    "name": r.name,
                    "types": list(r.allowed_entity_types),
                    "description": r.role_description,
                }
                for r in ev.roles
            ]
        doc["events"].append(rec)
    return yaml.safe_dump(doc, sort_keys=False, allow_unicode=True)
