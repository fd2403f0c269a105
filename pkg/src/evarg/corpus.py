"""Training/test corpora and deterministic in-context example selection.

Corpus files are newline-delimited JSON records (one instance per line);
character offsets are 0-based, end-exclusive, counted in Unicode code
points. Datasets are read-only after loading.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .ontology import Ontology, derive_class_name, siblings


class CorpusError(Exception):
    """A corpus file is malformed or violates an instance invariant."""


@dataclass(frozen=True)
class Span:
    start: int
    end: int


@dataclass(frozen=True)
class Trigger:
    start: int
    end: int
    surface: str


@dataclass(frozen=True)
class GoldArgument:
    role: str
    surface: str
    entity_type: str
    head: Span | None = None


@dataclass(frozen=True)
class TrainingInstance:
    id: str
    sentence: str
    trigger: Trigger
    event_type: str
    arguments: tuple[GoldArgument, ...] = ()


@dataclass(frozen=True)
class Dataset:
    split: str  # train | dev | test
    instances: tuple[TrainingInstance, ...]

    def by_id(self, instance_id: str) -> TrainingInstance:
        for inst in self.instances:
            if inst.id == instance_id:
                return inst
        raise KeyError(instance_id)


def load_corpus(path: str | Path, split: str) -> Dataset:
    """Load a corpus file, validating spans and id uniqueness."""
    instances: list[TrainingInstance] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        try:
            inst = _instance_from_record(rec)
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from exc
        if inst.id in seen_ids:
            raise CorpusError(f"{path}:{lineno}: duplicate instance id {inst.id!r}")
        seen_ids.add(inst.id)
        instances.append(inst)
    return Dataset(split=split, instances=tuple(instances))


def _instance_from_record(rec: dict) -> TrainingInstance:
    sentence = rec["sentence"]
    trig = rec["trigger"]
    trigger = Trigger(start=int(trig["start"]), end=int(trig["end"]), surface=trig["surface"])
    if not (0 <= trigger.start <= trigger.end <= len(sentence)):
        raise ValueError(f"trigger span out of bounds for instance {rec.get('id')!r}")
    if sentence[trigger.start : trigger.end] != trigger.surface:
        raise ValueError(
            f"trigger surface mismatch for instance {rec.get('id')!r}: "
            f"{sentence[trigger.start:trigger.end]!r} != {trigger.surface!r}"
        )
    arguments: list[GoldArgument] = []
    for arg in rec.get("arguments", []):
        head = None
        if arg.get("head") is not None:
            h = arg["head"]
            head = Span(start=int(h["start"]), end=int(h["end"]))
            if not (0 <= head.start <= head.end <= len(sentence)):
                raise ValueError(
                    f"argument head span out of bounds for instance {rec.get('id')!r}"
                )
        arguments.append(
            GoldArgument(
                role=arg["role"],
                surface=arg["surface"],
                entity_type=arg.get("entity_type", ""),
                head=head,
            )
        )
    return TrainingInstance(
        id=str(rec["id"]),
        sentence=sentence,
        trigger=trigger,
        event_type=rec["event_type"],
        arguments=tuple(arguments),
    )


def validate_against_ontology(dataset: Dataset, ontology: Ontology) -> list[str]:
    """Check instance event types and roles against an ontology.

    Returns a list of problem descriptions, empty when clean.
    """
    problems: list[str] = []
    for inst in dataset.instances:
        try:
            event = ontology.resolve_event(inst.event_type)
        except Exception:
            problems.append(f"{inst.id}: unknown event type {inst.event_type!r}")
            continue
        role_names = {r.name for r in event.roles}
        for arg in inst.arguments:
            if arg.role not in role_names:
                problems.append(
                    f"{inst.id}: role {arg.role!r} not defined for {event.class_name}"
                )
            if arg.entity_type and arg.entity_type not in ontology.entity_types:
                problems.append(
                    f"{inst.id}: unknown entity type {arg.entity_type!r}"
                )
    return problems


def _same_type(a: str, b: str) -> bool:
    return derive_class_name(a) == derive_class_name(b)


def select_same_type(dataset: Dataset, event_type: str, k: int) -> list[TrainingInstance]:
    """First ``min(k, available)`` instances of ``event_type`` in corpus order.

    Fewer than ``k`` available is legal; callers observe the shortfall from
    the result length.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    out: list[TrainingInstance] = []
    for inst in dataset.instances:
        if len(out) >= k:
            break
        if _same_type(inst.event_type, event_type):
            out.append(inst)
    return out


@dataclass(frozen=True)
class HierarchySplit:
    train_child: str
    test_children: tuple[str, ...]


def split_hierarchy(ontology: Ontology, dataset: Dataset) -> dict[str, HierarchySplit]:
    """Per parent type, pick the child with the most training instances.

    The highest-count child becomes the training type (ties broken by
    lexicographically smaller class name); all other children become test
    types. Parents whose children carry no data at all are omitted.
    """
    counts: dict[str, int] = {}
    for inst in dataset.instances:
        cls = derive_class_name(inst.event_type)
        counts[cls] = counts.get(cls, 0) + 1

    out: dict[str, HierarchySplit] = {}
    for ev in ontology.event_types.values():
        children = ontology.children(ev.class_name)
        if not children:
            continue
        if all(counts.get(c, 0) == 0 for c in children):
            continue
        train_child = min(children, key=lambda c: (-counts.get(c, 0), c))
        test_children = tuple(c for c in children if c != train_child)
        out[ev.class_name] = HierarchySplit(
            train_child=train_child, test_children=test_children
        )
    return out


def select_sibling(
    dataset: Dataset, ontology: Ontology, event_type: str, k: int
) -> list[TrainingInstance]:
    """Examples for a test type drawn from its designated sibling training type."""
    event = ontology.resolve_event(event_type)
    split = split_hierarchy(ontology, dataset)
    if event.parent is None or event.parent not in split:
        raise CorpusError(
            f"event type {event.class_name!r} has no sibling training type with data"
        )
    decision = split[event.parent]
    if event.class_name == decision.train_child:
        raise CorpusError(
            f"event type {event.class_name!r} is the training child of "
            f"{event.parent!r}, not a test type"
        )
    return select_same_type(dataset, decision.train_child, k)


def select_non_sibling(
    dataset: Dataset,
    ontology: Ontology,
    event_type: str,
    k: int,
    seed: int,
) -> list[TrainingInstance]:
    """Examples from one seeded-random event type unrelated to ``event_type``.

    The candidate pool excludes the type itself, its siblings, and its
    ancestors; candidates must carry at least one instance. The chosen type
    is stable for a fixed seed.
    """
    from .ontology import ancestors as _ancestors

    event = ontology.resolve_event(event_type)
    excluded = {event.class_name}
    excluded.update(siblings(ontology, event.class_name))
    excluded.update(_ancestors(ontology, event.class_name))

    counts: dict[str, int] = {}
    for inst in dataset.instances:
        cls = derive_class_name(inst.event_type)
        counts[cls] = counts.get(cls, 0) + 1
    candidates = sorted(
        cls
        for cls in ontology.event_types
        if cls not in excluded and counts.get(cls, 0) > 0
    )
    if not candidates:
        raise CorpusError(
            f"no non-sibling event type with data exists for {event.class_name!r}"
        )
    chosen = random.Random(seed).choice(candidates)
    return select_same_type(dataset, chosen, k)
