"""Argument scoring: grounding, head resolution, Arg-I/Arg-C micro-F1.

Predicted mention strings are grounded in the source sentence (first
exact occurrence, then first case-insensitive occurrence, else they stay
ungrounded and can never match). Heads are compared by character span.
Arg-I counts one-to-one head matches regardless of role; Arg-C counts
the matched pairs whose roles also agree. Counts pool per event type and
micro metrics are computed from the pooled sums.

Matching is greedy over canonically sorted pairs: same role and head
first, then remaining head-only pairs. Head-span equality partitions the
candidates into independent groups, so this greedy is exactly optimal;
the test suite checks it against exhaustive matching.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Protocol

from .corpus import Dataset, Span, TrainingInstance
from .ontology import derive_class_name
from .parsing import ParsedEvent


class HeadFinder(Protocol):
    """Resolves an argument span to its head token span.

    The returned span must lie within the input span. The default
    implementation is a heuristic; a dependency-parser-backed finder can
    be plugged in without touching the scorer.
    """

    def resolve(self, span: Span, sentence: str) -> Span: ...


_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

_PREPOSITIONS = frozenset(
    """
    about above across after against along among around as at before behind
    below beneath beside between beyond by down during for from in inside
    into near of off on onto out outside over past since through throughout
    to toward towards under until up upon with within without
    """.split()
)


class HeuristicHeadFinder:
    """Last content token before the first comma or preposition."""

    def resolve(self, span: Span, sentence: str) -> Span:
        tokens = [
            (m.start() + span.start, m.end() + span.start, m.group())
            for m in _TOKEN_RE.finditer(sentence[span.start : span.end])
        ]
        words = [t for t in tokens if t[2][0].isalnum() or t[2][0] == "_"]
        if not words:
            return span
        boundary = len(tokens)
        for i, (_, _, text) in enumerate(tokens):
            if text == "," or text.lower() in _PREPOSITIONS:
                boundary = i
                break
        candidates = [t for t in tokens[:boundary] if t in words] or words
        start, end, _ = candidates[-1]
        return Span(start, end)


def default_head(span: Span, sentence: str) -> Span:
    return HeuristicHeadFinder().resolve(span, sentence)


def ground(pred_surface: str, sentence: str) -> Span | None:
    """First exact occurrence, else first case-insensitive occurrence."""
    idx = sentence.find(pred_surface)
    if idx < 0:
        idx = sentence.lower().find(pred_surface.lower())
    if idx < 0:
        return None
    return Span(idx, idx + len(pred_surface))


@dataclass
class TypeCounts:
    n_gold: int = 0
    n_pred: int = 0
    tp_identified: int = 0
    tp_classified: int = 0


@dataclass(frozen=True)
class Metric:
    p: float
    r: float
    f1: float


@dataclass
class ScoreReport:
    per_type: dict[str, TypeCounts] = field(default_factory=dict)
    micro_arg_i: Metric = Metric(0.0, 0.0, 0.0)
    micro_arg_c: Metric = Metric(0.0, 0.0, 0.0)
    ungrounded_count: int = 0

    def to_dict(self) -> dict:
        return {
            "per_type": {
                name: vars(counts) for name, counts in sorted(self.per_type.items())
            },
            "micro": {
                "arg_i": vars(self.micro_arg_i),
                "arg_c": vars(self.micro_arg_c),
            },
            "ungrounded_count": self.ungrounded_count,
        }


def _metric(tp: int, n_pred: int, n_gold: int) -> Metric:
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gold if n_gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return Metric(p, r, f1)


def _span_key(span: Span | None) -> tuple:
    if span is None:
        return (1, 0, 0)
    return (0, span.start, span.end)


def _match_instance(
    gold_pairs: list[tuple[str, Span | None]],
    pred_pairs: list[tuple[str, Span | None]],
) -> tuple[int, int]:
    """One-to-one matching on head spans; returns (identified, classified)."""
    golds = sorted(gold_pairs, key=lambda x: (x[0], _span_key(x[1])))
    preds = sorted(pred_pairs, key=lambda x: (x[0], _span_key(x[1])))
    gold_used = [False] * len(golds)
    matched_role = 0
    matched_any = 0

    # first pass: same head span and same role
    pred_open: list[tuple[str, Span | None]] = []
    for role, head in preds:
        hit = False
        if head is not None:
            for i, (g_role, g_head) in enumerate(golds):
                if not gold_used[i] and g_head == head and g_role == role:
                    gold_used[i] = True
                    matched_role += 1
                    matched_any += 1
                    hit = True
                    break
        if not hit:
            pred_open.append((role, head))

    # second pass: same head span, role mismatch
    for role, head in pred_open:
        if head is None:
            continue
        for i, (_, g_head) in enumerate(golds):
            if not gold_used[i] and g_head == head:
                gold_used[i] = True
                matched_any += 1
                break

    return matched_any, matched_role


def score(
    preds: list[tuple[str, ParsedEvent]],
    golds: Dataset,
    hf: HeadFinder | None = None,
) -> ScoreReport:
    """Score parsed predictions against gold arguments.

    preds pairs an instance id from golds with its ParsedEvent; a missing
    id raises KeyError. Predictions are deduped per instance by role and
    head span (ungrounded ones by role and surface) before counting.
    """
    hf = hf or HeuristicHeadFinder()
    report = ScoreReport()

    for instance_id, parsed in preds:
        inst = golds.by_id(instance_id)
        counts = report.per_type.setdefault(
            derive_class_name(inst.event_type), TypeCounts()
        )

        gold_pairs: list[tuple[str, Span | None]] = []
        for arg in inst.arguments:
            head = arg.head
            if head is None:
                span = ground(arg.surface, inst.sentence)
                head = hf.resolve(span, inst.sentence) if span is not None else None
            gold_pairs.append((arg.role, head))

        pred_pairs: list[tuple[str, Span | None]] = []
        seen: set[tuple] = set()
        for role, mentions in parsed.roles.items():
            for mention in mentions:
                span = ground(mention.surface, inst.sentence)
                if span is None:
                    key = (role, None, mention.surface)
                    head = None
                else:
                    head = hf.resolve(span, inst.sentence)
                    key = (role, head.start, head.end)
                if key in seen:
                    continue
                seen.add(key)
                if head is None:
                    report.ungrounded_count += 1
                pred_pairs.append((role, head))

        identified, classified = _match_instance(gold_pairs, pred_pairs)
        counts.n_gold += len(gold_pairs)
        counts.n_pred += len(pred_pairs)
        counts.tp_identified += identified
        counts.tp_classified += classified

    n_gold = sum(c.n_gold for c in report.per_type.values())
    n_pred = sum(c.n_pred for c in report.per_type.values())
    tp_i = sum(c.tp_identified for c in report.per_type.values())
    tp_c = sum(c.tp_classified for c in report.per_type.values())
    report.micro_arg_i = _metric(tp_i, n_pred, n_gold)
    report.micro_arg_c = _metric(tp_c, n_pred, n_gold)
    return report
