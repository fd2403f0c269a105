"""Total parsers for model completions.

``parse_completion`` handles the constructor-call body that follows
``<var>_event = <Class>(`` using a recovering recursive-descent parser;
``parse_text_completion`` handles the two labelled text layouts. Neither
ever raises on completion text: garbage degrades into diagnostics, and
truncated input keeps every fully parsed argument.

Grammar for code completions:

    Completion := ArgList ")"? Trailing
    ArgList    := [kwarg ("," kwarg)* [","]]
    kwarg      := IDENT "=" value
    value      := list | ctor | string
    list       := "[" [value ("," value)*] "]"
    ctor       := IDENT "(" string ")"

Strings are double-quoted; recognized escapes are \\" \\\\ \\n, anything
else passes through literally. Bare strings and bare constructors where a
list is expected are wrapped into singleton lists without complaint.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

from .ontology import Ontology


class DiagnosticKind(str, Enum):
    UNKNOWN_ROLE = "unknown_role"
    UNKNOWN_ENTITY_TYPE = "unknown_entity_type"
    TRUNCATED = "truncated"
    MALFORMED_TAIL = "malformed_tail"
    DUPLICATE_ROLE = "duplicate_role"


@dataclass(frozen=True)
class Diagnostic:
    kind: DiagnosticKind
    detail: str


@dataclass(frozen=True)
class EntityMention:
    """One predicted argument filler.

    entity_type is None for bare string literals and for text-style
    completions, which carry no constructor types.
    """

    entity_type: str | None
    surface: str


@dataclass
class ParsedEvent:
    roles: dict[str, list[EntityMention]] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def has(self, kind: DiagnosticKind) -> bool:
        return any(d.kind is kind for d in self.diagnostics)


# --- tokenizer -------------------------------------------------------------


class _Token(NamedTuple):
    kind: str  # IDENT STRING LB RB LP RP COMMA EQ JUNK EOF
    text: str
    value: str
    complete: bool
    start: int


_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_ESCAPES = {'"': '"', "\\": "\\", "n": "\n"}
_PUNCT = {"[": "LB", "]": "RB", "(": "LP", ")": "RP", ",": "COMMA", "=": "EQ"}


def _lex_string(text: str, start: int) -> _Token:
    # start points at the opening quote
    out: list[str] = []
    i = start + 1
    while i < len(text):
        ch = text[i]
        if ch == '"':
            return _Token("STRING", text[start : i + 1], "".join(out), True, start)
        if ch == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            if nxt in _ESCAPES:
                out.append(_ESCAPES[nxt])
            else:
                out.append(ch)
                out.append(nxt)
            i += 2
            continue
        out.append(ch)
        i += 1
    return _Token("STRING", text[start:], "".join(out), False, start)


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == '"':
            tok = _lex_string(text, i)
            tokens.append(tok)
            i += len(tok.text)
            continue
        kind = _PUNCT.get(ch)
        if kind is not None:
            tokens.append(_Token(kind, ch, ch, True, i))
            i += 1
            continue
        m = _IDENT_RE.match(text, i)
        if m is not None:
            tokens.append(_Token("IDENT", m.group(), m.group(), True, i))
            i = m.end()
            continue
        tokens.append(_Token("JUNK", ch, ch, True, i))
        i += 1
    tokens.append(_Token("EOF", "", "", True, n))
    return tokens


# --- recursive descent with recovery ---------------------------------------


class _Truncated(Exception):
    pass


class _Malformed(Exception):
    pass


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        # open-delimiter count relative to the argument list, so recovery
        # knows when a ')' actually closes the list rather than a value
        self.depth = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
            if tok.kind in ("LB", "LP"):
                self.depth += 1
            elif tok.kind in ("RB", "RP"):
                self.depth = max(0, self.depth - 1)
        return tok

    def _string_value(self) -> str:
        tok = self.advance()
        if not tok.complete:
            raise _Truncated
        return tok.value

    def parse_value(self, depth: int = 0) -> list[EntityMention]:
        """One value position; always normalized to a mention list."""
        if depth > 64:
            raise _Malformed("value nesting too deep")
        tok = self.peek()
        if tok.kind == "LB":
            return self.parse_list(depth + 1)
        if tok.kind == "IDENT":
            return [self.parse_ctor()]
        if tok.kind == "STRING":
            return [EntityMention(None, self._string_value())]
        if tok.kind == "EOF":
            raise _Truncated
        raise _Malformed(f"unexpected {tok.text!r} where a value was expected")

    def parse_list(self, depth: int) -> list[EntityMention]:
        self.advance()  # LB
        mentions: list[EntityMention] = []
        while True:
            tok = self.peek()
            if tok.kind == "RB":
                self.advance()
                return mentions
            if tok.kind == "EOF":
                raise _Truncated
            if tok.kind == "COMMA":
                self.advance()
                continue
            # nested lists are flattened
            mentions.extend(self.parse_value(depth))

    def parse_ctor(self) -> EntityMention:
        name = self.advance().value
        tok = self.peek()
        if tok.kind == "EOF":
            raise _Truncated
        if tok.kind != "LP":
            raise _Malformed(f"expected '(' after constructor {name!r}")
        self.advance()
        tok = self.peek()
        if tok.kind == "EOF":
            raise _Truncated
        if tok.kind != "STRING":
            raise _Malformed(f"constructor {name!r} takes a single string literal")
        surface = self._string_value()
        tok = self.peek()
        if tok.kind == "EOF":
            raise _Truncated
        if tok.kind != "RP":
            raise _Malformed(f"constructor {name!r} takes a single string literal")
        self.advance()
        return EntityMention(name, surface)

    def skip_to_separator(self) -> str:
        """Recovery: drop tokens up to an argument-list comma or its ')'."""
        skipped: list[str] = []
        while True:
            tok = self.peek()
            if tok.kind == "EOF":
                break
            if self.depth == 0 and tok.kind == "COMMA":
                if not skipped:
                    skipped.append(self.advance().text)
                    break
                self.advance()
                break
            if self.depth == 0 and tok.kind == "RP":
                break
            skipped.append(self.advance().text)
        return " ".join(skipped)


def parse_completion(text: str, ontology: Ontology, event_type: str) -> ParsedEvent:
    """Parse a stop-truncated code completion into roles and diagnostics.

    Total over arbitrary input: complete keyword arguments are always
    retained, an argument cut off by the end of input is dropped with a
    truncated diagnostic, and unparseable stretches are skipped with a
    malformed_tail diagnostic.
    """
    known_roles = {r.name for r in ontology.resolve_event(event_type).roles}
    parser = _Parser(text)
    event = ParsedEvent()

    while True:
        tok = parser.peek()
        if tok.kind == "EOF":
            break
        if tok.kind == "RP":
            # closes the argument list; anything after is ignored
            break
        if tok.kind == "COMMA":
            parser.advance()
            continue
        if tok.kind != "IDENT":
            detail = parser.skip_to_separator()
            event.diagnostics.append(
                Diagnostic(DiagnosticKind.MALFORMED_TAIL, f"skipped {detail!r}")
            )
            continue

        name = parser.advance().value
        tok = parser.peek()
        if tok.kind == "EOF":
            event.diagnostics.append(
                Diagnostic(
                    DiagnosticKind.TRUNCATED, f"input ends inside argument {name!r}"
                )
            )
            break
        if tok.kind != "EQ":
            # not a kwarg after all; discard through the next separator
            detail = parser.skip_to_separator()
            event.diagnostics.append(
                Diagnostic(
                    DiagnosticKind.MALFORMED_TAIL, f"skipped {name!r} {detail!r}"
                )
            )
            continue
        parser.advance()

        try:
            mentions = parser.parse_value()
        except _Truncated:
            event.diagnostics.append(
                Diagnostic(
                    DiagnosticKind.TRUNCATED, f"input ends inside argument {name!r}"
                )
            )
            break
        except _Malformed as exc:
            parser.skip_to_separator()
            event.diagnostics.append(
                Diagnostic(
                    DiagnosticKind.MALFORMED_TAIL, f"argument {name!r}: {exc}"
                )
            )
            continue

        _record_role(event, name, mentions, known_roles, ontology)

    return event


def _record_role(
    event: ParsedEvent,
    name: str,
    mentions: list[EntityMention],
    known_roles: set[str],
    ontology: Ontology,
) -> None:
    if name in event.roles:
        event.roles[name].extend(mentions)
        event.diagnostics.append(
            Diagnostic(DiagnosticKind.DUPLICATE_ROLE, f"role {name!r} repeated; merged")
        )
    else:
        event.roles[name] = mentions
        if name not in known_roles:
            event.diagnostics.append(
                Diagnostic(DiagnosticKind.UNKNOWN_ROLE, f"role {name!r} not defined")
            )
    for mention in mentions:
        if mention.entity_type is not None and mention.entity_type not in ontology.entity_types:
            event.diagnostics.append(
                Diagnostic(
                    DiagnosticKind.UNKNOWN_ENTITY_TYPE,
                    f"entity type {mention.entity_type!r} not defined",
                )
            )
        if mention.surface == "":
            event.diagnostics.append(
                Diagnostic(
                    DiagnosticKind.MALFORMED_TAIL,
                    f"empty string literal for role {name!r}",
                )
            )


# --- text completions ------------------------------------------------------

_T1_LINE_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*:\s*(.*)$")
_QUOTED_RE = re.compile(r'"((?:\\.|[^"\\])*)"')
_T2_SLOT_RE = re.compile(
    r"\[\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?::((?:\"(?:\\.|[^\"\\])*\"|[^\]\"])*))?\]"
)


def _unescape(raw: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(raw):
        ch = raw[i]
        if ch == "\\" and i + 1 < len(raw):
            nxt = raw[i + 1]
            if nxt in _ESCAPES:
                out.append(_ESCAPES[nxt])
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def _count_unescaped_quotes(line: str) -> int:
    count = 0
    i = 0
    while i < len(line):
        if line[i] == "\\":
            i += 2
            continue
        if line[i] == '"':
            count += 1
        i += 1
    return count


def _parse_t1(text: str, event: ParsedEvent, known_roles: set[str], o: Ontology) -> None:
    for line in text.splitlines():
        if not line.strip():
            continue
        m = _T1_LINE_RE.match(line)
        if m is None:
            event.diagnostics.append(
                Diagnostic(DiagnosticKind.MALFORMED_TAIL, f"skipped line {line.strip()!r}")
            )
            continue
        name, rest = m.group(1), m.group(2)
        surfaces = [_unescape(s) for s in _QUOTED_RE.findall(rest)]
        if _count_unescaped_quotes(rest) % 2 == 1:
            event.diagnostics.append(
                Diagnostic(
                    DiagnosticKind.TRUNCATED, f"input ends inside argument {name!r}"
                )
            )
        if not surfaces:
            continue
        _record_role(event, name, [EntityMention(None, s) for s in surfaces], known_roles, o)


def _parse_t2(text: str, event: ParsedEvent, known_roles: set[str], o: Ontology) -> None:
    matched_any = False
    last_end = 0
    for m in _T2_SLOT_RE.finditer(text):
        matched_any = True
        last_end = m.end()
        name, filler = m.group(1), m.group(2)
        if filler is None or not filler.strip():
            continue  # unfilled slot
        surfaces = [_unescape(s) for s in _QUOTED_RE.findall(filler)]
        if not surfaces:
            continue
        _record_role(event, name, [EntityMention(None, s) for s in surfaces], known_roles, o)
    tail = text[last_end:]
    if "[" in tail:
        name_m = re.search(r"\[\s*([A-Za-z_][A-Za-z0-9_]*)", tail)
        detail = f"input ends inside argument {name_m.group(1)!r}" if name_m else "unclosed slot"
        event.diagnostics.append(Diagnostic(DiagnosticKind.TRUNCATED, detail))
    elif not matched_any and text.strip():
        event.diagnostics.append(
            Diagnostic(DiagnosticKind.MALFORMED_TAIL, "no template slots found")
        )


def parse_text_completion(
    style: str, text: str, ontology: Ontology, event_type: str
) -> ParsedEvent:
    """Parse a text-style completion; same recovery contract as code parsing.

    style accepts the text layout values of PromptStyle ("t1" or "t2").
    Mentions carry no entity type.
    """
    style_value = getattr(style, "value", style)
    known_roles = {r.name for r in ontology.resolve_event(event_type).roles}
    event = ParsedEvent()
    if style_value == "t1":
        _parse_t1(text, event, known_roles, ontology)
    elif style_value == "t2":
        _parse_t2(text, event, known_roles, ontology)
    else:
        raise ValueError(f"unknown text style: {style!r}")
    return event
