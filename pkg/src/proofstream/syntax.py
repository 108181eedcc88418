"""Concrete syntax: lexing, formula parsing, span splitting, normalization.

Parse failures are values (`Malformed` commands), never exceptions that
abort document processing: an editor session must keep checking whatever
else still makes sense. Only `parse_formula` raises, and `parse_command`
converts those into `Malformed`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

from .kernel import FALSE, And, Atom, Formula, Impl, Or

KEYWORDS = frozenset(
    {
        "def",
        "lemma",
        "proof",
        "qed",
        "false",
        "intro",
        "exact",
        "apply",
        "split",
        "left",
        "right",
        "cases",
        "by_contra",
        "exfalso",
        "search",
    }
)

# Token kinds
IDENT = "ident"
INT = "int"
KEYWORD = "keyword"
SYM = "sym"
DOT = "dot"
BAD = "bad"  # unlexable character, kept so normalization stays total


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    offset: int  # byte offset into the lexed text


def _is_ident_start(ch: str) -> bool:
    return ch.isascii() and (ch.isalpha() or ch == "_")


def _is_ident_char(ch: str) -> bool:
    return ch.isascii() and (ch.isalnum() or ch == "_")


def lex(text: str) -> Tuple[List[Token], int]:
    """Tokenize, stripping (nestable) comments. Returns (tokens, total bytes)."""
    tokens: List[Token] = []
    i = 0
    b = 0
    n = len(text)
    depth = 0
    while i < n:
        ch = text[i]
        two = text[i : i + 2]
        if depth > 0:
            if two == "(*":
                depth += 1
                i += 2
                b += 2
            elif two == "*)":
                depth -= 1
                i += 2
                b += 2
            else:
                i += 1
                b += len(ch.encode("utf-8"))
            continue
        if two == "(*":
            depth = 1
            i += 2
            b += 2
            continue
        if ch.isspace():
            i += 1
            b += len(ch.encode("utf-8"))
            continue
        if _is_ident_start(ch):
            j = i
            while j < n and _is_ident_char(text[j]):
                j += 1
            word = text[i:j]
            kind = KEYWORD if word in KEYWORDS else IDENT
            tokens.append(Token(kind, word, b))
            b += j - i  # ident chars are ASCII
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token(INT, text[i:j], b))
            b += j - i
            i = j
            continue
        if two in ("->", "/\\", "\\/", ":="):
            tokens.append(Token(SYM, two, b))
            i += 2
            b += 2
            continue
        if ch == ".":
            tokens.append(Token(DOT, ".", b))
            i += 1
            b += 1
            continue
        if ch in "~():":
            tokens.append(Token(SYM, ch, b))
            i += 1
            b += 1
            continue
        tokens.append(Token(BAD, ch, b))
        i += 1
        b += len(ch.encode("utf-8"))
    return tokens, b


class FormulaSyntaxError(Exception):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(message)


class ExpectedFormula(FormulaSyntaxError):
    pass


class UnbalancedParen(FormulaSyntaxError):
    pass


class _FormulaParser:
    """Recursive descent. Precedence: ~ binds tightest, then /\\, \\/, ->.

    -> is right-associative; /\\ and \\/ are left-associative.
    """

    def __init__(self, tokens: List[Token], end_offset: int):
        self.tokens = tokens
        self.pos = 0
        self.end_offset = end_offset

    def peek(self) -> Optional[Token]:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos]
        return None

    def _here(self) -> int:
        t = self.peek()
        return t.offset if t else self.end_offset

    def parse_impl(self) -> Formula:
        left = self.parse_or()
        t = self.peek()
        if t and t.kind == SYM and t.text == "->":
            self.pos += 1
            return Impl(left, self.parse_impl())
        return left

    def parse_or(self) -> Formula:
        left = self.parse_and()
        while True:
            t = self.peek()
            if t and t.kind == SYM and t.text == "\\/":
                self.pos += 1
                left = Or(left, self.parse_and())
            else:
                return left

    def parse_and(self) -> Formula:
        left = self.parse_unary()
        while True:
            t = self.peek()
            if t and t.kind == SYM and t.text == "/\\":
                self.pos += 1
                left = And(left, self.parse_unary())
            else:
                return left

    def parse_unary(self) -> Formula:
        t = self.peek()
        if t is None:
            raise ExpectedFormula("expected a formula", self.end_offset)
        if t.kind == SYM and t.text == "~":
            self.pos += 1
            return Impl(self.parse_unary(), FALSE)
        if t.kind == KEYWORD and t.text == "false":
            self.pos += 1
            return FALSE
        if t.kind == IDENT:
            self.pos += 1
            return Atom(t.text)
        if t.kind == SYM and t.text == "(":
            self.pos += 1
            inner = self.parse_impl()
            closing = self.peek()
            if not (closing and closing.kind == SYM and closing.text == ")"):
                raise UnbalancedParen("missing closing parenthesis", self._here())
            self.pos += 1
            return inner
        if t.kind == SYM and t.text == ")":
            raise UnbalancedParen("unmatched closing parenthesis", t.offset)
        raise ExpectedFormula(f"expected a formula, found {t.text!r}", t.offset)


def parse_formula(text: str) -> Formula:
    """Parse a complete formula. Raises ExpectedFormula / UnbalancedParen."""
    tokens, total = lex(text)
    parser = _FormulaParser(tokens, total)
    formula = parser.parse_impl()
    trailing = parser.peek()
    if trailing is not None:
        if trailing.kind == SYM and trailing.text == ")":
            raise UnbalancedParen("unmatched closing parenthesis", trailing.offset)
        raise ExpectedFormula(
            f"unexpected {trailing.text!r} after formula", trailing.offset
        )
    return formula


# Precedence levels for printing: -> 1, \/ 2, /\ 3, ~ 4.
def _render(f: Formula, parent: int) -> str:
    if isinstance(f, Atom):
        return f.name
    if f == FALSE:
        return "false"
    if isinstance(f, Impl) and f.rhs == FALSE:
        return f"~{_render(f.lhs, 4)}"
    if isinstance(f, Impl):
        s = f"{_render(f.lhs, 2)} -> {_render(f.rhs, 1)}"
        level = 1
    elif isinstance(f, Or):
        s = f"{_render(f.lhs, 2)} \\/ {_render(f.rhs, 3)}"
        level = 2
    else:
        s = f"{_render(f.lhs, 3)} /\\ {_render(f.rhs, 4)}"
        level = 3
    if level < parent:
        return f"({s})"
    return s


def pretty(f: Formula) -> str:
    """Minimal-parenthesis rendering; parse_formula(pretty(f)) == f."""
    return _render(f, 0)


# --- proof steps -----------------------------------------------------------


@dataclass(frozen=True)
class Intro:
    name: str


@dataclass(frozen=True)
class Exact:
    name: str


@dataclass(frozen=True)
class Apply:
    name: str


@dataclass(frozen=True)
class Split:
    pass


@dataclass(frozen=True)
class Left:
    pass


@dataclass(frozen=True)
class Right:
    pass


@dataclass(frozen=True)
class Cases:
    name: str


@dataclass(frozen=True)
class ByContra:
    name: str


@dataclass(frozen=True)
class Exfalso:
    pass


@dataclass(frozen=True)
class Search:
    depth: int

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("search depth must be at least 1")


ProofStep = Union[
    Intro, Exact, Apply, Split, Left, Right, Cases, ByContra, Exfalso, Search
]


def step_text(step: ProofStep) -> str:
    """Concrete syntax of a step, without the terminator."""
    if isinstance(step, Intro):
        return f"intro {step.name}"
    if isinstance(step, Exact):
        return f"exact {step.name}"
    if isinstance(step, Apply):
        return f"apply {step.name}"
    if isinstance(step, Split):
        return "split"
    if isinstance(step, Left):
        return "left"
    if isinstance(step, Right):
        return "right"
    if isinstance(step, Cases):
        return f"cases {step.name}"
    if isinstance(step, ByContra):
        return f"by_contra {step.name}"
    if isinstance(step, Exfalso):
        return "exfalso"
    return f"search {step.depth}"


def render_steps(steps) -> str:
    """Render a step sequence as insertable text: "intro h1. exact h1."."""
    return " ".join(step_text(s) + "." for s in steps)


# --- commands ---------------------------------------------------------------


@dataclass(frozen=True)
class Def:
    name: str
    body: Formula  # as written; alias expansion happens at elaboration time


@dataclass(frozen=True)
class LemmaHeader:
    name: str
    statement: Formula  # as written, unexpanded


@dataclass(frozen=True)
class ProofOpen:
    pass


@dataclass(frozen=True)
class Step:
    step: ProofStep


@dataclass(frozen=True)
class Qed:
    pass


@dataclass(frozen=True)
class Malformed:
    message: str
    offset: int  # byte offset into the span's raw text


Command = Union[Def, LemmaHeader, ProofOpen, Step, Qed, Malformed]


# --- spans ------------------------------------------------------------------


@dataclass(frozen=True)
class SpanText:
    raw: str
    start: int  # byte offset into the document
    end: int
    terminated: bool


def split_spans(text: str) -> List[SpanText]:
    """Split a document into command spans.

    A span is a maximal chunk ending at a '.' outside comments; it starts at
    the first non-whitespace character after the previous terminator and may
    contain comments and internal whitespace. Trailing text with no
    terminator becomes a final span flagged unterminated. Always total.
    """
    spans: List[SpanText] = []
    i = 0
    b = 0
    n = len(text)
    depth = 0
    start_i: Optional[int] = None
    start_b = 0
    last_content_i = 0  # char index just past the last non-whitespace char
    last_content_b = 0
    while i < n:
        ch = text[i]
        two = text[i : i + 2]
        if depth > 0:
            if two == "(*":
                depth += 1
                i += 2
                b += 2
            elif two == "*)":
                depth -= 1
                i += 2
                b += 2
            else:
                i += 1
                b += len(ch.encode("utf-8"))
            last_content_i, last_content_b = i, b
            continue
        if two == "(*":
            if start_i is None:
                start_i, start_b = i, b
            depth = 1
            i += 2
            b += 2
            last_content_i, last_content_b = i, b
            continue
        if ch.isspace():
            i += 1
            b += len(ch.encode("utf-8"))
            continue
        if start_i is None:
            start_i, start_b = i, b
        if ch == ".":
            i += 1
            b += 1
            spans.append(SpanText(text[start_i:i], start_b, b, True))
            start_i = None
        else:
            i += 1
            b += len(ch.encode("utf-8"))
        last_content_i, last_content_b = i, b
    if start_i is not None:
        spans.append(
            SpanText(text[start_i:last_content_i], start_b, last_content_b, False)
        )
    return spans


def normalize(text: str) -> str:
    """Comment-free, whitespace-canonical token stream; the hashing input.

    Idempotent, and invariant under comment insertion and whitespace edits.
    """
    tokens, _ = lex(text)
    return " ".join(t.text for t in tokens)


def _expect_name(tokens: List[Token], pos: int, end: int) -> Tuple[str, int]:
    if pos >= len(tokens):
        raise FormulaSyntaxError("expected name", end)
    t = tokens[pos]
    if t.kind != IDENT:
        raise FormulaSyntaxError("expected name", t.offset)
    return t.text, pos + 1


def _expect_sym(tokens: List[Token], pos: int, sym: str, end: int) -> int:
    if pos >= len(tokens):
        raise FormulaSyntaxError(f"expected {sym!r}", end)
    t = tokens[pos]
    if not (t.kind == SYM and t.text == sym):
        raise FormulaSyntaxError(f"expected {sym!r}", t.offset)
    return pos + 1


def _sub_formula(tokens: List[Token], pos: int, end: int) -> Tuple[Formula, int]:
    parser = _FormulaParser(tokens, end)
    parser.pos = pos
    formula = parser.parse_impl()
    return formula, parser.pos


def parse_command(span: SpanText) -> Command:
    """Keyword-directed parse of one span; failures become Malformed values."""
    tokens, total = lex(span.raw)
    if not span.terminated:
        return Malformed("unterminated command (missing '.')", total)
    if not tokens or tokens[-1].kind != DOT:
        return Malformed("unterminated command (missing '.')", total)
    body = tokens[:-1]
    if not body:
        return Malformed("empty command", 0)
    head = body[0]

    def finish(cmd: Command, pos: int) -> Command:
        if pos != len(body):
            t = body[pos]
            return Malformed(f"unexpected {t.text!r}", t.offset)
        return cmd

    try:
        if head.kind == KEYWORD and head.text == "def":
            name, pos = _expect_name(body, 1, total)
            pos = _expect_sym(body, pos, ":=", total)
            formula, pos = _sub_formula(body, pos, total)
            return finish(Def(name, formula), pos)
        if head.kind == KEYWORD and head.text == "lemma":
            name, pos = _expect_name(body, 1, total)
            pos = _expect_sym(body, pos, ":", total)
            formula, pos = _sub_formula(body, pos, total)
            return finish(LemmaHeader(name, formula), pos)
        if head.kind == KEYWORD and head.text == "proof":
            return finish(ProofOpen(), 1)
        if head.kind == KEYWORD and head.text == "qed":
            return finish(Qed(), 1)
        if head.kind == KEYWORD and head.text in ("intro", "exact", "apply", "cases", "by_contra"):
            name, pos = _expect_name(body, 1, total)
            step: ProofStep
            if head.text == "intro":
                step = Intro(name)
            elif head.text == "exact":
                step = Exact(name)
            elif head.text == "apply":
                step = Apply(name)
            elif head.text == "cases":
                step = Cases(name)
            else:
                step = ByContra(name)
            return finish(Step(step), pos)
        if head.kind == KEYWORD and head.text == "split":
            return finish(Step(Split()), 1)
        if head.kind == KEYWORD and head.text == "left":
            return finish(Step(Left()), 1)
        if head.kind == KEYWORD and head.text == "right":
            return finish(Step(Right()), 1)
        if head.kind == KEYWORD and head.text == "exfalso":
            return finish(Step(Exfalso()), 1)
        if head.kind == KEYWORD and head.text == "search":
            if len(body) < 2 or body[1].kind != INT:
                off = body[1].offset if len(body) > 1 else total
                return Malformed("expected search depth", off)
            depth = int(body[1].text)
            if depth < 1:
                return Malformed("search depth must be at least 1", body[1].offset)
            return finish(Step(Search(depth)), 2)
    except FormulaSyntaxError as e:
        return Malformed(str(e), e.offset)
    return Malformed(f"unknown command {head.text!r}", head.offset)
