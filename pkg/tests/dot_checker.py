"""A small DOT grammar checker for validating emitted graph files.

Accepts the digraph subset of the Graphviz DOT language: an optional
graph id, node statements, edge statements, and [key="value"] attribute
lists. Raises ValueError on any token or structure outside the grammar.
"""

from __future__ import annotations

import re

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<quoted>"(?:[^"\\]|\\.)*")
      | (?P<id>[A-Za-z_][A-Za-z0-9_]*|-?(?:\.[0-9]+|[0-9]+(?:\.[0-9]*)?))
      | (?P<arrow>->)
      | (?P<punct>[{}\[\]=;,])
    )""",
    re.VERBOSE,
)


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if not match:
            remainder = text[pos:].strip()
            if not remainder:
                break
            raise ValueError(f"bad token at: {remainder[:40]!r}")
        tokens.append(match.group().strip())
        pos = match.end()
    return [t for t in tokens if t]


class _Parser:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, expected: str | None = None) -> str:
        token = self.peek()
        if token is None:
            raise ValueError("unexpected end of input")
        if expected is not None and token != expected:
            raise ValueError(f"expected {expected!r}, got {token!r}")
        self.pos += 1
        return token

    def is_id(self) -> bool:
        token = self.peek()
        return token is not None and token not in "{}[]=;," and token != "->"

    def take_id(self) -> str:
        if not self.is_id():
            raise ValueError(f"expected id, got {self.peek()!r}")
        return self.take()

    def parse(self) -> None:
        self.take("digraph")
        if self.is_id():
            self.take_id()
        self.take("{")
        while self.peek() != "}":
            self.parse_statement()
        self.take("}")
        if self.peek() is not None:
            raise ValueError(f"trailing content: {self.peek()!r}")

    def parse_statement(self) -> None:
        self.take_id()
        while self.peek() == "->":
            self.take("->")
            self.take_id()
        if self.peek() == "[":
            self.parse_attrs()
        self.take(";")

    def parse_attrs(self) -> None:
        self.take("[")
        while self.peek() != "]":
            self.take_id()
            self.take("=")
            self.take_id()
            if self.peek() == ",":
                self.take(",")
        self.take("]")


def check_dot(text: str) -> None:
    """Raise ValueError unless text is a well-formed DOT digraph."""
    _Parser(_tokenize(text)).parse()
