"""Syntactic span extraction for corpora that annotate single event tokens.

A dependency parse is given as a list of tokens with character offsets and,
for each token, the index of its head (``-1`` for the root). The span of an
event is the character extent of the subtree rooted at its head word.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol, Sequence


class SpanError(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


def head_to_span(tokens: Sequence[Token], heads: Sequence[int], head: int) -> tuple[int, int]:
    """Return the half-open character interval covered by the subtree of ``head``.

    ``heads[i]`` is the parent of token ``i``; the root has parent ``-1``.
    Raises :class:`SpanError` for out-of-range indices or cyclic arcs.
    """
    n = len(tokens)
    if len(heads) != n:
        raise SpanError(f"{len(heads)} arcs for {n} tokens")
    if not 0 <= head < n:
        raise SpanError(f"head index {head} out of range for {n} tokens")
    for i, h in enumerate(heads):
        if h != -1 and not 0 <= h < n:
            raise SpanError(f"token {i} has out-of-range parent {h}")

    children: list[list[int]] = [[] for _ in range(n)]
    for i, h in enumerate(heads):
        if h != -1:
            children[h].append(i)

    _check_acyclic(heads)

    start, end = tokens[head].start, tokens[head].end
    stack = [head]
    while stack:
        node = stack.pop()
        tok = tokens[node]
        start = min(start, tok.start)
        end = max(end, tok.end)
        stack.extend(children[node])
    return start, end


def _check_acyclic(heads: Sequence[int]) -> None:
    # 0 = unvisited, 1 = on current path, 2 = known to reach a root
    state = [0] * len(heads)
    for i in range(len(heads)):
        path = []
        node = i
        while node != -1 and state[node] == 0:
            state[node] = 1
            path.append(node)
            node = heads[node]
        if node != -1 and state[node] == 1:
            raise SpanError(f"cyclic dependency arcs through token {node}")
        for p in path:
            state[p] = 2


class DependencyParser(Protocol):
    """Anything that turns a sentence into tokens plus head indices."""

    def parse(self, text: str) -> tuple[list[Token], list[int]]: ...


_TOKEN_RE = re.compile(r"\w+(?:'\w+)?|[^\w\s]")


def simple_tokenize(text: str) -> list[Token]:
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


class StubParser:
    """Deterministic stand-in parser: every token attaches to the following token.

    The last token is the root, so the subtree of token ``i`` is tokens
    ``0..i``. It needs no model and exists so span extraction can be exercised
    end-to-end in tests.
    """

    def parse(self, text: str) -> tuple[list[Token], list[int]]:
        tokens = simple_tokenize(text)
        heads = [i + 1 for i in range(len(tokens) - 1)] + ([-1] if tokens else [])
        return tokens, heads


class SpacyParser:
    """Dependency parser backed by a spaCy pipeline (imported lazily)."""

    def __init__(self, model: str = "en_core_web_sm") -> None:
        try:
            import spacy
        except ImportError as exc:  # pragma: no cover - depends on environment
            raise RuntimeError("spaCy is not installed; use pre-parsed records or StubParser") from exc
        self._nlp = spacy.load(model)

    def parse(self, text: str) -> tuple[list[Token], list[int]]:  # pragma: no cover
        doc = self._nlp(text)
        tokens = [Token(t.text, t.idx, t.idx + len(t.text)) for t in doc]
        heads = [-1 if t.head.i == t.i else t.head.i for t in doc]
        return tokens, heads


def token_at(tokens: Sequence[Token], start: int, end: int) -> int:
    """Index of the token overlapping the character interval ``[start, end)``."""
    for i, tok in enumerate(tokens):
        if tok.start < end and start < tok.end:
            return i
    raise SpanError(f"no token overlaps characters [{start}, {end})")
