"""Shared text helpers: sentence splitting, tokenization, stemming.

Sentence splitting is deliberately naive (terminator followed by
whitespace or end of text, no abbreviation handling): the quality checks
only need stable 3-sentence thresholds, and a deterministic rule beats a
smarter one that can drift between library versions.
"""

from __future__ import annotations

import itertools
import re

_SENTENCE_END = re.compile(r"[.!?]+(?=\s|$)")
_WORD = re.compile(r"[a-z0-9]+(?:[-'][a-z0-9]+)*")

_seq = itertools.count(1)


def next_seq() -> int:
    """Process-wide monotonic sequence number for event ordering."""
    return next(_seq)


def sentence_spans(text: str) -> list[tuple[int, int]]:
    """Return (start, end) spans of sentences, end inclusive of the terminator."""
    spans = []
    start = 0
    for m in _SENTENCE_END.finditer(text):
        end = m.end()
        if text[start:end].strip():
            spans.append((start, end))
        start = end
    if text[start:].strip():
        spans.append((start, len(text)))
    return spans


def split_sentences(text: str) -> list[str]:
    return [text[a:b].strip() for a, b in sentence_spans(text)]


def sentence_count(text: str) -> int:
    return len(sentence_spans(text))


def words(text: str) -> list[str]:
    """Whitespace tokens; hyphenated compounds stay one word."""
    return text.split()


def word_count(text: str) -> int:
    return len(text.split())


def normalize_ws(text: str) -> str:
    """Collapse all whitespace runs to single spaces and trim."""
    return " ".join(text.split())


def content_tokens(text: str) -> list[str]:
    """Lowercased alphanumeric tokens, internal hyphens/apostrophes kept."""
    return _WORD.findall(text.lower())


def stem(word: str) -> str:
    """Conservative suffix stripper: plural and verb inflections only.

    Matches inflected forms of the same root ("mutations"/"mutation",
    "cycling"/"cycle") without attempting derivational morphology.
    """
    w = word.lower()
    if w.endswith("'s"):
        w = w[:-2]
    if len(w) > 4 and w.endswith("ies"):
        w = w[:-3] + "y"
    elif len(w) > 4 and w.endswith(("sses", "shes", "ches", "xes", "zes")):
        w = w[:-2]
    elif len(w) > 3 and w.endswith("s") and not w.endswith(("ss", "us", "is")):
        w = w[:-1]
    if len(w) > 5 and w.endswith("ing"):
        w = w[:-3]
        if len(w) > 2 and w[-1] == w[-2] and w[-1] not in "lsz":
            w = w[:-1]
    elif len(w) > 4 and w.endswith("ed"):
        w = w[:-2]
        if len(w) > 2 and w[-1] == w[-2] and w[-1] not in "lsz":
            w = w[:-1]
    # final-e insensitivity so "cycle" and "cycling" share a root form
    if len(w) > 3 and w.endswith("e"):
        w = w[:-1]
    return w
