"""Bundled data: prompt templates, criteria text, word lists, fixtures."""

from __future__ import annotations

import csv
import io
import json
import re
from functools import lru_cache
from importlib import resources


def _read(name: str) -> str:
    return (resources.files(__name__) / name).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def criteria_texts() -> dict[int, str]:
    """Full text of the nine quality criteria, keyed 1-9."""
    raw = _read("criteria.txt")
    parts = re.split(r"(?m)^(\d)\.\s", raw)
    out = {}
    for i in range(1, len(parts), 2):
        out[int(parts[i])] = parts[i + 1].strip()
    return out


def criteria_block() -> str:
    """The nine criteria as one numbered block for prompt embedding."""
    texts = criteria_texts()
    return "\n\n".join(f"{n}. {texts[n]}" for n in sorted(texts))


@lru_cache(maxsize=None)
def stoplist() -> frozenset[str]:
    return frozenset(_read("stoplist.txt").split())


@lru_cache(maxsize=None)
def general_terms() -> frozenset[str]:
    return frozenset(w.strip().lower() for w in _read("general_terms.txt").splitlines() if w.strip())


def demo_fixtures() -> dict[str, dict[str, str]]:
    """Role-keyed mock fixtures for the bundled offline demo flow."""
    return json.loads(_read("demo_fixtures.json"))


def herd_immunity_features() -> dict[str, list[str]]:
    """Contextual feature lists for the ten-item herd-immunity series."""
    return json.loads(_read("herd_immunity_features.json"))["features"]


def herd_immunity_items() -> dict[str, str]:
    """Raw item texts for the ten-item herd-immunity series."""
    return json.loads(_read("herd_immunity_items.json"))


def herd_immunity_reference_grid() -> tuple[list[str], list[list[float]]]:
    """The externally computed contextual similarity grid for that series.

    Returned as (item ids, 10x10 values). Known to disagree with fresh
    set arithmetic in some cells; used by the errata comparator.
    """
    text = _read("herd_immunity_reference_grid.csv")
    rows = list(csv.reader(io.StringIO(text)))
    ids = rows[0][1:]
    values = [[float(v) for v in row[1:]] for row in rows[1:]]
    return ids, values
