"""Cohen's kappa over paired accept/reject decisions.

Observed agreement is the diagonal share (a+d)/N; chance agreement comes
from the marginals. Note some write-ups misprint P_o as (a+b)/N, which
is the human-Yes margin, not agreement; the diagonal definition is the
one that reproduces standard results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import ValidationError


class DegenerateMarginalsError(ValidationError):
    """Chance agreement is 1, leaving kappa undefined; carries p_o/p_e."""

    def __init__(self, p_o: float, p_e: float):
        super().__init__("kappa undefined: expected agreement by chance equals 1")
        self.p_o = p_o
        self.p_e = p_e


BANDS = (
    (0.20, "slight"),
    (0.40, "fair"),
    (0.60, "moderate"),
    (0.80, "substantial"),
    (1.00, "almost_perfect"),
)


def band_for(kappa: float) -> str:
    """Interpretation band; boundary values belong to the lower band."""
    if kappa <= 0:
        return "none_or_negative"
    for upper, name in BANDS:
        if kappa <= upper:
            return name
    return "almost_perfect"


@dataclass(frozen=True)
class ContingencyTable:
    """2x2 joint decision counts: rows human yes/no, columns machine yes/no."""

    a: int  # both yes
    b: int  # human yes, machine no
    c: int  # human no, machine yes
    d: int  # both no

    def __post_init__(self):
        for name in "abcd":
            if getattr(self, name) < 0:
                raise ValidationError(f"count {name} is negative")
        if self.total < 1:
            raise ValidationError("contingency table is empty")

    @property
    def total(self) -> int:
        return self.a + self.b + self.c + self.d


@dataclass(frozen=True)
class KappaResult:
    p_o: float
    p_e: float
    kappa: float
    band: str


def build_contingency(human: Mapping[str, bool], machine: Mapping[str, bool]) -> ContingencyTable:
    """Pair two id -> yes/no decision maps into joint counts."""
    if set(human) != set(machine):
        missing = set(human) ^ set(machine)
        raise ValidationError(f"decision id sets differ (e.g. {sorted(missing)[:3]})")
    if not human:
        raise ValidationError("no paired decisions given")
    a = b = c = d = 0
    for item_id, h in human.items():
        m = machine[item_id]
        if h and m:
            a += 1
        elif h and not m:
            b += 1
        elif not h and m:
            c += 1
        else:
            d += 1
    return ContingencyTable(a, b, c, d)


def cohen_kappa(t: ContingencyTable) -> KappaResult:
    """kappa = (P_o - P_e) / (1 - P_e) from the 2x2 table."""
    n = t.total
    p_o = (t.a + t.d) / n
    p_e = ((t.a + t.b) * (t.a + t.c) + (t.c + t.d) * (t.b + t.d)) / (n * n)
    if p_e == 1.0:
        raise DegenerateMarginalsError(p_o, p_e)
    kappa = (p_o - p_e) / (1 - p_e)
    return KappaResult(p_o=p_o, p_e=p_e, kappa=kappa, band=band_for(kappa))


def format_report(t: ContingencyTable, result: KappaResult) -> str:
    """Text table with marginals, mirroring the usual 2x2 layout."""
    rows = [
        ("", "machine: yes", "machine: no", "row total"),
        ("human: yes", str(t.a), str(t.b), str(t.a + t.b)),
        ("human: no", str(t.c), str(t.d), str(t.c + t.d)),
        ("column total", str(t.a + t.c), str(t.b + t.d), str(t.total)),
    ]
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    lines.append("")
    lines.append(f"P_o = {result.p_o:.3f}   P_e = {result.p_e:.3f}")
    lines.append(f"kappa = {result.kappa:.3f} ({result.band})")
    return "\n".join(lines)
