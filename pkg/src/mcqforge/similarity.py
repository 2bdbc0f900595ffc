"""Feature-model similarity scoring, conceptual screening, and originality.

Two texts are compared through their feature sets: score =
theta*|shared| - alpha*|unique to A| - beta*|unique to B|, with set
cardinality as the salience measure. Defaults theta=1, alpha=beta=0.5
weight similarity over difference; a negative score reads as "perceived
different". Contextual features come from an extractor role (or manual
entry, which is first-class); linguistic features are distinct word
tokens of the item text.

The externally computed reference grid bundled for the herd-immunity
series disagrees with fresh set arithmetic in a few cells, so grid
comparison emits an errata report instead of failing hard.
"""

from __future__ import annotations

import math
import re
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from . import prompts
from .errors import ParseFailureError, ValidationError
from .items import McqItem, render_mcq
from .providers import ProviderHub
from .textutil import content_tokens, normalize_ws, split_sentences, stem as stem_word

KINDS = ("linguistic", "contextual")


@dataclass(frozen=True)
class TverskyParams:
    theta: float = 1.0
    alpha: float = 0.5
    beta: float = 0.5

    def __post_init__(self):
        for name in ("theta", "alpha", "beta"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValidationError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class FeatureSet:
    item_id: str
    kind: str
    features: frozenset[str]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown feature kind {self.kind!r}")
        object.__setattr__(self, "features", frozenset(self.features))


def normalize_feature(text: str) -> str:
    """Lowercase and collapse whitespace; matching is exact afterwards."""
    return normalize_ws(text).lower()


def contextual_features(item_id: str, features: Iterable[str]) -> FeatureSet:
    """Manual feature-set entry; also used to load stored fixtures."""
    normalized = frozenset(normalize_feature(f) for f in features if f.strip())
    if not normalized:
        raise ValidationError("feature set is empty")
    return FeatureSet(item_id=item_id, kind="contextual", features=normalized)


def tversky_score(a: FeatureSet, b: FeatureSet, params: TverskyParams = TverskyParams()) -> float:
    """theta*|A∩B| - alpha*|A\\B| - beta*|B\\A| over the two feature sets."""
    if a.kind != b.kind:
        raise ValidationError(f"feature kind mismatch: {a.kind} vs {b.kind}")
    shared = len(a.features & b.features)
    only_a = len(a.features - b.features)
    only_b = len(b.features - a.features)
    return params.theta * shared - params.alpha * only_a - params.beta * only_b


@dataclass(frozen=True)
class TokenPolicy:
    """Toggles for linguistic tokenization (defaults follow common usage:
    stopwords kept, no stemming, options included, explanation excluded)."""

    keep_stopwords: bool = True
    stemming: bool = False
    include_options: bool = True
    include_explanation: bool = False


def tokenize_linguistic(text: str, policy: TokenPolicy = TokenPolicy(),
                        item_id: str = "") -> FeatureSet:
    """Distinct lowercased word tokens of a text as a linguistic feature set."""
    tokens = content_tokens(text)
    if not policy.keep_stopwords:
        from . import data

        stop = data.stoplist()
        tokens = [t for t in tokens if t not in stop]
    if policy.stemming:
        tokens = [stem_word(t) for t in tokens]
    features = frozenset(tokens)
    if not features:
        raise ValidationError("no tokens left after normalization")
    return FeatureSet(item_id=item_id, kind="linguistic", features=features)


def item_linguistic_features(item: McqItem, policy: TokenPolicy = TokenPolicy()) -> FeatureSet:
    return tokenize_linguistic(item_compared_text(item, policy), policy, item_id=item.id)


def item_compared_text(item: McqItem, policy: TokenPolicy = TokenPolicy()) -> str:
    """The text entering linguistic comparison under a policy."""
    parts = [item.stem, item.question]
    if policy.include_options:
        parts.extend(item.options)
    if policy.include_explanation and item.explanation:
        parts.append(item.explanation)
    return " ".join(parts)


_BULLET = re.compile(r"^\s*(?:[-*•●○▪]|\d+[.)])\s*(.+?)\s*$")


def parse_feature_bullets(response: str) -> list[str]:
    out = [m.group(1) for m in map(_BULLET.match, response.splitlines()) if m]
    return out


def extract_contextual_features(
    hub: ProviderHub, item: McqItem, concept: str, role: str = "feature_extractor"
) -> FeatureSet:
    """Ask the extractor role for an item's contextual features.

    Manual entry via ``contextual_features`` overrides anything extracted
    here; scores always use whichever set the caller supplies.
    """
    prompt = prompts.contextual_features_prompt(
        concept=concept, item_text=render_mcq(item, mark_correct=False)
    )
    response, _ = hub.dispatch(role, prompt)
    bullets = parse_feature_bullets(response)
    if not bullets:
        raise ParseFailureError("no bullet list found in extractor response")
    return contextual_features(item.id, bullets)


@dataclass
class SimilaritySummary:
    """Aggregates over off-diagonal cells (population sd)."""

    mean: float
    sd: float
    minimum: float
    maximum: float
    prototype_mean: float
    prototype_sd: float


@dataclass
class SimilarityMatrix:
    kind: str
    params: TverskyParams
    item_ids: list[str]
    values: list[list[float]]

    def cell(self, i: int, j: int) -> float:
        return self.values[i][j]

    def summary(self) -> SimilaritySummary:
        n = len(self.item_ids)
        off = [self.values[i][j] for i in range(n) for j in range(i + 1, n)]
        proto = self.values[0][1:] if n > 1 else []
        return SimilaritySummary(
            mean=sum(off) / len(off),
            sd=statistics.pstdev(off),
            minimum=min(off),
            maximum=max(off),
            prototype_mean=sum(proto) / len(proto),
            prototype_sd=statistics.pstdev(proto),
        )

    def to_csv(self, precision: Optional[int] = 1) -> str:
        """CSV grid; precision=None keeps full float repr."""

        def fmt(v: float) -> str:
            return repr(v) if precision is None else f"{v:.{precision}f}"

        lines = ["id," + ",".join(self.item_ids)]
        for item_id, row in zip(self.item_ids, self.values):
            lines.append(item_id + "," + ",".join(fmt(v) for v in row))
        return "\n".join(lines) + "\n"


def pairwise_matrix(
    feature_sets: Sequence[FeatureSet],
    kind: Optional[str] = None,
    params: TverskyParams = TverskyParams(),
) -> SimilarityMatrix:
    """Full symmetric-by-construction grid including the diagonal."""
    if len(feature_sets) < 2:
        raise ValidationError("pairwise matrix needs at least 2 items")
    kind = kind or feature_sets[0].kind
    for fs in feature_sets:
        if fs.kind != kind:
            raise ValidationError(f"feature set {fs.item_id} has kind {fs.kind}, wanted {kind}")
    values = [
        [tversky_score(a, b, params) for b in feature_sets]
        for a in feature_sets
    ]
    return SimilarityMatrix(
        kind=kind, params=params,
        item_ids=[fs.item_id for fs in feature_sets], values=values,
    )


@dataclass(frozen=True)
class MatrixErratum:
    row_id: str
    col_id: str
    computed: float
    reference: float


def matrix_errata(matrix: SimilarityMatrix, reference: Sequence[Sequence[float]],
                  tolerance: float = 1e-9) -> list[MatrixErratum]:
    """Cells where a reference grid disagrees with the computed one.

    Reported, not raised: external grids may carry their own arithmetic
    slips and the comparator's job is to surface them.
    """
    n = len(matrix.item_ids)
    if len(reference) != n or any(len(r) != n for r in reference):
        raise ValidationError("reference grid shape mismatch")
    out = []
    for i in range(n):
        for j in range(n):
            if abs(matrix.values[i][j] - reference[i][j]) > tolerance:
                out.append(MatrixErratum(matrix.item_ids[i], matrix.item_ids[j],
                                         matrix.values[i][j], reference[i][j]))
    return out


@dataclass
class ConceptualMatchReport:
    prototype_id: str
    candidate_ids: list[str]
    same_concept: dict[str, bool]
    concepts: str = ""

    @property
    def percentage(self) -> float:
        """Share of the 1+N pool on the prototype's concept (prototype counts)."""
        matches = sum(1 for v in self.same_concept.values() if v)
        return 100.0 * (matches + 1) / (len(self.candidate_ids) + 1)

    def covers(self, item_ids: Iterable[str]) -> bool:
        return all(self.same_concept.get(i, False) for i in item_ids)


_YESNO_LINE = re.compile(r"^\s*MCQ\s*(\d+)\s*[:.\-]\s*(yes|no)\b", re.IGNORECASE)


def conceptual_match(
    hub: ProviderHub,
    prototype: McqItem,
    candidates: Sequence[McqItem],
    role: str = "evaluator",
) -> ConceptualMatchReport:
    """Two-dispatch screen: name the prototype's concepts, then ask
    whether each candidate tests the same ones."""
    if not candidates:
        raise ValidationError("conceptual match needs at least one candidate")
    proto_text = render_mcq(prototype, mark_correct=False)
    concepts, _ = hub.dispatch(role, prompts.prototype_concepts_prompt(prototype_item=proto_text))
    block = "\n\n".join(
        f"MCQ{i}:\n{render_mcq(c, mark_correct=False)}" for i, c in enumerate(candidates, start=2)
    )
    response, _ = hub.dispatch(
        role,
        prompts.same_concept_prompt(
            prototype_item=proto_text, candidates_block=block, last=len(candidates) + 1
        ),
    )
    judgments: dict[int, bool] = {}
    for line in response.splitlines():
        m = _YESNO_LINE.match(line)
        if m:
            judgments[int(m.group(1))] = m.group(2).lower() == "yes"
    same = {}
    for i, c in enumerate(candidates, start=2):
        if i not in judgments:
            raise ParseFailureError(f"no yes/no judgment found for MCQ{i}")
        same[c.id] = judgments[i]
    return ConceptualMatchReport(
        prototype_id=prototype.id,
        candidate_ids=[c.id for c in candidates],
        same_concept=same,
        concepts=concepts.strip(),
    )


# --- originality screening -------------------------------------------------

ORIGINALITY_THRESHOLD = 10.0  # strict less-than passes
DEFAULT_SHINGLE_SIZE = 5


class CorpusIndex:
    """Word-shingle index over reference documents."""

    def __init__(self, shingle_size: int = DEFAULT_SHINGLE_SIZE):
        self.shingle_size = shingle_size
        self._shingles: set[tuple[str, ...]] = set()
        self.doc_count = 0

    def add(self, text: str) -> None:
        tokens = content_tokens(text)
        for i in range(len(tokens) - self.shingle_size + 1):
            self._shingles.add(tuple(tokens[i: i + self.shingle_size]))
        self.doc_count += 1

    def __contains__(self, shingle: tuple[str, ...]) -> bool:
        return shingle in self._shingles


@dataclass
class OriginalityResult:
    percentage: float
    matched: int
    total: int

    @property
    def passed(self) -> bool:
        return self.percentage < ORIGINALITY_THRESHOLD


def originality_overlap(text: str, corpus: CorpusIndex,
                        shingle_size: Optional[int] = None) -> OriginalityResult:
    """Share of the text's word shingles found anywhere in the corpus."""
    n = shingle_size or corpus.shingle_size
    if n != corpus.shingle_size:
        raise ValidationError("shingle size differs from the corpus index")
    tokens = content_tokens(text)
    total = len(tokens) - n + 1
    if total < 1:
        raise ValidationError(f"text shorter than shingle size ({n} words)")
    matched = sum(1 for i in range(total) if tuple(tokens[i: i + n]) in corpus)
    return OriginalityResult(percentage=100.0 * matched / total, matched=matched, total=total)


def item_originality(item: McqItem, corpus: CorpusIndex) -> OriginalityResult:
    return originality_overlap(render_mcq(item, mark_correct=False), corpus)


def stem_sentence_overlap(a: McqItem, b: McqItem) -> set[str]:
    """Verbatim sentences shared between two items' stem+question blocks."""
    sa = {normalize_ws(s).lower() for s in split_sentences(a.content_text())}
    sb = {normalize_ws(s).lower() for s in split_sentences(b.content_text())}
    return sa & sb
