"""Prompt template loading and instantiation.

Templates live as plain text files under data/prompts with named
placeholders ({education_level}, {discipline}, {input_body}, {concept},
{question_answer}, {criteria_block}, {prototype_item}, {count}, ...).
Keeping them as files makes the wording reviewable and editable without
touching code.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

from .errors import ValidationError

_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


@lru_cache(maxsize=None)
def template(name: str) -> str:
    ref = resources.files("mcqforge.data") / "prompts" / f"{name}.txt"
    try:
        return ref.read_text(encoding="utf-8").strip("\n")
    except FileNotFoundError:
        raise ValidationError(f"unknown prompt template: {name!r}")


def build(name: str, **values) -> str:
    """Instantiate a template, refusing to leave placeholders unfilled."""
    text = template(name)
    needed = set(_PLACEHOLDER.findall(text))
    missing = needed - set(values)
    if missing:
        raise ValidationError(f"template {name!r} missing values for {sorted(missing)}")
    for key in needed:
        text = text.replace("{%s}" % key, str(values[key]))
    return text


def concept_map_prompt(kind: str, *, education_level: str, discipline: str, input_body: str) -> str:
    name = "concept_map_objective" if kind == "learning_objective" else "concept_map_fragment"
    return build(name, education_level=education_level, discipline=discipline, input_body=input_body)


def questions_prompt(concept: str) -> str:
    return build("questions_from_concept", concept=concept)


def mcq_prompt(question_answer: str, criteria_block: str) -> str:
    return build("mcq_from_question", question_answer=question_answer, criteria_block=criteria_block)


def one_step_prompt(*, count: int, education_level: str, speciality: str, discipline: str) -> str:
    if count == 1:
        return build(
            "one_step_single",
            education_level=education_level,
            speciality=speciality,
            discipline=discipline,
        )
    return build(
        "one_step_batch",
        count=count,
        education_level=education_level,
        speciality=speciality,
        discipline=discipline,
    )


def series_prompt(mode: str, *, prototype_item: str, count: int, discipline: str, education_level: str) -> str:
    name = "series_example" if mode == "example_based" else "series_concept"
    return build(
        name,
        prototype_item=prototype_item,
        count=count,
        discipline=discipline,
        education_level=education_level,
    )


def adjust_prompt(*, criterion_id: int, criterion_text: str, item_text: str) -> str:
    return build(
        "adjust_item",
        criterion_id=criterion_id,
        criterion_text=criterion_text,
        item_text=item_text,
    )


def evaluate_prompt(*, criteria_block: str, item_text: str) -> str:
    return build("evaluate_criteria", criteria_block=criteria_block, item_text=item_text)


def contextual_features_prompt(*, concept: str, item_text: str) -> str:
    return build("contextual_features", concept=concept, item_text=item_text)


def prototype_concepts_prompt(*, prototype_item: str) -> str:
    return build("prototype_concepts", prototype_item=prototype_item)


def same_concept_prompt(*, prototype_item: str, candidates_block: str, last: int) -> str:
    return build(
        "same_concept_check",
        prototype_item=prototype_item,
        candidates_block=candidates_block,
        last=last,
    )
