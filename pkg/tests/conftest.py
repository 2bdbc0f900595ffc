import random

import pytest

from mcqforge.items import McqItem, ProvenanceRecord

WORDS = (
    "phage therapy culture sample enzyme membrane gradient vaccine outbreak "
    "colony nutrient assay reactor biofilm plasmid vector strain growth "
    "population habitat glucose oxygen carbon nitrogen soil ocean forest "
    "protein receptor signal pathway tissue organ species diversity energy"
).split()


def random_item(rng: random.Random, explanation: bool = False) -> McqItem:
    """A structurally valid item with random but distinct texts."""

    def phrase(n):
        return " ".join(rng.choice(WORDS) for _ in range(n))

    stem_sentences = [phrase(rng.randint(4, 9)).capitalize() + "." for _ in range(rng.randint(1, 4))]
    question = ("Which " + phrase(rng.randint(3, 6)) + "?").capitalize()
    options = []
    while len(options) < 5:
        opt = phrase(rng.randint(2, 7)).capitalize()
        if opt not in options:
            options.append(opt)
    return McqItem(
        stem=" ".join(stem_sentences),
        question=question,
        options=tuple(options),
        correct_index=rng.randrange(5),
        explanation=phrase(6).capitalize() + "." if explanation and rng.random() < 0.5 else None,
        discipline="biology",
        education_level="university",
        topic="generated",
        provenance=ProvenanceRecord(source_role="item_writer_1", session_id="s-test", prompt_ids=("t-1",)),
    )


@pytest.fixture
def rng():
    return random.Random(20240817)


def _acceptance_lines(terminalreporter):
    lines = []
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            if "test_acceptance" in rep.nodeid:
                name = rep.nodeid.split("::")[-1]
                verdict = "PASS" if status == "passed" else "FAIL"
                lines.append((name, verdict))
    return lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = _acceptance_lines(terminalreporter)
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, verdict in sorted(lines):
            terminalreporter.write_line(f"{verdict}  {name}")
