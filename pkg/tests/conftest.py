"""Shared fixtures and the acceptance summary reporter."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from humorkit.annotate import annotate_joke, read_conllu_corpus
from humorkit.corpus import load_corpus
from humorkit.lexicons import load_lexicon_set

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def lexicons():
    return load_lexicon_set(FIXTURES / "lexicons")


@pytest.fixture(scope="session")
def golden_docs():
    """The golden jokes annotated from the shipped CoNLL-U fixture."""
    jokes = load_corpus(FIXTURES / "golden_jokes.jsonl", "jsonl")
    with (FIXTURES / "conllu" / "golden_jokes.conllu").open(encoding="utf-8") as fh:
        gold = dict(read_conllu_corpus(fh))
    return [annotate_joke(joke, sentences=gold[joke.id]) for joke in jokes]


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            if "test_acceptance.py" in rep.nodeid and getattr(rep, "when", "call") == "call":
                name = rep.nodeid.split("::")[-1]
                lines.append((name, "PASS" if rep.passed else "FAIL"))
    if lines:
        terminalreporter.write_line("")
        for name, verdict in sorted(lines):
            terminalreporter.write_line(f"ACCEPTANCE {name}: {verdict}")
