"""Corpus ingestion, cleaning, tokenization, and setup/punchline splitting."""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal

from .errors import DataError, FormatError

Level = Literal["word", "char"]
PunctMode = Literal["keep", "drop"]
SplitRule = Literal["ellipsis", "question", "sentence", "none"]

SPLIT_RULES = ("ellipsis", "question", "sentence", "none")


@dataclass(frozen=True)
class Joke:
    """One corpus record: raw text with an optional binary humor label."""

    id: str
    text: str
    label: int | None = None


@dataclass(frozen=True)
class SetupPunchline:
    setup: str
    punchline: str
    split_rule: SplitRule

    def reconstruct(self) -> str:
        """Rejoin setup and punchline into the original cleaned text."""
        if self.split_rule == "none":
            return self.setup
        sep = " ... " if self.split_rule == "ellipsis" else " "
        return self.setup + sep + self.punchline


@dataclass(frozen=True)
class TokenSeq:
    tokens: tuple[str, ...]
    level: Level
    punct_mode: PunctMode


# Unicode normalization applied before whitespace handling.  Asterisks are
# deliberately left alone: they carry expressive content in this corpus.
_CHAR_MAP = str.maketrans(
    {
        "“": '"',
        "”": '"',
        "„": '"',
        "‟": '"',
        "‘": "'",
        "’": "'",
        "‚": "'",
        "‛": "'",
        "‐": "-",
        "‑": "-",
        "‒": "-",
        "–": "-",
        "—": "-",
        "―": "-",
        "−": "-",
        "…": "...",
    }
)

_WS_RE = re.compile(r"\s+")

# A word token is a maximal run of alphanumerics and apostrophes; any other
# non-space character stands alone.
_WORD_TOKEN_RE = re.compile(r"(?:[^\W_]|')+|\S", re.UNICODE)
_HAS_ALNUM_RE = re.compile(r"[^\W_]", re.UNICODE)


def clean_text(raw: str) -> str:
    """Normalize a raw record to the canonical cleaned form.

    Curly quotes, unicode dashes, and the ellipsis character are mapped to
    ASCII, whitespace runs collapse to single spaces, and surrounding quote
    characters are stripped.  Idempotent.  Raises DataError if nothing
    remains.
    """
    text = raw.translate(_CHAR_MAP)
    text = _WS_RE.sub(" ", text).strip()
    text = text.strip("\"' ")
    if not text:
        raise DataError("record is empty after cleaning")
    return text


def split_setup_punchline(text: str) -> SetupPunchline:
    """Split cleaned text into setup and punchline.

    Rules are tried in a fixed order: the first " ... " separator wins, then
    the first "? " with trailing text, then the first ". " or "! ", and
    otherwise the whole text is the setup with rule "none".
    """
    idx = text.find(" ... ")
    if idx != -1:
        return SetupPunchline(text[:idx], text[idx + 5 :], "ellipsis")
    idx = text.find("? ")
    if idx != -1 and text[idx + 2 :]:
        return SetupPunchline(text[: idx + 1], text[idx + 2 :], "question")
    candidates = [i for i in (text.find(". "), text.find("! ")) if i != -1]
    if candidates:
        idx = min(candidates)
        if text[idx + 2 :]:
            return SetupPunchline(text[: idx + 1], text[idx + 2 :], "sentence")
    return SetupPunchline(text, "", "none")


def tokenize(
    text: str,
    level: Level = "word",
    punct_mode: PunctMode = "keep",
    lowercase: bool = False,
) -> TokenSeq:
    """Tokenize text at word or character level.

    Word level keeps apostrophes inside tokens and isolates every other
    non-space character; drop mode removes tokens with no alphanumeric
    content.  Char level emits every character, dropping non-alphanumeric
    non-space characters in drop mode.
    """
    if not text:
        raise DataError("cannot tokenize empty text")
    if level == "word":
        tokens = _WORD_TOKEN_RE.findall(text)
        if punct_mode == "drop":
            tokens = [t for t in tokens if _HAS_ALNUM_RE.search(t)]
    elif level == "char":
        tokens = list(text)
        if punct_mode == "drop":
            tokens = [c for c in tokens if c.isspace() or _HAS_ALNUM_RE.search(c)]
    else:
        raise ValueError(f"unknown tokenization level: {level!r}")
    if lowercase:
        tokens = [t.lower() for t in tokens]
    return TokenSeq(tuple(tokens), level, punct_mode)


def _parse_label(value, line: int) -> int | None:
    if value is None or value == "":
        return None
    if value in (0, 1):
        return int(value)
    if isinstance(value, str) and value.strip() in ("0", "1"):
        return int(value.strip())
    raise FormatError(f"label must be 0 or 1, got {value!r}", line)


def _make_joke(record: dict, index: int, line: int) -> Joke:
    text = record.get("text")
    if not isinstance(text, str) or not text:
        raise FormatError("record has no usable 'text' field", line)
    raw_id = record.get("id")
    if raw_id is None or raw_id == "":
        joke_id = str(index)
    else:
        joke_id = str(raw_id)
    return Joke(id=joke_id, text=text, label=_parse_label(record.get("label"), line))


def load_corpus(path: str | Path, format: Literal["jsonl", "csv"] = "jsonl") -> list[Joke]:
    """Load jokes from a JSONL or CSV file, preserving record order.

    Records without an explicit id get their 0-based position as id.
    Duplicate ids and malformed records raise FormatError with the
    offending line number.
    """
    path = Path(path)
    jokes: list[Joke] = []
    if format == "jsonl":
        with path.open(encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise FormatError(f"invalid JSON: {exc.msg}", line_no) from exc
                if not isinstance(record, dict):
                    raise FormatError("record is not a JSON object", line_no)
                jokes.append(_make_joke(record, len(jokes), line_no))
    elif format == "csv":
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            for row_no, row in enumerate(reader, start=2):
                record = {k: v for k, v in row.items() if k is not None}
                jokes.append(_make_joke(record, len(jokes), row_no))
    else:
        raise ValueError(f"unknown corpus format: {format!r}")

    seen: dict[str, int] = {}
    for joke in jokes:
        if joke.id in seen:
            raise DataError(f"duplicate joke id {joke.id!r}")
        seen[joke.id] = 1
    return jokes


def dump_corpus_jsonl(jokes: Iterable[Joke], path: str | Path) -> None:
    """Write jokes as JSONL, one object per record."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for joke in jokes:
            record = {"id": joke.id, "text": joke.text}
            if joke.label is not None:
                record["label"] = joke.label
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
