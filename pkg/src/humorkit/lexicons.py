"""Lexical resources: slang, antonym pairs, connectives, polarity, word ranks.

Every resource is a plain UTF-8 text file so the toolkit stays hermetic;
see the README for the exact formats.  Lines starting with '#' are ignored
everywhere.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError

log = logging.getLogger(__name__)

FILENAMES = {
    "slang": "slang.txt",
    "antonyms": "antonyms.tsv",
    "connectives": "connectives.txt",
    "polarity": "polarity.tsv",
    "freq": "freq.txt",
}


@dataclass(frozen=True)
class LexiconSet:
    slang: frozenset[str] = frozenset()
    antonyms: frozenset[tuple[str, str]] = frozenset()  # pairs stored sorted
    connectives: frozenset[str] = frozenset()
    polarity: dict[str, float] = field(default_factory=dict)
    freq_ranks: dict[str, int] = field(default_factory=dict)

    @property
    def max_rank(self) -> int:
        return len(self.freq_ranks)

    def has_antonym_pair(self, a: str, b: str) -> bool:
        return tuple(sorted((a.lower(), b.lower()))) in self.antonyms

    def to_json(self) -> str:
        """Canonical JSON form; byte-stable for identical inputs."""
        payload = {
            "slang": sorted(self.slang),
            "antonyms": sorted(list(p) for p in self.antonyms),
            "connectives": sorted(self.connectives),
            "polarity": {k: self.polarity[k] for k in sorted(self.polarity)},
            "freq": sorted(self.freq_ranks, key=self.freq_ranks.get),
        }
        return json.dumps(payload, ensure_ascii=False, sort_keys=True)


def _read_lines(path: Path) -> list[tuple[int, str]]:
    out = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        out.append((line_no, stripped))
    return out


def load_lexicon_set(directory: str | Path) -> LexiconSet:
    """Load the five lexicon files from a directory.

    Any missing file yields an empty resource with a warning.  Entries are
    lowercased and deduplicated; antonym pairs collapse across order.
    """
    directory = Path(directory)

    def path_or_warn(key: str) -> Path | None:
        p = directory / FILENAMES[key]
        if not p.exists():
            log.warning("lexicon file %s missing, using empty %s resource", p, key)
            return None
        return p

    slang: set[str] = set()
    if (p := path_or_warn("slang")) is not None:
        slang = {text.lower() for _, text in _read_lines(p)}

    connectives: set[str] = set()
    if (p := path_or_warn("connectives")) is not None:
        connectives = {text.lower() for _, text in _read_lines(p)}

    antonyms: set[tuple[str, str]] = set()
    if (p := path_or_warn("antonyms")) is not None:
        for line_no, text in _read_lines(p):
            parts = text.split("\t")
            if len(parts) != 2:
                raise FormatError("antonym line needs two tab-separated lemmas", line_no)
            a, b = parts[0].strip().lower(), parts[1].strip().lower()
            if not a or not b or a == b:
                raise FormatError(f"bad antonym pair {text!r}", line_no)
            antonyms.add((a, b) if a < b else (b, a))

    polarity: dict[str, float] = {}
    if (p := path_or_warn("polarity")) is not None:
        for line_no, text in _read_lines(p):
            parts = text.split("\t")
            if len(parts) != 2:
                raise FormatError("polarity line needs word<TAB>float", line_no)
            word = parts[0].strip().lower()
            try:
                score = float(parts[1])
            except ValueError:
                raise FormatError(f"non-numeric polarity {parts[1]!r}", line_no) from None
            if not -1.0 <= score <= 1.0:
                raise FormatError(f"polarity {score} outside [-1, 1]", line_no)
            polarity[word] = score

    freq_ranks: dict[str, int] = {}
    if (p := path_or_warn("freq")) is not None:
        for line_no, text in _read_lines(p):
            word = text.lower()
            if word in freq_ranks:
                raise FormatError(f"duplicate word {word!r} in frequency list", line_no)
            freq_ranks[word] = len(freq_ranks) + 1

    return LexiconSet(
        slang=frozenset(slang),
        antonyms=frozenset(antonyms),
        connectives=frozenset(connectives),
        polarity=polarity,
        freq_ranks=freq_ranks,
    )


def frequency_rank(lex: LexiconSet, word: str) -> int:
    """Rank of a word in the frequency list; unknown words get the maximum
    rank (treated as maximally rare)."""
    return lex.freq_ranks.get(word.lower(), lex.max_rank)
