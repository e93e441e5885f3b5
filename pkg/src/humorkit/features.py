"""Hand-engineered document features for humor classification.

Four levels of signal: POS-tag ratios, slang and antonym usage, discourse
connectives, and word-polarity aggregation.  Ratios are computed over word
tokens only (punctuation excluded from the denominator).
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

from .annotate import AnnotatedJoke
from .corpus import TokenSeq
from .errors import DataError
from .lexicons import LexiconSet

_HAS_ALNUM_RE = re.compile(r"[^\W_]", re.UNICODE)

# Suffixes the crude lemmatizer strips, longest first.
_LEMMA_SUFFIXES = ("est", "ing", "er", "ed", "s")

# Minimum slang entry length for subword matches; shorter entries match too
# many innocent words ("ass" in "class").
MIN_SUBWORD_ENTRY_LEN = 4


@dataclass(frozen=True)
class FeatureVector:
    ratio_verb: float
    ratio_noun: float
    ratio_pron: float
    ratio_propn: float
    ratio_modifier: float
    slang_count: int
    slang_subword_count: int
    antonym_pair_count: int
    connective_count: int
    polarity_mean: float
    token_count: int

    def to_list(self) -> list[float]:
        return [getattr(self, name) for name in FEATURE_NAMES]


FEATURE_NAMES: tuple[str, ...] = tuple(f.name for f in fields(FeatureVector))


def _is_word(surface: str) -> bool:
    return bool(_HAS_ALNUM_RE.search(surface))


def slang_matches(tokens: TokenSeq, slang: frozenset[str] | set[str]) -> tuple[int, int]:
    """Count whole-word and hidden (subword) slang occurrences.

    A token matching an entry exactly counts as whole-word; a token strictly
    containing an entry of length >= 4 counts as subword.  A token increments
    at most one of the two counters.
    """
    whole = 0
    subword = 0
    for token in tokens.tokens:
        lowered = token.lower()
        if lowered in slang:
            whole += 1
            continue
        if any(
            len(entry) >= MIN_SUBWORD_ENTRY_LEN and entry in lowered
            for entry in slang
        ):
            subword += 1
    return whole, subword


def crude_lemma(word: str, vocab: dict[str, int] | set[str]) -> str:
    """Lowercase and strip common suffixes when the base is a known word.

    Undoubled-consonant and restored-e bases are tried too (bigger -> big,
    baked -> bake); without them the suffix rule misses most comparatives.
    """
    lowered = word.lower()
    for suffix in _LEMMA_SUFFIXES:
        if not lowered.endswith(suffix) or len(lowered) <= len(suffix) + 1:
            continue
        base = lowered[: -len(suffix)]
        candidates = [base]
        if len(base) >= 2 and base[-1] == base[-2]:
            candidates.append(base[:-1])
        candidates.append(base + "e")
        for cand in candidates:
            if cand in vocab:
                return cand
    return lowered


def antonym_pair_count(tokens: TokenSeq, lex: LexiconSet) -> int:
    """Number of distinct antonym pair types present in the token list.

    Tokens are lemmatized crudely against the frequency list before the
    unordered pair lookup; each pair type counts once per document.
    """
    lemmas = [crude_lemma(t, lex.freq_ranks) for t in tokens.tokens if _is_word(t)]
    found: set[tuple[str, str]] = set()
    for i in range(len(lemmas)):
        for j in range(i + 1, len(lemmas)):
            pair = tuple(sorted((lemmas[i], lemmas[j])))
            if pair in lex.antonyms:
                found.add(pair)
    return len(found)


def connective_count(tokens: TokenSeq, connectives: frozenset[str] | set[str]) -> int:
    """Occurrences of discourse connectives, including multiword ones."""
    lowered = [t.lower() for t in tokens.tokens]
    count = 0
    for connective in connectives:
        words = tuple(connective.split())
        n = len(words)
        if n == 0:
            continue
        for i in range(len(lowered) - n + 1):
            if tuple(lowered[i : i + n]) == words:
                count += 1
    return count


def extract_features(doc: AnnotatedJoke, lex: LexiconSet) -> FeatureVector:
    """Compute the feature vector for one annotated document."""
    word_tokens = [tok for tok in doc.tokens() if _is_word(tok.surface)]
    n = len(word_tokens)
    if n == 0:
        raise DataError(f"document {doc.joke.id!r} has no word tokens")

    def ratio(tags: tuple[str, ...]) -> float:
        return sum(1 for t in word_tokens if t.upos in tags) / n

    token_seq = TokenSeq(tuple(t.surface.lower() for t in word_tokens), "word", "drop")
    whole, sub = slang_matches(token_seq, lex.slang)

    scored = [lex.polarity[t.surface.lower()] for t in word_tokens if t.surface.lower() in lex.polarity]
    polarity_mean = sum(scored) / len(scored) if scored else 0.0

    return FeatureVector(
        ratio_verb=ratio(("VERB",)),
        ratio_noun=ratio(("NOUN",)),
        ratio_pron=ratio(("PRON",)),
        ratio_propn=ratio(("PROPN",)),
        ratio_modifier=ratio(("ADJ", "ADV")),
        slang_count=whole,
        slang_subword_count=sub,
        antonym_pair_count=antonym_pair_count(token_seq, lex),
        connective_count=connective_count(token_seq, lex.connectives),
        polarity_mean=polarity_mean,
        token_count=n,
    )


HIST_BINS = 20


def export_feature_table(
    docs: Sequence[AnnotatedJoke], lex: LexiconSet, out_dir: str | Path
) -> dict[int, dict[str, float]]:
    """Write features.csv plus per-feature class histograms; return per-class
    feature means.

    Rows are ordered by document id so exports are byte-stable regardless of
    input order.  Histograms cover labeled documents only, 20 equal-width
    bins over the pooled value range.
    """
    if not docs:
        raise DataError("no documents to export")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = sorted(
        ((doc.joke.id, doc.joke.label, extract_features(doc, lex)) for doc in docs),
        key=lambda r: r[0],
    )

    with (out_dir / "features.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label"] + list(FEATURE_NAMES))
        for doc_id, label, vec in rows:
            writer.writerow([doc_id, "" if label is None else label] + vec.to_list())

    labeled = [(label, vec) for _, label, vec in rows if label is not None]
    means: dict[int, dict[str, float]] = {}
    for cls in (0, 1):
        cls_vecs = [vec for label, vec in labeled if label == cls]
        if cls_vecs:
            means[cls] = {
                name: sum(getattr(v, name) for v in cls_vecs) / len(cls_vecs)
                for name in FEATURE_NAMES
            }

    if labeled:
        for name in FEATURE_NAMES:
            values = [(label, float(getattr(vec, name))) for label, vec in labeled]
            lo = min(v for _, v in values)
            hi = max(v for _, v in values)
            width = (hi - lo) / HIST_BINS
            counts = [[0, 0] for _ in range(HIST_BINS)]
            for label, v in values:
                idx = min(int((v - lo) / width), HIST_BINS - 1) if width > 0 else 0
                counts[idx][label] += 1
            with (out_dir / f"hist_{name}.csv").open("w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["bin_lo", "bin_hi", "count_class0", "count_class1"])
                for i in range(HIST_BINS):
                    writer.writerow(
                        [lo + i * width, lo + (i + 1) * width, counts[i][0], counts[i][1]]
                    )
    return means


def load_feature_csv(path: str | Path) -> tuple[list[str], list[int | None], list[list[float]], list[str]]:
    """Read a features.csv back: (ids, labels, rows, feature_names)."""
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["id", "label"]:
            raise DataError(f"{path} is not a feature table")
        names = header[2:]
        ids: list[str] = []
        labels: list[int | None] = []
        rows: list[list[float]] = []
        for row in reader:
            ids.append(row[0])
            labels.append(int(row[1]) if row[1] != "" else None)
            rows.append([float(v) for v in row[2:]])
    return ids, labels, rows, names
