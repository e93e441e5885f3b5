"""Token-level annotations: CoNLL-U ingestion and a heuristic fallback tagger.

Two annotation paths feed the same downstream code: high-quality parses read
from CoNLL-U files produced by an external parser, or a dependency-free
heuristic annotator good enough for hermetic runs.  Heuristic output is
flagged approximate.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, Iterable

from .corpus import Joke, SetupPunchline, TokenSeq, clean_text, split_setup_punchline, tokenize
from .errors import DataError, FormatError

UPOS_TAGS = frozenset(
    "ADJ ADP ADV AUX CCONJ DET INTJ NOUN NUM PART PRON PROPN PUNCT SCONJ SYM VERB X".split()
)

# Closed label set emitted by the heuristic annotator.  CoNLL-U input may
# carry any label.
HEURISTIC_DEPRELS = frozenset({"root", "nsubj", "dobj", "iobj", "amod", "dep"})

_SENT_FINAL = frozenset({".", "!", "?"})
_HAS_ALNUM_RE = re.compile(r"[^\W_]", re.UNICODE)


@dataclass(frozen=True)
class AnnotatedToken:
    surface: str
    lemma: str
    upos: str
    deprel: str
    head: int  # 1-based index of the head token, 0 for the root
    is_entity: bool
    position: int  # 0-based index within the sentence


@dataclass(frozen=True)
class AnnotatedJoke:
    joke: Joke
    sentences: tuple[tuple[AnnotatedToken, ...], ...]
    boundary: SetupPunchline
    approximate: bool = False

    def tokens(self) -> list[AnnotatedToken]:
        """All tokens in document order."""
        return [tok for sent in self.sentences for tok in sent]


def parse_conllu(stream: IO[str] | Iterable[str]) -> list[list[AnnotatedToken]]:
    """Parse CoNLL-U text into sentences of AnnotatedToken.

    Maps the ID/FORM/LEMMA/UPOS/HEAD/DEPREL columns; a token is an entity
    when MISC carries ``NE=Yes`` or an ``Entity=`` item.  Multiword-token
    ranges and empty nodes are skipped.
    """
    sentences: list[list[AnnotatedToken]] = []
    current: list[AnnotatedToken] = []

    def flush(line_no: int) -> None:
        if not current:
            return
        n = len(current)
        for tok in current:
            if tok.head > n:
                raise FormatError(
                    f"head index {tok.head} exceeds sentence length {n}", line_no
                )
        sentences.append(list(current))
        current.clear()

    line_no = 0
    for line_no, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            flush(line_no)
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise FormatError(f"expected 10 tab-separated columns, got {len(cols)}", line_no)
        tok_id, form, lemma, upos, _xpos, _feats, head_col, deprel, _deps, misc = cols
        if "-" in tok_id or "." in tok_id:
            continue  # multiword range or empty node
        try:
            int(tok_id)
        except ValueError:
            raise FormatError(f"non-integer token ID {tok_id!r}", line_no) from None
        try:
            head = int(head_col)
        except ValueError:
            raise FormatError(f"non-integer HEAD {head_col!r}", line_no) from None
        if head < 0:
            raise FormatError(f"negative HEAD {head}", line_no)
        if upos not in UPOS_TAGS:
            raise FormatError(f"unknown UPOS tag {upos!r}", line_no)
        misc_items = misc.split("|") if misc != "_" else []
        is_entity = any(m == "NE=Yes" or m.startswith("Entity=") for m in misc_items)
        current.append(
            AnnotatedToken(
                surface=form,
                lemma=lemma,
                upos=upos,
                deprel=deprel,
                head=head,
                is_entity=is_entity,
                position=len(current),
            )
        )
    flush(line_no + 1)
    return sentences


def serialize_conllu(
    sentences: Iterable[Iterable[AnnotatedToken]], doc_id: str | None = None
) -> str:
    """Render sentences as CoNLL-U text (inverse of parse_conllu on the
    mapped columns)."""
    lines: list[str] = []
    if doc_id is not None:
        lines.append(f"# newdoc id = {doc_id}")
    for sent in sentences:
        for i, tok in enumerate(sent, start=1):
            misc = "NE=Yes" if tok.is_entity else "_"
            lines.append(
                "\t".join(
                    [
                        str(i),
                        tok.surface,
                        tok.lemma or "_",
                        tok.upos,
                        "_",
                        "_",
                        str(tok.head),
                        tok.deprel,
                        "_",
                        misc,
                    ]
                )
            )
        lines.append("")
    return "\n".join(lines) + "\n" if lines else ""


def read_conllu_corpus(stream: IO[str] | Iterable[str]) -> list[tuple[str | None, list[list[AnnotatedToken]]]]:
    """Read a CoNLL-U file grouped by ``# newdoc id = ...`` comments.

    Returns (doc_id, sentences) groups in file order; content before the
    first newdoc comment is grouped under doc_id None.
    """
    doc_lines: list[tuple[str | None, list[str]]] = [(None, [])]
    for line in stream:
        match = re.match(r"#\s*newdoc\s+id\s*=\s*(.+)", line)
        if match:
            doc_lines.append((match.group(1).strip(), []))
        else:
            doc_lines[-1][1].append(line)
    groups = []
    for doc_id, lines in doc_lines:
        sentences = parse_conllu(lines)
        if doc_id is None and not sentences:
            continue
        groups.append((doc_id, sentences))
    return groups


def load_pos_lexicon(path: str | Path | None = None) -> dict[str, str]:
    """Load a ``word<TAB>UPOS`` lexicon; defaults to the packaged one."""
    if path is None:
        text = resources.files("humorkit.data").joinpath("pos_lexicon.tsv").read_text("utf-8")
        lines = text.splitlines()
    else:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    lexicon: dict[str, str] = {}
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError("expected word<TAB>UPOS", line_no)
        word, tag = parts
        if tag not in UPOS_TAGS:
            raise FormatError(f"unknown UPOS tag {tag!r}", line_no)
        lexicon[word.lower()] = tag
    return lexicon


_DEFAULT_LEXICON: dict[str, str] | None = None


def _default_lexicon() -> dict[str, str]:
    global _DEFAULT_LEXICON
    if _DEFAULT_LEXICON is None:
        _DEFAULT_LEXICON = load_pos_lexicon()
    return _DEFAULT_LEXICON


def _verb_bases(lexicon: dict[str, str]) -> set[str]:
    return {w for w, t in lexicon.items() if t == "VERB"}


def _guess_upos(token: str, position: int, lexicon: dict[str, str], verbs: set[str]) -> str:
    if not _HAS_ALNUM_RE.search(token):
        return "PUNCT"
    lowered = token.lower()
    if lowered in lexicon:
        return lexicon[lowered]
    if not any(ch.isalpha() for ch in token):
        return "NUM"
    if lowered.endswith("ly") and len(lowered) > 3:
        return "ADV"
    for suffix in ("ing", "ed"):
        if lowered.endswith(suffix) and len(lowered) > len(suffix) + 1:
            base = lowered[: -len(suffix)]
            candidates = {base, base + "e"}
            if len(base) >= 2 and base[-1] == base[-2]:
                candidates.add(base[:-1])
            if candidates & verbs:
                return "VERB"
    if position > 0 and token[0].isupper():
        return "PROPN"
    return "NOUN"


def heuristic_annotate(
    tokens: TokenSeq, pos_lexicon: dict[str, str] | None = None
) -> list[AnnotatedToken]:
    """Approximate POS, dependency, and entity annotation for one sentence.

    POS comes from a closed-class lexicon, then suffix rules, defaulting to
    NOUN (PROPN for capitalized non-initial tokens, which are also flagged
    as entities).  Dependencies: the first verb is the root; the first
    nominal before it is nsubj, the first NOUN/PROPN after it dobj, an ADJ
    directly before a NOUN amod, everything else dep.
    """
    if tokens.level != "word" or tokens.punct_mode != "keep":
        raise ValueError("heuristic annotation requires word-level, punctuation-kept tokens")
    if not tokens.tokens:
        raise DataError("cannot annotate an empty sentence")
    lexicon = pos_lexicon if pos_lexicon is not None else _default_lexicon()
    verbs = _verb_bases(lexicon)

    surfaces = list(tokens.tokens)
    upos = [_guess_upos(tok, i, lexicon, verbs) for i, tok in enumerate(surfaces)]
    is_entity = [i > 0 and tok[0].isupper() for i, tok in enumerate(surfaces)]

    n = len(surfaces)
    deprel = [""] * n
    head = [0] * n

    verb_idx = next((i for i, t in enumerate(upos) if t == "VERB"), None)
    root_idx = verb_idx if verb_idx is not None else 0
    deprel[root_idx] = "root"
    head[root_idx] = 0

    if verb_idx is not None:
        for i in range(verb_idx):
            if upos[i] in ("NOUN", "PROPN", "PRON"):
                deprel[i] = "nsubj"
                head[i] = verb_idx + 1
                break
        for i in range(verb_idx + 1, n):
            if upos[i] in ("NOUN", "PROPN"):
                deprel[i] = "dobj"
                head[i] = verb_idx + 1
                break
    for i in range(n - 1):
        if upos[i] == "ADJ" and upos[i + 1] == "NOUN" and not deprel[i]:
            deprel[i] = "amod"
            head[i] = i + 2
    attach = (verb_idx if verb_idx is not None else 0) + 1
    for i in range(n):
        if not deprel[i]:
            deprel[i] = "dep"
            head[i] = attach

    return [
        AnnotatedToken(
            surface=surfaces[i],
            lemma=surfaces[i].lower(),
            upos=upos[i],
            deprel=deprel[i],
            head=head[i],
            is_entity=is_entity[i],
            position=i,
        )
        for i in range(n)
    ]


def segment_sentences(tokens: TokenSeq) -> list[TokenSeq]:
    """Split a word-level token sequence after sentence-final punctuation runs."""
    sentences: list[TokenSeq] = []
    current: list[str] = []
    toks = tokens.tokens
    for i, tok in enumerate(toks):
        current.append(tok)
        nxt = toks[i + 1] if i + 1 < len(toks) else None
        if tok in _SENT_FINAL and nxt not in _SENT_FINAL and nxt is not None:
            sentences.append(TokenSeq(tuple(current), tokens.level, tokens.punct_mode))
            current = []
    if current:
        sentences.append(TokenSeq(tuple(current), tokens.level, tokens.punct_mode))
    return sentences


def annotate_joke(
    joke: Joke,
    pos_lexicon: dict[str, str] | None = None,
    sentences: list[list[AnnotatedToken]] | None = None,
) -> AnnotatedJoke:
    """Build an AnnotatedJoke, from given CoNLL-U sentences or heuristically."""
    cleaned = clean_text(joke.text)
    boundary = split_setup_punchline(cleaned)
    if sentences is not None:
        if not sentences:
            raise DataError(f"joke {joke.id!r} has no annotated sentences")
        return AnnotatedJoke(
            joke=joke,
            sentences=tuple(tuple(s) for s in sentences),
            boundary=boundary,
            approximate=False,
        )
    token_seq = tokenize(cleaned, level="word", punct_mode="keep")
    annotated = [
        tuple(heuristic_annotate(sent, pos_lexicon)) for sent in segment_sentences(token_seq)
    ]
    return AnnotatedJoke(joke=joke, sentences=tuple(annotated), boundary=boundary, approximate=True)
