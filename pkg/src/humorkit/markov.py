"""Order-(n-1) Markov chain language models at word and char level.

Counts are raw tallies over length-n windows of bos-padded sequences.
Sampling is proportional to counts with no smoothing; the successor CDF is
built in lexicographic token order so generation is reproducible across
platforms for a fixed rng seed.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import TokenSeq
from .errors import DataError

BOS = "<s>"
EOS = "</s>"
MODEL_FORMAT = "humorkit-ngram"
MODEL_VERSION = 1

_RESERVED = re.compile(r"^\\*</?s>$")


def escape_token(token: str) -> str:
    """Escape tokens that collide with the reserved boundary markers."""
    if _RESERVED.match(token):
        return "\\" + token
    return token


@dataclass
class NGramModel:
    level: str
    n: int
    counts: dict[tuple[str, ...], dict[str, int]] = field(default_factory=dict)

    @property
    def vocab(self) -> set[str]:
        """All generable tokens: successors plus non-bos context tokens."""
        out: set[str] = set()
        for ctx, succ in self.counts.items():
            out.update(t for t in ctx if t != BOS)
            out.update(succ)
        return out


def fit(corpus: Iterable[TokenSeq | Sequence[str]], level: str, n: int) -> NGramModel:
    """Tally every length-n window over bos/eos-padded token sequences."""
    if n < 2:
        raise DataError(f"n must be >= 2, got {n}")
    if level not in ("word", "char"):
        raise DataError(f"level must be 'word' or 'char', got {level!r}")
    counts: dict[tuple[str, ...], dict[str, int]] = {}
    seen_any = False
    for seq in corpus:
        if isinstance(seq, TokenSeq):
            if seq.level != level:
                raise DataError(
                    f"sequence level {seq.level!r} does not match model level {level!r}"
                )
            tokens = list(seq.tokens)
        else:
            tokens = list(seq)
        seen_any = True
        padded = [BOS] * (n - 1) + [escape_token(t) for t in tokens] + [EOS]
        for i in range(len(padded) - n + 1):
            ctx = tuple(padded[i : i + n - 1])
            nxt = padded[i + n - 1]
            counts.setdefault(ctx, {})
            counts[ctx][nxt] = counts[ctx].get(nxt, 0) + 1
    if not seen_any:
        raise DataError("cannot fit an n-gram model on an empty corpus")
    return NGramModel(level=level, n=n, counts=counts)


def next_distribution(model: NGramModel, context: tuple[str, ...]) -> dict[str, float]:
    """Exact conditional P(next | context) from raw counts.

    Unseen contexts yield an empty map rather than an error.
    """
    context = tuple(context)
    if len(context) != model.n - 1:
        raise DataError(
            f"context length must be {model.n - 1}, got {len(context)}"
        )
    succ = model.counts.get(context)
    if not succ:
        return {}
    total = sum(succ.values())
    return {tok: cnt / total for tok, cnt in succ.items()}


def _suffix_counts(model: NGramModel, suffix: tuple[str, ...]) -> dict[str, int]:
    """Aggregate successor counts over stored contexts ending in suffix."""
    k = len(suffix)
    merged: dict[str, int] = {}
    for ctx, succ in model.counts.items():
        if ctx[model.n - 1 - k :] == suffix:
            for tok, cnt in succ.items():
                merged[tok] = merged.get(tok, 0) + cnt
    return merged


def _sample(weights: dict[str, float], rng: np.random.Generator) -> str:
    items = sorted(weights.items())
    total = sum(w for _, w in items)
    r = rng.random() * total
    acc = 0.0
    for tok, w in items:
        acc += w
        if r < acc:
            return tok
    return items[-1][0]


def generate(
    model: NGramModel,
    seed: Sequence[str],
    max_tokens: int,
    rng_seed: int,
    backoff: bool = False,
) -> list[str]:
    """Continue a seed sequence token by token until eos or max_tokens.

    max_tokens caps newly generated tokens; the seed is returned as the
    output prefix.  Unseen contexts stop generation unless backoff is on,
    in which case counts are pooled over ever-shorter context suffixes and,
    with no data at any length, the draw is uniform over the vocabulary.
    """
    if max_tokens < 1:
        raise DataError(f"max_tokens must be >= 1, got {max_tokens}")
    rng = np.random.default_rng(rng_seed)
    output = [escape_token(t) for t in seed]
    k = model.n - 1
    for _ in range(max_tokens):
        context = tuple(([BOS] * k + output)[-k:])
        succ = model.counts.get(context)
        if not succ and backoff:
            for length in range(k - 1, 0, -1):
                succ = _suffix_counts(model, context[-length:])
                if succ:
                    break
            else:
                vocab = sorted(model.vocab)
                if not vocab:
                    break
                succ = {tok: 1 for tok in vocab}
        if not succ:
            break
        nxt = _sample({t: float(c) for t, c in succ.items()}, rng)
        if nxt == EOS:
            break
        output.append(nxt)
    return output


def save(model: NGramModel, path: str | Path) -> None:
    contexts = [
        {"ctx": list(ctx), "succ": dict(sorted(succ.items()))}
        for ctx, succ in sorted(model.counts.items())
    ]
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "level": model.level,
        "n": model.n,
        "contexts": contexts,
    }
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, sort_keys=True), encoding="utf-8"
    )


def load(path: str | Path) -> NGramModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"n-gram model file {path} is not valid JSON: {exc.msg}") from exc
    if payload.get("format") != MODEL_FORMAT or payload.get("version") != MODEL_VERSION:
        raise DataError(
            f"unsupported n-gram model file (format={payload.get('format')!r}, "
            f"version={payload.get('version')!r})"
        )
    n = int(payload["n"])
    counts: dict[tuple[str, ...], dict[str, int]] = {}
    for entry in payload["contexts"]:
        ctx = tuple(entry["ctx"])
        if len(ctx) != n - 1:
            raise DataError(f"context {ctx!r} does not have length {n - 1}")
        counts[ctx] = {tok: int(cnt) for tok, cnt in entry["succ"].items()}
    return NGramModel(level=payload["level"], n=n, counts=counts)
