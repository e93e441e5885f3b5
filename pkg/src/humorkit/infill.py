"""Mask filling for extracted templates.

Two interchangeable infillers sit behind one callable interface: a
hermetic baseline that samples same-part-of-speech corpus words by
frequency, and a remote client speaking the masked-LM wire protocol.
hybrid_generate composes template extraction, rendering, and infilling
into the end-to-end joke generator.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
import requests

from .annotate import AnnotatedJoke
from .errors import DataError, HumorkitError
from .lexicons import LexiconSet
from .template import MASK_PLACEHOLDER, Template, WeightConfig, extract_template, render

logger = logging.getLogger(__name__)

ENDPOINT_ENV = "HUMOR_MLM_URL"


class RemoteInfillError(HumorkitError):
    """Transport or protocol failure while talking to the fill service."""


@dataclass(frozen=True)
class InfillRequest:
    tokens: tuple[str, ...]
    mask_positions: tuple[int, ...]
    top_k: int = 5
    forbid: tuple[frozenset[str], ...] = ()
    mask_pos_tags: tuple[str | None, ...] | None = None

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise DataError(f"top_k must be >= 1, got {self.top_k}")
        sentinel_positions = tuple(
            i for i, tok in enumerate(self.tokens) if tok == MASK_PLACEHOLDER
        )
        if tuple(self.mask_positions) != sentinel_positions:
            raise DataError(
                f"mask_positions {self.mask_positions} do not match sentinel "
                f"positions {sentinel_positions}"
            )
        if len(self.forbid) != len(self.mask_positions):
            raise DataError("forbid must supply one set per mask position")
        if self.mask_pos_tags is not None and len(self.mask_pos_tags) != len(self.mask_positions):
            raise DataError("mask_pos_tags must supply one tag per mask position")


@dataclass(frozen=True)
class InfillResult:
    filled_tokens: tuple[str, ...]
    candidates: tuple[tuple[tuple[str, float], ...], ...]
    infiller_id: str


Infiller = Callable[[InfillRequest, int], InfillResult]


def validate_result(result: InfillResult, req: InfillRequest) -> None:
    """Shape assertions shared by baseline, stub, and remote paths."""
    if any(MASK_PLACEHOLDER in tok for tok in result.filled_tokens):
        raise DataError("filled tokens still contain the mask sentinel")
    if len(result.filled_tokens) != len(req.tokens):
        raise DataError("filled token count differs from input token count")
    if len(result.candidates) != len(req.mask_positions):
        raise DataError("one candidate list required per mask")
    for mask_idx, cands in enumerate(result.candidates):
        if len(cands) > req.top_k:
            raise DataError(f"mask {mask_idx}: more than top_k candidates")
        scores = [score for _, score in cands]
        if any(b > a for a, b in zip(scores, scores[1:])):
            raise DataError(f"mask {mask_idx}: candidate scores increase")
    for mask_idx, position in enumerate(req.mask_positions):
        fill = result.filled_tokens[position].lower()
        if fill in req.forbid[mask_idx]:
            raise DataError(f"mask {mask_idx}: forbidden token {fill!r} was filled")


def build_pos_vocabulary(docs: Iterable[AnnotatedJoke]) -> dict[str, tuple[str, int]]:
    """Lowercased surface -> (majority part of speech, total count).

    Punctuation entries are dropped; they are never fill candidates.
    """
    tag_counts: dict[str, dict[str, int]] = {}
    for doc in docs:
        for tok in doc.tokens():
            if tok.upos == "PUNCT":
                continue
            surface = tok.surface.lower()
            tag_counts.setdefault(surface, {})
            tag_counts[surface][tok.upos] = tag_counts[surface].get(tok.upos, 0) + 1
    vocab: dict[str, tuple[str, int]] = {}
    for surface, tags in tag_counts.items():
        majority = min(tags, key=lambda t: (-tags[t], t))
        vocab[surface] = (majority, sum(tags.values()))
    return vocab


def _weighted_pick(bucket: list[tuple[str, int]], rng: np.random.Generator) -> str:
    items = sorted(bucket)
    total = sum(cnt for _, cnt in items)
    r = rng.random() * total
    acc = 0.0
    for tok, cnt in items:
        acc += cnt
        if r < acc:
            return tok
    return items[-1][0]


def infill_baseline(
    req: InfillRequest, vocab: dict[str, tuple[str, int]], rng_seed: int
) -> InfillResult:
    """Fill each mask with a frequency-weighted same-POS corpus word.

    Forbidden fills are excluded before sampling; an empty part-of-speech
    bucket falls back to the whole vocabulary.  Deterministic per seed.
    """
    if not vocab:
        raise DataError("baseline infilling requires a non-empty vocabulary")
    rng = np.random.default_rng(rng_seed)
    filled = list(req.tokens)
    all_candidates: list[tuple[tuple[str, float], ...]] = []
    for mask_idx, position in enumerate(req.mask_positions):
        forbidden = req.forbid[mask_idx]
        target = req.mask_pos_tags[mask_idx] if req.mask_pos_tags else None
        bucket = [
            (tok, cnt)
            for tok, (pos, cnt) in vocab.items()
            if tok not in forbidden and (target is None or pos == target)
        ]
        if not bucket:
            bucket = [(tok, cnt) for tok, (_, cnt) in vocab.items() if tok not in forbidden]
        if not bucket:
            raise DataError(f"mask {mask_idx}: every vocabulary entry is forbidden")
        total = sum(cnt for _, cnt in bucket)
        top = sorted(bucket, key=lambda item: (-item[1], item[0]))[: req.top_k]
        all_candidates.append(tuple((tok, cnt / total) for tok, cnt in top))
        filled[position] = _weighted_pick(bucket, rng)
    result = InfillResult(
        filled_tokens=tuple(filled),
        candidates=tuple(all_candidates),
        infiller_id="baseline",
    )
    validate_result(result, req)
    return result


@dataclass(frozen=True)
class BaselineInfiller:
    vocab: dict[str, tuple[str, int]]

    def __call__(self, req: InfillRequest, rng_seed: int) -> InfillResult:
        return infill_baseline(req, self.vocab, rng_seed)


def request_to_wire(req: InfillRequest) -> dict:
    return {
        "tokens": list(req.tokens),
        "mask_positions": list(req.mask_positions),
        "top_k": req.top_k,
        "forbid": {
            str(pos): sorted(req.forbid[i]) for i, pos in enumerate(req.mask_positions)
        },
    }


def infill_remote(
    req: InfillRequest, endpoint: str | None = None, timeout: float = 10.0
) -> InfillResult:
    """Resolve masks left-to-right, one service round trip per mask.

    Every request lists all still-unfilled sentinel positions; the reply's
    candidates for the leftmost mask are consumed and its best allowed
    token substituted before the next round trip.
    """
    endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
    if not endpoint:
        raise RemoteInfillError(
            f"no endpoint given and {ENDPOINT_ENV} is not set"
        )
    working = list(req.tokens)
    all_candidates: list[tuple[tuple[str, float], ...]] = []
    for mask_idx, position in enumerate(req.mask_positions):
        remaining = req.mask_positions[mask_idx:]
        payload = {
            "tokens": working,
            "mask_positions": list(remaining),
            "top_k": req.top_k,
            "forbid": {
                str(pos): sorted(req.forbid[i])
                for i, pos in enumerate(req.mask_positions)
                if i >= mask_idx
            },
        }
        try:
            resp = requests.post(f"{endpoint.rstrip('/')}/infill", json=payload, timeout=timeout)
        except requests.RequestException as exc:
            raise RemoteInfillError(
                f"{endpoint}: mask {mask_idx}: request failed: {exc}"
            ) from exc
        if resp.status_code != 200:
            raise RemoteInfillError(
                f"{endpoint}: mask {mask_idx}: HTTP {resp.status_code}: {resp.text[:200]}"
            )
        try:
            body = resp.json()
        except (json.JSONDecodeError, ValueError) as exc:
            raise RemoteInfillError(
                f"{endpoint}: mask {mask_idx}: response is not valid JSON"
            ) from exc
        raw = body.get("candidates", {}).get(str(position))
        if not isinstance(raw, list) or not raw:
            raise RemoteInfillError(
                f"{endpoint}: mask {mask_idx}: no candidates for position {position}"
            )
        cands: list[tuple[str, float]] = []
        for entry in raw:
            if not isinstance(entry, dict) or "token" not in entry or "score" not in entry:
                raise RemoteInfillError(
                    f"{endpoint}: mask {mask_idx}: malformed candidate entry"
                )
            token = str(entry["token"])
            if not token or MASK_PLACEHOLDER in token:
                raise RemoteInfillError(
                    f"{endpoint}: mask {mask_idx}: sentinel or empty token in response"
                )
            cands.append((token, float(entry["score"])))
        scores = [s for _, s in cands]
        if any(b > a for a, b in zip(scores, scores[1:])):
            raise RemoteInfillError(
                f"{endpoint}: mask {mask_idx}: candidate scores not descending"
            )
        allowed = [tok for tok, _ in cands if tok.lower() not in req.forbid[mask_idx]]
        if not allowed:
            raise RemoteInfillError(
                f"{endpoint}: mask {mask_idx}: all candidates forbidden"
            )
        working[position] = allowed[0]
        logger.debug("mask %d at position %d filled with %r", mask_idx, position, allowed[0])
        all_candidates.append(tuple(cands[: req.top_k]))
    result = InfillResult(
        filled_tokens=tuple(working),
        candidates=tuple(all_candidates),
        infiller_id=f"remote:{endpoint}",
    )
    validate_result(result, req)
    return result


@dataclass(frozen=True)
class RemoteInfiller:
    endpoint: str | None = None
    timeout: float = 10.0

    def __call__(self, req: InfillRequest, rng_seed: int) -> InfillResult:
        return infill_remote(req, self.endpoint, self.timeout)


def template_request(
    template: Template, doc: AnnotatedJoke | None = None, top_k: int = 5
) -> InfillRequest:
    """Build the infill request for a rendered template.

    Forbid sets always contain the original lowercased surface; mask tags
    carry each original token's part of speech when annotations are given.
    """
    rendered = render(template).split(" ") if template.tokens else []
    positions = tuple(i for i, tok in enumerate(rendered) if tok == MASK_PLACEHOLDER)
    annotated = doc.tokens() if doc is not None else []
    forbid = []
    tags: list[str | None] = []
    for idx, ttok in enumerate(template.tokens):
        if ttok.masked:
            forbid.append(frozenset({ttok.surface.lower()}))
            tags.append(annotated[idx].upos if idx < len(annotated) else None)
    return InfillRequest(
        tokens=tuple(rendered),
        mask_positions=positions,
        top_k=top_k,
        forbid=tuple(forbid),
        mask_pos_tags=tuple(tags),
    )


def hybrid_generate(
    doc: AnnotatedJoke,
    lex: LexiconSet,
    cfg: WeightConfig | None = None,
    infiller: Infiller | None = None,
    rng_seed: int = 0,
    top_k: int = 5,
) -> dict:
    """Template extraction, rendering, and infilling end to end.

    Returns {original, template_string, generated, diagnostics}; a
    zero-mask template passes the lowercased original through and flags
    the no-op in diagnostics.
    """
    if infiller is None:
        raise DataError("hybrid_generate requires an infiller")
    template = extract_template(doc, lex, cfg)
    template_string = render(template)
    mask_scores = [t.score for t in template.tokens if t.masked]
    diagnostics: dict = {
        "mask_count": len(mask_scores),
        "mask_scores": mask_scores,
        "flagged": template.flagged,
    }
    if not mask_scores:
        diagnostics["no_op"] = True
        diagnostics["infiller_id"] = None
        generated = template_string
    else:
        req = template_request(template, doc, top_k=top_k)
        result = infiller(req, rng_seed)
        validate_result(result, req)
        diagnostics["no_op"] = False
        diagnostics["infiller_id"] = result.infiller_id
        generated = " ".join(result.filled_tokens)
    return {
        "original": doc.joke.text,
        "template_string": template_string,
        "generated": generated,
        "diagnostics": diagnostics,
    }
