"""Punchline template extraction by token-importance scoring.

Each annotated token that falls into a dependency category (named entity,
subject, object, predicative adjective, verb) is scored by
weight * log10(R - rank + 1) * scale over the frequency lexicon; the
least important tokens become mask slots.  Adjectives modifying a noun
are always masked regardless of score.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

from .annotate import AnnotatedJoke, AnnotatedToken
from .errors import DataError, FormatError
from .lexicons import LexiconSet, frequency_rank

DEFAULT_DEP_WEIGHTS: dict[str, float] = {
    "named_entity": 10.0,
    "nsubj": 5.0,
    "iobj": 4.0,
    "dobj": 3.0,
    "adj_predicative": 2.0,
    "verb": 1.0,
}
FORCED_REASON = "amod"
MASK_PLACEHOLDER = "[MASK]"


@dataclass(frozen=True)
class WeightConfig:
    dep_weights: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_DEP_WEIGHTS))
    scale: float = 2.5
    mask_strategy: Literal["count", "fraction", "threshold"] = "count"
    mask_value: float = 3.0

    def __post_init__(self) -> None:
        if any(w <= 0 for w in self.dep_weights.values()):
            raise DataError("all dependency weights must be positive")
        if self.scale <= 0:
            raise DataError("scale must be positive")


def weight_config_from_dict(raw: dict) -> WeightConfig:
    """Build a config from JSON overrides of the default weights."""
    weights = dict(DEFAULT_DEP_WEIGHTS)
    for key, value in raw.get("dep_weights", {}).items():
        if key not in weights:
            raise DataError(f"unknown dependency category {key!r}")
        weights[key] = float(value)
    return WeightConfig(
        dep_weights=weights,
        scale=float(raw.get("scale", 2.5)),
        mask_strategy=raw.get("mask_strategy", "count"),
        mask_value=float(raw.get("mask_value", 3.0)),
    )


@dataclass(frozen=True)
class TemplateToken:
    surface: str
    maskable: bool
    masked: bool
    score: float | None
    reason: str | None


@dataclass(frozen=True)
class Template:
    joke_id: str
    tokens: tuple[TemplateToken, ...]
    flagged: bool = False

    def masked_surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens if t.masked]


def score_token(dep_category: str, rank: int, max_rank: int, cfg: WeightConfig) -> float:
    """weight(category) * log10(max_rank - rank + 1) * scale.

    Rank max_rank (the rarest or out-of-vocabulary case) scores exactly 0.
    """
    if dep_category not in cfg.dep_weights:
        raise DataError(f"unknown dependency category {dep_category!r}")
    if max_rank < 1:
        raise DataError("frequency lexicon is empty; cannot score tokens")
    if not 1 <= rank <= max_rank:
        raise DataError(f"rank must be in [1, {max_rank}], got {rank}")
    return cfg.dep_weights[dep_category] * math.log10(max_rank - rank + 1) * cfg.scale


def mask_category(token: AnnotatedToken) -> str | None:
    """Scoring category for a token, or None when it is never masked.

    The entity flag dominates; otherwise the dependency relation decides,
    with predicative adjectives and verbs as part-of-speech fallbacks.
    """
    if token.is_entity:
        return "named_entity"
    if token.deprel in ("nsubj", "iobj", "dobj"):
        return token.deprel
    if token.upos == "ADJ":
        return "adj_predicative"
    if token.upos == "VERB":
        return "verb"
    return None


def _is_forced(token: AnnotatedToken) -> bool:
    return token.deprel == "amod" and token.upos == "ADJ"


def extract_template(
    doc: AnnotatedJoke, lex: LexiconSet, cfg: WeightConfig | None = None
) -> Template:
    """Choose mask slots for one annotated joke.

    Noun-modifying adjectives are always masked.  Remaining masks come from
    the strategy applied over candidates in ascending score order, with
    ties broken toward later positions.
    """
    cfg = cfg or WeightConfig()
    tokens = doc.tokens()
    entries: list[dict] = []
    candidates: list[tuple[float, int]] = []
    for idx, tok in enumerate(tokens):
        if _is_forced(tok):
            entries.append(
                {"surface": tok.surface, "maskable": True, "masked": True,
                 "score": 0.0, "reason": FORCED_REASON}
            )
            continue
        category = mask_category(tok)
        if category is None:
            entries.append(
                {"surface": tok.surface, "maskable": False, "masked": False,
                 "score": None, "reason": None}
            )
            continue
        rank = frequency_rank(lex, tok.surface)
        score = score_token(category, rank, lex.max_rank, cfg)
        entries.append(
            {"surface": tok.surface, "maskable": True, "masked": False,
             "score": score, "reason": category}
        )
        candidates.append((score, idx))

    order = sorted(candidates, key=lambda item: (item[0], -item[1]))
    if cfg.mask_strategy == "count":
        chosen = order[: int(cfg.mask_value)]
    elif cfg.mask_strategy == "fraction":
        chosen = order[: int(len(order) * cfg.mask_value)]
    elif cfg.mask_strategy == "threshold":
        chosen = [item for item in order if item[0] <= cfg.mask_value]
    else:
        raise DataError(f"unknown mask strategy {cfg.mask_strategy!r}")
    for _, idx in chosen:
        entries[idx]["masked"] = True

    return Template(
        joke_id=doc.joke.id,
        tokens=tuple(TemplateToken(**e) for e in entries),
        flagged=not candidates,
    )


def render(template: Template, placeholder: str = MASK_PLACEHOLDER) -> str:
    """Space-joined lowercase surface string with masks as the placeholder."""
    parts = [
        placeholder if tok.masked else tok.surface.lower() for tok in template.tokens
    ]
    return " ".join(parts)


def save_templates(templates: list[Template], path: str | Path) -> None:
    lines = []
    for tpl in templates:
        lines.append(
            json.dumps(
                {
                    "joke_id": tpl.joke_id,
                    "tokens": [
                        {"surface": t.surface, "masked": t.masked,
                         "score": t.score, "reason": t.reason}
                        for t in tpl.tokens
                    ],
                },
                ensure_ascii=False,
                sort_keys=True,
            )
        )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_templates(path: str | Path) -> list[Template]:
    """Read a template JSONL file written by save_templates.

    maskable is reconstructed from score presence; flagged from the absence
    of any scored dependency category.
    """
    templates: list[Template] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid template JSON: {exc.msg}", line=lineno) from exc
        tokens = tuple(
            TemplateToken(
                surface=t["surface"],
                maskable=t["score"] is not None,
                masked=bool(t["masked"]),
                score=t["score"],
                reason=t["reason"],
            )
            for t in raw["tokens"]
        )
        flagged = not any(t.reason in DEFAULT_DEP_WEIGHTS for t in tokens)
        templates.append(Template(joke_id=raw["joke_id"], tokens=tokens, flagged=flagged))
    return templates
