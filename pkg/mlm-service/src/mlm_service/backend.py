"""Fill-mask backends behind a single small interface.

The deterministic backend is hermetic: candidate scores are derived from a
cryptographic hash of (context, position, word), so identical requests get
identical responses in any process without loading a model checkpoint.  The
transformers backend wraps any fill-mask-capable pretrained model.
"""

from __future__ import annotations

import hashlib
from typing import Protocol, Sequence

MASK_SENTINEL = "[MASK]"


class BackendError(RuntimeError):
    """Raised when candidate generation fails inside a backend."""


class FillMaskBackend(Protocol):
    name: str

    @property
    def ready(self) -> bool: ...

    def candidates(
        self, tokens: Sequence[str], position: int, n: int
    ) -> list[tuple[str, float]]:
        """Top-n (token, score) guesses for the sentinel at position, scores descending."""
        ...


# Plausible whole-word fills plus a few wordpiece-style continuation
# artifacts, which real fill-mask models also emit and the server must drop.
_DEFAULT_VOCABULARY = (
    "time", "man", "day", "world", "life", "hand", "road", "wall", "smile",
    "dog", "cat", "chicken", "doctor", "bar", "night", "drink", "joke",
    "thing", "way", "house", "big", "small", "long", "short", "hot", "cold",
    "funny", "dark", "happy", "good", "walk", "cross", "tell", "ask", "call",
    "see", "over", "here", "there", "again",
    "##ing", "##er", "##s", "▁the",
)


class DeterministicBackend:
    """Hash-scored pseudo language model; stateless and fully reproducible."""

    def __init__(self, vocabulary: Sequence[str] | None = None) -> None:
        self.name = "deterministic"
        self.vocabulary = tuple(vocabulary) if vocabulary is not None else _DEFAULT_VOCABULARY
        if not self.vocabulary:
            raise ValueError("vocabulary must be non-empty")

    @property
    def ready(self) -> bool:
        return True

    def candidates(
        self, tokens: Sequence[str], position: int, n: int
    ) -> list[tuple[str, float]]:
        if not 0 <= position < len(tokens):
            raise BackendError(f"position {position} outside sequence of {len(tokens)}")
        context = " ".join(t.lower() for i, t in enumerate(tokens) if i != position)
        scored: list[tuple[str, float]] = []
        for word in self.vocabulary:
            digest = hashlib.sha256(
                f"{context}\x00{position}\x00{word}".encode("utf-8")
            ).digest()
            scored.append((word, int.from_bytes(digest[:8], "big") / 2.0**64))
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored[: max(n, 0)]


class TransformersBackend:
    """Adapter for any Hugging Face fill-mask pipeline model."""

    def __init__(self, model: str) -> None:
        self.name = model
        self._pipeline = None

    def load(self) -> None:
        try:
            from transformers import pipeline
        except ImportError as exc:  # pragma: no cover - env without transformers
            raise BackendError(
                "transformers is not installed; install the 'model' extra"
            ) from exc
        self._pipeline = pipeline("fill-mask", model=self.name)

    @property
    def ready(self) -> bool:
        return self._pipeline is not None

    def candidates(
        self, tokens: Sequence[str], position: int, n: int
    ) -> list[tuple[str, float]]:
        if self._pipeline is None:
            raise BackendError("model is not loaded")
        mask_token = self._pipeline.tokenizer.mask_token
        text_tokens = [mask_token if t == MASK_SENTINEL else t for t in tokens]
        mask_rank = sum(1 for t in tokens[:position] if t == MASK_SENTINEL)
        try:
            output = self._pipeline(" ".join(text_tokens), top_k=max(n, 1))
        except Exception as exc:  # model inference is the failure domain here
            raise BackendError(f"fill-mask inference failed: {exc}") from exc
        # With several masks the pipeline returns one candidate list per mask.
        if output and isinstance(output[0], list):
            output = output[mask_rank]
        return [(entry["token_str"].strip(), float(entry["score"])) for entry in output]


def build_backend(model: str) -> FillMaskBackend:
    """Instantiate (and for real models, load) the configured backend."""
    from .config import DETERMINISTIC_MODEL

    if model == DETERMINISTIC_MODEL:
        return DeterministicBackend()
    backend = TransformersBackend(model)
    backend.load()
    return backend
