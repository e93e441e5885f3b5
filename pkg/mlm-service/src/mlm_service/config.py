"""Service configuration, overridable through environment variables."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Mapping

MODEL_ENV = "HUMOR_MLM_MODEL"
PORT_ENV = "HUMOR_MLM_PORT"
HOST_ENV = "HUMOR_MLM_HOST"
MAX_TOP_K_ENV = "HUMOR_MLM_MAX_TOP_K"
MAX_SEQUENCE_TOKENS_ENV = "HUMOR_MLM_MAX_SEQUENCE_TOKENS"

DETERMINISTIC_MODEL = "deterministic"


@dataclass(frozen=True)
class ServiceConfig:
    """Runtime settings: model identifier, bind address, and request limits."""

    model: str = DETERMINISTIC_MODEL
    host: str = "127.0.0.1"
    port: int = 8765
    max_top_k: int = 50
    max_sequence_tokens: int = 512

    def __post_init__(self) -> None:
        if not self.model:
            raise ValueError("model identifier must be non-empty")
        if self.max_top_k < 1:
            raise ValueError(f"max_top_k must be >= 1, got {self.max_top_k}")
        if self.max_sequence_tokens < 1:
            raise ValueError(
                f"max_sequence_tokens must be >= 1, got {self.max_sequence_tokens}"
            )
        if not 0 <= self.port <= 65535:
            raise ValueError(f"port must be in [0, 65535], got {self.port}")

    @classmethod
    def from_env(cls, env: Mapping[str, str] | None = None) -> "ServiceConfig":
        env = os.environ if env is None else env
        return cls(
            model=env.get(MODEL_ENV, DETERMINISTIC_MODEL),
            host=env.get(HOST_ENV, "127.0.0.1"),
            port=int(env.get(PORT_ENV, "8765")),
            max_top_k=int(env.get(MAX_TOP_K_ENV, "50")),
            max_sequence_tokens=int(env.get(MAX_SEQUENCE_TOKENS_ENV, "512")),
        )
