"""Bridge configuration."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class BridgeConfig:
    """Model and serving settings.

    ``role_prefixes`` maps a request role ("query" / "passage") to a string
    prepended to every text before encoding; prefix conventions are
    model-specific (e5-style models want them, MiniLM-style models do not),
    which is why they live here and not in the retrieval core.

    ``expected_dim`` guards against loading the wrong model: when set, startup
    fails if the model's output dimension differs.
    """

    model: str
    device: str = "cpu"
    batch_size: int = 64
    max_batch: int = 1024
    role_prefixes: dict[str, str] = field(default_factory=dict)
    expected_dim: int | None = None

    def __post_init__(self) -> None:
        if not self.model:
            raise ValueError("model id or path is required")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        for role in self.role_prefixes:
            if role not in ("query", "passage"):
                raise ValueError(f"unknown role {role!r} in role_prefixes")
