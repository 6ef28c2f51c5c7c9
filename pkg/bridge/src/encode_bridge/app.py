"""FastAPI application wrapping one sentence-transformer model.

Vectors are L2-normalized server-side so clients can score with plain dot
products. Requests are stateless; model inference is serialized behind a lock
(the underlying torch model batches internally).
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .config import BridgeConfig


class EncodeRequest(BaseModel):
    texts: list[str]
    role: str | None = Field(default=None, pattern="^(query|passage)$")


def _model_dim(model) -> int:
    for name in ("get_embedding_dimension", "get_sentence_embedding_dimension"):
        accessor = getattr(model, name, None)
        if callable(accessor):
            value = accessor()
            if value:
                return int(value)
    raise RuntimeError("model does not report an embedding dimension")


def _model_revision(model) -> str | None:
    card = getattr(model, "model_card_data", None)
    return getattr(card, "base_model_revision", None) if card is not None else None


def create_app(config: BridgeConfig) -> FastAPI:
    import sentence_transformers
    from sentence_transformers import SentenceTransformer

    try:
        model = SentenceTransformer(config.model, device=config.device)
    except Exception as exc:
        raise RuntimeError(f"failed to load model {config.model!r}: {exc}") from exc
    dim = _model_dim(model)
    if config.expected_dim is not None and dim != config.expected_dim:
        raise RuntimeError(
            f"model {config.model!r} has dim {dim}, expected {config.expected_dim}"
        )

    lock = threading.Lock()
    app = FastAPI(title="encode-bridge")

    @app.get("/health")
    def health():
        return {
            "model": config.model,
            "revision": _model_revision(model),
            "dim": dim,
            "device": config.device,
            "library": f"sentence-transformers {sentence_transformers.__version__}",
        }

    @app.post("/encode")
    def encode(request: EncodeRequest):
        if len(request.texts) > config.max_batch:
            raise HTTPException(
                status_code=413,
                detail=f"batch of {len(request.texts)} exceeds max_batch={config.max_batch}",
            )
        texts = request.texts
        prefix = config.role_prefixes.get(request.role) if request.role else None
        if prefix:
            texts = [prefix + text for text in texts]
        if not texts:
            return {"dim": dim, "vectors": []}
        with lock:
            vectors = model.encode(
                texts,
                batch_size=config.batch_size,
                normalize_embeddings=True,
                convert_to_numpy=True,
                show_progress_bar=False,
            )
        return {"dim": dim, "vectors": [[float(x) for x in row] for row in vectors]}

    return app
