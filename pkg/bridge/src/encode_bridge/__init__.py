"""Thin HTTP server exposing sentence-transformer models behind the batch
encode protocol: POST /encode {"texts": [...], "role": ...} ->
{"dim": d, "vectors": [[...], ...]}, plus GET /health."""

__version__ = "0.1.0"
