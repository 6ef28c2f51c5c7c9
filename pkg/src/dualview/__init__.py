"""Dual-view first-stage passage retrieval.

Passages are segmented into self-contained chunks, each chunk yields localized
pseudo-queries, and retrieval fuses the direct query-passage signal with the
best query-to-pseudo-query match per passage.
"""

__version__ = "0.1.0"
