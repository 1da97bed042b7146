"""Minimal HTTP client for an external question-embedding provider.

Wire format: ``POST <endpoint>`` with body ``{"input": "<text>"}``; the reply
must be ``{"embedding": [number, ...]}``. When ``auth_env`` is set, the value
of that environment variable is sent verbatim in the ``Authorization`` header.
"""

from __future__ import annotations

import os

import httpx
import numpy as np

from .exceptions import QueryError


class EmbeddingClient:
    def __init__(self, endpoint: str, auth_env: str | None = None, timeout: float = 30.0, transport=None):
        self.endpoint = endpoint
        self.auth_env = auth_env
        self.timeout = timeout
        self._transport = transport

    def _headers(self) -> dict[str, str]:
        if not self.auth_env:
            return {}
        token = os.environ.get(self.auth_env)
        if token is None:
            raise QueryError(f"environment variable {self.auth_env} is not set")
        return {"Authorization": token}

    def embed(self, text: str) -> np.ndarray:
        with httpx.Client(timeout=self.timeout, transport=self._transport) as client:
            try:
                resp = client.post(self.endpoint, json={"input": text}, headers=self._headers())
                resp.raise_for_status()
                payload = resp.json()
            except (httpx.HTTPError, ValueError) as exc:
                raise QueryError(f"embedding provider request failed: {exc}") from exc
        emb = payload.get("embedding") if isinstance(payload, dict) else None
        if not isinstance(emb, list) or not emb or not all(isinstance(v, (int, float)) for v in emb):
            raise QueryError("embedding provider reply lacks a numeric 'embedding' list")
        return np.asarray(emb, dtype=np.float64)
