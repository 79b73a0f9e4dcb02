from __future__ import annotations

import logging
import time

import requests

logger = logging.getLogger(__name__)


class TransportError(RuntimeError):
    """The remote service could not be reached or answered with a non-200 status."""


def post_json(url: str, payload: dict, *, attempts: int = 3, backoff: float = 0.2,
              max_backoff: float = 2.0, timeout: float = 10.0, sleep=time.sleep) -> dict:
    """POST ``payload`` as JSON and return the decoded body, retrying with capped backoff."""
    last = None
    for attempt in range(attempts):
        try:
            resp = requests.post(url, json=payload, timeout=timeout)
            if resp.status_code == 200:
                return resp.json()
            last = f"HTTP {resp.status_code}: {resp.text[:200]}"
        except (requests.RequestException, ValueError) as exc:
            last = f"{type(exc).__name__}: {exc}"
        logger.warning("POST %s failed (attempt %d/%d): %s", url, attempt + 1, attempts, last)
        if attempt + 1 < attempts:
            sleep(min(max_backoff, backoff * 2 ** attempt))
    raise TransportError(f"POST {url} failed after {attempts} attempts: {last}")
