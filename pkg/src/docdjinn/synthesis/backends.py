"""Generation backend contract and retrying call wrapper."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

logger = logging.getLogger(__name__)


class BackendError(Exception):
    """Non-retryable backend failure."""


class TransientBackendError(BackendError):
    """Timeout or rate limit; retried with backoff."""


@dataclass
class BackendResponse:
    text: str
    input_tokens: int | None = None
    output_tokens: int | None = None


class GenerationBackend(Protocol):
    name: str

    def complete(self, prompt: str, images: Sequence[bytes], *,
                 request_id: str | None = None) -> BackendResponse:
        """``request_id`` doubles as an idempotency key for resumed runs."""


@dataclass
class RetryPolicy:
    max_retries: int = 3
    base_delay: float = 2.0
    sleep: Callable[[float], None] = time.sleep

    def delay(self, attempt: int) -> float:
        return self.base_delay * (2 ** attempt)


@dataclass
class GenerationResult:
    text: str | None
    input_tokens: int = 0
    output_tokens: int = 0
    retries: int = 0
    error: str | None = None
    delays: list[float] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return self.text is None


def generate(backend: GenerationBackend, prompt: str, seed_images: Sequence[bytes], *,
             expected_images: int | None = None, policy: RetryPolicy | None = None,
             request_id: str | None = None) -> GenerationResult:
    """Call ``backend`` with retries; failure is reported, never raised."""
    if expected_images is not None and len(seed_images) != expected_images:
        raise ValueError(f"expected {expected_images} seed images, got {len(seed_images)}")
    policy = policy or RetryPolicy()
    result = GenerationResult(None)
    for attempt in range(policy.max_retries + 1):
        try:
            resp = backend.complete(prompt, seed_images, request_id=request_id)
        except (TransientBackendError, TimeoutError) as exc:
            result.error = f"{type(exc).__name__}: {exc}"
            if attempt == policy.max_retries:
                break
            wait = policy.delay(attempt)
            result.retries += 1
            result.delays.append(wait)
            logger.warning("backend %s call %s failed (%s); retry %d in %.1fs",
                           getattr(backend, "name", "?"), request_id, exc, attempt + 1, wait)
            policy.sleep(wait)
        except BackendError as exc:
            result.error = f"{type(exc).__name__}: {exc}"
            break
        else:
            result.text = resp.text
            result.input_tokens = resp.input_tokens or 0
            result.output_tokens = resp.output_tokens or 0
            result.error = None
            return result
    logger.error("backend call %s failed: %s", request_id, result.error)
    return result
