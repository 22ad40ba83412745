"""LLM generation backends: an HTTP client for a local model server, plus
deterministic in-tree stubs so the whole test suite runs with no server.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Sequence, Union

import httpx

from .errors import BackendMalformed, BackendTimeout, BackendUnavailable

STUB_SCHEME = "stub:"

_NO_MATERIAL_REPLY = "No reference material is available for this question."


@dataclass(frozen=True)
class LlmSpec:
    """How to reach and sample one answering model."""

    endpoint: str
    model_name: str
    top_p: float = 0.9
    temperature: Optional[float] = None  # None: backend default
    timeout: float = 120.0

    def __post_init__(self) -> None:
        if not 0.0 < self.top_p < 1.0:
            raise ValueError(f"top_p must be in (0, 1), got {self.top_p}")


def is_stub_endpoint(endpoint: str) -> bool:
    return endpoint.startswith(STUB_SCHEME)


class LlmBackend(Protocol):
    spec: LlmSpec

    def generate(self, prompt: str) -> str: ...


class HttpLlmBackend:
    """Client for a local model server's generate endpoint.

    POST {endpoint}/api/generate with {"model", "prompt", "stream": false,
    "options": {"top_p": ...}}; the reply carries {"response": str}.
    A semaphore bounds concurrent generations (default 2) so a single-GPU
    backend is not oversubscribed.
    """

    def __init__(
        self,
        spec: LlmSpec,
        max_concurrency: int = 2,
        transport: Optional[httpx.BaseTransport] = None,
    ) -> None:
        self.spec = spec
        self._semaphore = threading.Semaphore(max_concurrency)
        self._client = httpx.Client(timeout=spec.timeout, transport=transport)

    def generate(self, prompt: str) -> str:
        options: dict = {"top_p": self.spec.top_p}
        if self.spec.temperature is not None:
            options["temperature"] = self.spec.temperature
        body = {
            "model": self.spec.model_name,
            "prompt": prompt,
            "stream": False,
            "options": options,
        }
        with self._semaphore:
            try:
                response = self._client.post(
                    f"{self.spec.endpoint.rstrip('/')}/api/generate", json=body
                )
            except httpx.TimeoutException as exc:
                raise BackendTimeout(f"generation timed out: {exc}") from exc
            except httpx.HTTPError as exc:
                raise BackendUnavailable(f"model server unreachable: {exc}") from exc
        if response.status_code != 200:
            raise BackendUnavailable(
                f"model server returned HTTP {response.status_code}"
            )
        try:
            text = response.json()["response"]
        except (ValueError, KeyError) as exc:
            raise BackendMalformed(f"generate response unusable: {exc}") from exc
        if not isinstance(text, str):
            raise BackendMalformed("generate response field is not text")
        return text

    def close(self) -> None:
        self._client.close()


def _first_source_text(prompt: str) -> Optional[str]:
    """Pull the first [SOURCE ...] block's text out of an augmented prompt."""
    start = prompt.find("[SOURCE ")
    if start == -1:
        return None
    body_start = prompt.find("]\n", start)
    if body_start == -1:
        return None
    body_start += 2
    cut_points = [
        p
        for p in (
            prompt.find("\n\n[SOURCE ", body_start),
            prompt.find("\n\nQUESTION:", body_start),
        )
        if p != -1
    ]
    end = min(cut_points) if cut_points else len(prompt)
    return prompt[body_start:end]


class EchoFirstSourceStub:
    """Replies with the text of the first retrieved source, verbatim."""

    def __init__(self, spec: Optional[LlmSpec] = None) -> None:
        self.spec = spec or LlmSpec(
            endpoint="stub:echo-first-source", model_name="stub-echo-first-source"
        )

    def generate(self, prompt: str) -> str:
        return _first_source_text(prompt) or _NO_MATERIAL_REPLY


class FixedTextStub:
    """Replies with one fixed string regardless of the prompt."""

    def __init__(self, text: str = _NO_MATERIAL_REPLY, spec: Optional[LlmSpec] = None) -> None:
        self.text = text
        self.spec = spec or LlmSpec(
            endpoint="stub:fixed-text", model_name="stub-fixed-text"
        )

    def generate(self, prompt: str) -> str:
        return self.text


class ScriptedStub:
    """Replies from a script: either a prompt->text callable or a sequence
    consumed in call order (the last entry repeats once exhausted)."""

    def __init__(
        self,
        script: Union[Callable[[str], str], Sequence[str]],
        spec: Optional[LlmSpec] = None,
    ) -> None:
        self._script = script
        self._calls = 0
        self.spec = spec or LlmSpec(
            endpoint="stub:scripted", model_name="stub-scripted"
        )

    def generate(self, prompt: str) -> str:
        if callable(self._script):
            return self._script(prompt)
        if not self._script:
            raise ValueError("scripted stub has an empty script")
        reply = self._script[min(self._calls, len(self._script) - 1)]
        self._calls += 1
        return reply


def make_backend(
    spec: LlmSpec,
    max_concurrency: int = 2,
    transport: Optional[httpx.BaseTransport] = None,
) -> LlmBackend:
    """Build a backend from a spec; stub: endpoints select in-tree stubs."""
    if is_stub_endpoint(spec.endpoint):
        name = spec.endpoint[len(STUB_SCHEME):]
        if name == "echo-first-source":
            return EchoFirstSourceStub(spec)
        if name == "fixed-text":
            return FixedTextStub(spec=spec)
        raise ValueError(f"unknown stub backend {name!r}")
    return HttpLlmBackend(spec, max_concurrency=max_concurrency, transport=transport)
