"""Chat-completions client and prompt templates for live judges."""

from __future__ import annotations

import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Callable, Mapping, Optional

import httpx

from .core import CapsError

log = logging.getLogger(__name__)

_SLOT_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")

TEMPLATE_IDS = (
    "caps_e1_code",
    "caps_e1_math",
    "caps_e2_code",
    "caps_e2_math",
    "pointwise_code",
    "pointwise_math",
    "v1_pair_code",
    "v1_pair_math",
    "gen_code_default",
    "gen_code_instruct",
    "gen_math",
)


class GatewayError(CapsError):
    pass


class MissingSlot(GatewayError, KeyError):
    pass


class TransportError(GatewayError):
    pass


class AuthFailure(GatewayError):
    pass


class ContextOverflow(GatewayError):
    pass


@lru_cache(maxsize=None)
def load_template(template_id: str) -> str:
    if template_id not in TEMPLATE_IDS:
        raise KeyError(f"unknown template {template_id!r}")
    return resources.files("caps_select.templates").joinpath(f"{template_id}.txt").read_text(encoding="utf-8")


def template_slots(template_id: str) -> set[str]:
    return set(_SLOT_RE.findall(load_template(template_id)))


def render_prompt(template_id: str, slots: Mapping[str, str]) -> str:
    """Substitute ``{name}`` placeholders in one pass.

    Slot values are inserted verbatim, so braces inside candidate text are
    never re-interpreted.
    """
    template = load_template(template_id)
    missing = template_slots(template_id) - set(slots)
    if missing:
        raise MissingSlot(f"template {template_id!r} needs slots {sorted(missing)}")
    return _SLOT_RE.sub(lambda m: slots[m.group(1)], template)


def judge_template_id(method: str, domain: str, level: str = "E2") -> str:
    if method == "caps":
        return f"caps_{level.lower()}_{domain}"
    if method in ("pointwise", "v1_pair"):
        return f"{method}_{domain}"
    raise KeyError(f"no judge template for method {method!r}")


@dataclass(frozen=True)
class Sampling:
    temperature: float = 0.0
    max_tokens: int = 8192
    top_p: Optional[float] = None


JUDGE_SAMPLING = Sampling(temperature=0.0)
GEN_SAMPLING = {"code": Sampling(temperature=0.6, max_tokens=32768, top_p=0.95),
                "math": Sampling(temperature=1.0, max_tokens=32768, top_p=0.95)}


@dataclass(frozen=True)
class Completion:
    text: str
    finish_reason: Optional[str]
    attempts: int


_OVERFLOW_HINTS = ("context length", "context_length", "maximum context", "too many tokens", "prompt is too long")


class ChatClient:
    """Minimal chat-completions client.

    Transport errors, 429 and 5xx responses are retried with exponential
    backoff; 401/403 raise AuthFailure; a 400 that mentions the context window
    raises ContextOverflow. Requests are never truncated client-side.
    """

    def __init__(
        self,
        endpoint: str,
        api_key_env: str = "OPENAI_API_KEY",
        max_retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 600.0,
        max_in_flight: int = 16,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.api_key = os.environ.get(api_key_env, "")
        self.max_retries = max_retries
        self.backoff = backoff
        self.max_in_flight = max_in_flight
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_in_flight)
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        self._http = httpx.Client(timeout=timeout, transport=transport, headers=headers)

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def chat(self, model: str, prompt: str, sampling: Sampling = JUDGE_SAMPLING) -> Completion:
        body = {
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": sampling.temperature,
            "max_tokens": sampling.max_tokens,
        }
        if sampling.top_p is not None:
            body["top_p"] = sampling.top_p
        url = f"{self.endpoint}/chat/completions"
        attempt = 0
        with self._slots:
            while True:
                attempt += 1
                try:
                    resp = self._http.post(url, json=body)
                except httpx.TransportError as exc:
                    log.warning("attempt %d to %s failed: %s", attempt, url, exc)
                    reason = str(exc)
                else:
                    if resp.status_code == 200:
                        log.info("completion from %s after %d attempt(s)", url, attempt)
                        choice = resp.json()["choices"][0]
                        return Completion(choice["message"]["content"] or "", choice.get("finish_reason"), attempt)
                    if resp.status_code in (401, 403):
                        raise AuthFailure(f"{resp.status_code}: {resp.text[:200]}")
                    if resp.status_code in (400, 413) and any(h in resp.text.lower() for h in _OVERFLOW_HINTS):
                        raise ContextOverflow(resp.text[:500])
                    if resp.status_code != 429 and resp.status_code < 500:
                        raise TransportError(f"{resp.status_code}: {resp.text[:200]}")
                    log.warning("attempt %d to %s returned %d", attempt, url, resp.status_code)
                    reason = f"HTTP {resp.status_code}"
                if attempt > self.max_retries:
                    raise TransportError(f"giving up after {attempt} attempts: {reason}")
                self._sleep(self.backoff * 2 ** (attempt - 1))

    def complete(self, model: str, prompt: str, sampling: Sampling = JUDGE_SAMPLING) -> str:
        completion = self.chat(model, prompt, sampling)
        if completion.finish_reason == "length":
            log.warning("completion truncated at max_tokens=%d", sampling.max_tokens)
        return completion.text
