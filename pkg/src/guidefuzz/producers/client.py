"""Chat-completions client with retries and replayable cassettes."""
from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

log = logging.getLogger(__name__)

DEFAULT_TEMPERATURES = (0.9, 0.95, 1.0)
DEFAULT_KEY_ENV = "GUIDEFUZZ_API_KEY"


class LLMError(RuntimeError):
    """The endpoint could not produce a reply after all retries."""


class MissingApiKey(LLMError):
    pass


@dataclass
class ProviderConfig:
    endpoint: str
    model: str
    api_key_env: str = DEFAULT_KEY_ENV
    temperatures: tuple = DEFAULT_TEMPERATURES
    retries: int = 3
    timeout: float = 60.0
    backoff: float = 1.0

    def __post_init__(self):
        self.temperatures = tuple(float(t) for t in self.temperatures)
        if not self.temperatures:
            raise ValueError("at least one temperature is required")
        for t in self.temperatures:
            if not 0 < t <= 2:
                raise ValueError(f"temperature {t} outside (0, 2]")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")

    def api_key(self, required: bool = True):
        key = os.environ.get(self.api_key_env)
        if not key and required:
            raise MissingApiKey(f"environment variable {self.api_key_env} is not set")
        return key


class HttpTransport:
    def post(self, url: str, payload: dict, headers: dict, timeout: float) -> dict:
        resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
        resp.raise_for_status()
        return resp.json()


def _cassette_key(url: str, payload: dict) -> str:
    return json.dumps({"url": url, "payload": payload}, sort_keys=True)


@dataclass
class Cassette:
    """Recorded request/response pairs.

    In ``replay`` mode requests are answered from the file and unknown
    requests raise.  In ``record`` mode requests go to ``inner`` and every
    exchange is appended; call :meth:`save` afterwards.
    """

    path: Path
    mode: str = "replay"
    inner: object = None
    interactions: list = field(default_factory=list)

    def __post_init__(self):
        self.path = Path(self.path)
        if self.mode not in ("replay", "record"):
            raise ValueError(f"unknown cassette mode {self.mode!r}")
        if self.mode == "replay":
            with open(self.path, encoding="utf-8") as fh:
                self.interactions = json.load(fh)["interactions"]
        elif self.inner is None:
            self.inner = HttpTransport()
        self._index = {}
        for item in self.interactions:
            self._index.setdefault(_cassette_key(item["url"], item["request"]), []).append(item)

    def post(self, url: str, payload: dict, headers: dict, timeout: float) -> dict:
        key = _cassette_key(url, payload)
        if self.mode == "replay":
            hits = self._index.get(key)
            if not hits:
                raise LLMError("request not found in cassette")
            item = hits.pop(0) if len(hits) > 1 else hits[0]
            if "error" in item:
                raise requests.ConnectionError(item["error"])
            return item["response"]
        try:
            response = self.inner.post(url, payload, headers, timeout)
        except requests.RequestException as exc:
            self.interactions.append({"url": url, "request": payload, "error": str(exc)})
            raise
        self.interactions.append({"url": url, "request": payload, "response": response})
        return response

    def save(self):
        with open(self.path, "w", encoding="utf-8") as fh:
            json.dump({"interactions": self.interactions}, fh, indent=2, sort_keys=True)
            fh.write("\n")


class ChatClient:
    def __init__(self, config: ProviderConfig, transport=None, sleep=time.sleep):
        self.config = config
        self.transport = transport or HttpTransport()
        self.sleep = sleep

    def complete(self, prompt: str, temperature: float) -> str:
        """Send one user message; return the first choice's content."""
        cfg = self.config
        payload = {
            "model": cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
        }
        headers = {"Content-Type": "application/json"}
        key = cfg.api_key(required=not isinstance(self.transport, Cassette)
                          or self.transport.mode == "record")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        last = None
        for attempt in range(cfg.retries + 1):
            try:
                data = self.transport.post(cfg.endpoint, payload, headers, cfg.timeout)
                return data["choices"][0]["message"]["content"]
            except (requests.RequestException, KeyError, IndexError, TypeError, ValueError) as exc:
                last = exc
                log.warning("LLM request failed (attempt %d/%d): %s",
                            attempt + 1, cfg.retries + 1, exc)
                if attempt < cfg.retries:
                    self.sleep(cfg.backoff * 2**attempt)
        raise LLMError(f"giving up after {cfg.retries + 1} attempts: {last}")
