"""Provider roles, dispatch with retries, transcripts, and the mock backend.

Roles are named slots (concept_mapper, question_writer, item_writer_1..4,
evaluator, feature_extractor); which commercial model sits behind a role
is configuration, never code. Every dispatch appends a TranscriptEntry to
an append-only log so generated content stays traceable.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field, asdict
from datetime import datetime, timezone
from typing import Callable, Optional

import httpx

from .errors import (
    DuplicateKeyError,
    ProviderError,
    ResponseTooLargeError,
    UnconfiguredRoleError,
    ValidationError,
)
from .textutil import next_seq

ROLE_NAMES = (
    "concept_mapper",
    "question_writer",
    "item_writer_1",
    "item_writer_2",
    "item_writer_3",
    "item_writer_4",
    "evaluator",
    "feature_extractor",
)

ITEM_WRITER_ROLES = tuple(r for r in ROLE_NAMES if r.startswith("item_writer_"))

CONTEXT_HEADER = "=== ATTACHED CONTEXT ==="
CONTEXT_FOOTER = "=== END CONTEXT ==="

_DEFAULT_RESPONSE_CAP = 256 * 1024


@dataclass(frozen=True)
class TranscriptEntry:
    """One prompt/response exchange. Append-only; never rewritten."""

    id: str
    role: str
    prompt: str
    response: str
    latency_ms: float
    timestamp: str
    retry_count: int = 0
    context: Optional[str] = None
    seq: int = 0


class TranscriptLog:
    """Append-only transcript store with serialized writes.

    Optionally mirrors every entry to a line-delimited JSON file.
    """

    def __init__(self, path: Optional[str] = None):
        self._entries: list[TranscriptEntry] = []
        self._lock = threading.Lock()
        self._path = path

    def append(self, role, prompt, response, latency_ms, retry_count, context=None) -> TranscriptEntry:
        with self._lock:
            seq = next_seq()
            entry = TranscriptEntry(
                id=f"t-{seq:06d}",
                role=role,
                prompt=prompt,
                response=response,
                latency_ms=latency_ms,
                timestamp=datetime.now(timezone.utc).isoformat(),
                retry_count=retry_count,
                context=context,
                seq=seq,
            )
            self._entries.append(entry)
            if self._path:
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(asdict(entry), ensure_ascii=False) + "\n")
            return entry

    def get(self, entry_id: str) -> Optional[TranscriptEntry]:
        with self._lock:
            return next((e for e in self._entries if e.id == entry_id), None)

    def entries(self) -> list[TranscriptEntry]:
        with self._lock:
            return list(self._entries)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


class MockBackend:
    """Deterministic fixture-driven backend for tests and offline runs.

    Resolution order: exact prompt key, longest fixture key that is a
    prefix of the prompt, then a labeled synthesized stub.
    """

    def __init__(self, fixtures=None):
        self._fixtures: dict[str, str] = {}
        if fixtures:
            self.load(fixtures)

    def load(self, fixtures) -> None:
        pairs = fixtures.items() if isinstance(fixtures, dict) else list(fixtures)
        seen = set(self._fixtures)
        for key, response in pairs:
            if key in seen:
                raise DuplicateKeyError(f"duplicate fixture key: {key[:60]!r}")
            seen.add(key)
        for key, response in pairs:
            self._fixtures[key] = response

    def complete(self, prompt: str) -> str:
        if prompt in self._fixtures:
            return self._fixtures[prompt]
        best = None
        for key in self._fixtures:
            if prompt.startswith(key) and (best is None or len(key) > len(best)):
                best = key
        if best is not None:
            return self._fixtures[best]
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:12]
        return f"[mock-stub {digest}] No fixture matched this prompt."


class FlakyBackend:
    """Test helper: fail with a transport error the first n calls."""

    def __init__(self, inner, failures: int):
        self.inner = inner
        self.failures = failures
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        if self.calls <= self.failures:
            raise ConnectionError("injected transport failure")
        return self.inner.complete(prompt)


class HttpBackend:
    """Minimal live adapter: POST {model, prompt} JSON, expect {text} back.

    Anything fancier (vendor SDK shapes, chat roles) belongs in a gateway
    in front of this, keeping credentials out of the artifact.
    """

    def __init__(self, base_url, model_name="", credentials_env=None, timeout_ms=60000):
        self.base_url = base_url
        self.model_name = model_name
        self.credentials_env = credentials_env
        self.timeout = timeout_ms / 1000.0

    def complete(self, prompt: str) -> str:
        headers = {}
        if self.credentials_env:
            token = os.environ.get(self.credentials_env, "")
            if not token:
                raise ProviderError(f"credentials env var {self.credentials_env} is not set")
            headers["Authorization"] = f"Bearer {token}"
        try:
            resp = httpx.post(
                self.base_url,
                json={"model": self.model_name, "prompt": prompt},
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
            payload = resp.json()
        except httpx.HTTPError as exc:  # transport failures are retryable
            raise ConnectionError(str(exc)) from exc
        if "text" not in payload:
            raise ProviderError("backend response missing 'text' field")
        return payload["text"]


@dataclass
class RetryPolicy:
    max_retries: int = 3
    base_delay: float = 1.0  # doubles per retry: 1s, 2s, 4s

    def delays(self):
        return [self.base_delay * (2 ** k) for k in range(self.max_retries)]


@dataclass
class ProviderRole:
    name: str
    backend: object
    response_cap: int = _DEFAULT_RESPONSE_CAP


class ProviderHub:
    """Role registry plus the dispatch loop (retries, caps, transcripts)."""

    def __init__(self, transcript_log: Optional[TranscriptLog] = None,
                 retry_policy: Optional[RetryPolicy] = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.transcripts = transcript_log if transcript_log is not None else TranscriptLog()
        self.retry_policy = retry_policy or RetryPolicy()
        self._sleep = sleep
        self._roles: dict[str, ProviderRole] = {}

    def configure(self, role_name: str, backend, response_cap: int = _DEFAULT_RESPONSE_CAP) -> None:
        self._roles[role_name] = ProviderRole(role_name, backend, response_cap)

    def configured_roles(self) -> list[str]:
        return sorted(self._roles)

    def role(self, role_name: str) -> ProviderRole:
        if role_name not in self._roles:
            raise UnconfiguredRoleError(f"no backend configured for role {role_name!r}")
        return self._roles[role_name]

    def dispatch(self, role_name: str, prompt: str, context: Optional[str] = None):
        """Send a prompt to a role's backend; returns (response, entry).

        The transcript records the caller's prompt byte-for-byte; an
        attached context block is transmitted as a delimited preamble
        and logged in the entry's context field.
        """
        if not prompt or not prompt.strip():
            raise ValidationError("prompt must be non-empty")
        role = self.role(role_name)
        wire_text = prompt
        if context:
            wire_text = f"{CONTEXT_HEADER}\n{context}\n{CONTEXT_FOOTER}\n\n{prompt}"
        delays = self.retry_policy.delays()
        attempt = 0
        start = time.perf_counter()
        while True:
            try:
                response = role.backend.complete(wire_text)
                break
            except ConnectionError as exc:
                if attempt >= len(delays):
                    raise ProviderError(
                        f"role {role_name!r} failed after {attempt} retries: {exc}"
                    ) from exc
                self._sleep(delays[attempt])
                attempt += 1
        if len(response.encode("utf-8")) > role.response_cap:
            raise ResponseTooLargeError(
                f"response from role {role_name!r} exceeds {role.response_cap} bytes"
            )
        latency_ms = (time.perf_counter() - start) * 1000.0
        entry = self.transcripts.append(
            role=role_name,
            prompt=prompt,
            response=response,
            latency_ms=latency_ms,
            retry_count=attempt,
            context=context,
        )
        return response, entry


def mock_load(hub: ProviderHub, fixtures_by_role: dict[str, dict[str, str]]) -> None:
    """Configure mock backends for every role present in the fixture map."""
    for role_name, fixtures in fixtures_by_role.items():
        hub.configure(role_name, MockBackend(fixtures))


def load_fixture_file(path: str) -> dict[str, dict[str, str]]:
    """Read a role → {prompt key → response} bundle, rejecting duplicate keys."""

    def no_dupes(pairs):
        seen = {}
        for k, v in pairs:
            if k in seen:
                raise DuplicateKeyError(f"duplicate key in fixture file: {k[:60]!r}")
            seen[k] = v
        return seen

    with open(path, encoding="utf-8") as fh:
        return json.load(fh, object_pairs_hook=no_dupes)


def hub_from_config(config: dict, *, force_mock: bool = False,
                    transcript_path: Optional[str] = None,
                    base_dir: Optional[str] = None) -> ProviderHub:
    """Build a hub from a configuration mapping.

    Config shape: {"roles": {name: {"kind": "live"|"mock", ...}},
    "fixture_file": optional path for mock roles}. Live role fields:
    base_url, model_name, credentials_env, timeout_ms. Credentials are
    only ever read from the named environment variable.
    """
    hub = ProviderHub(TranscriptLog(transcript_path))
    fixture_file = config.get("fixture_file")
    fixtures = {}
    if fixture_file:
        if base_dir and not os.path.isabs(fixture_file):
            fixture_file = os.path.join(base_dir, fixture_file)
        fixtures = load_fixture_file(fixture_file)
    shared_mock: dict[str, MockBackend] = {}
    for role_name, spec in config.get("roles", {}).items():
        kind = "mock" if force_mock else spec.get("kind", "mock")
        if kind == "mock":
            key = spec.get("fixture_key", role_name)
            if key not in shared_mock:
                shared_mock[key] = MockBackend(fixtures.get(key, {}))
            hub.configure(role_name, shared_mock[key])
        elif kind == "live":
            hub.configure(
                role_name,
                HttpBackend(
                    base_url=spec["base_url"],
                    model_name=spec.get("model_name", ""),
                    credentials_env=spec.get("credentials_env"),
                    timeout_ms=spec.get("timeout_ms", 60000),
                ),
            )
        else:
            raise ValidationError(f"unknown backend kind {kind!r} for role {role_name!r}")
    return hub


def demo_hub(transcript_path: Optional[str] = None) -> ProviderHub:
    """Hub wired to the bundled demo fixtures (fully offline)."""
    from . import data  # local import to avoid cycle at module load

    hub = ProviderHub(TranscriptLog(transcript_path))
    mock_load(hub, data.demo_fixtures())
    return hub
