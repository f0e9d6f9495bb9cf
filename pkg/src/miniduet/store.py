"""Append-only encrypted record log, held on the untrusted side.

The log only ever sees ciphertext envelopes; nothing here can produce
plaintext. Optional persistence writes one JSON envelope per line.
Persisted ciphertexts become permanently undecryptable once the server
restarts, because the enclave keypair dies with the process.
"""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path

from .envelope import Envelope, MalformedEnvelope


class RecordLog:
    def __init__(self, persist_path: str | Path | None = None):
        self._entries: list[tuple[Envelope, float]] = []
        self._lock = threading.Lock()
        self._path = Path(persist_path) if persist_path else None

    def append(self, env: Envelope) -> int:
        """Append an envelope; returns its index."""
        if not isinstance(env, Envelope):
            raise MalformedEnvelope("not an envelope")
        if not (env.wrapped_key and env.nonce and env.ciphertext):
            raise MalformedEnvelope("envelope has empty fields")
        with self._lock:
            index = len(self._entries)
            self._entries.append((env, time.time()))
            if self._path is not None:
                with self._path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(env.to_wire()) + "\n")
        return index

    def snapshot(self) -> tuple[Envelope, ...]:
        """Immutable view of the current contents."""
        with self._lock:
            return tuple(env for env, _ in self._entries)

    def timestamps(self) -> tuple[float, ...]:
        with self._lock:
            return tuple(ts for _, ts in self._entries)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    @classmethod
    def load(cls, path: str | Path) -> "RecordLog":
        """Reload persisted ciphertexts (undecryptable after a restart)."""
        log = cls()
        with Path(path).open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    log.append(Envelope.from_wire(json.loads(line)))
        return log
