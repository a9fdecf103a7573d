"""Shared fixtures: demo paths, random corpus generation, a stub chat server."""

from __future__ import annotations

import json
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
DEMO_DIR = REPO_ROOT / "demo"


@pytest.fixture(scope="session")
def demo_dataset_path() -> Path:
    return DEMO_DIR / "dataset.jsonl"


@pytest.fixture(scope="session")
def demo_fixtures_path() -> Path:
    return DEMO_DIR / "fixtures.jsonl"


@pytest.fixture(scope="session")
def demo_config_path() -> Path:
    return DEMO_DIR / "config.json"


def make_random_corpus(rng: random.Random, max_docs: int = 5, max_vocab: int = 12):
    """Term lists for oracle-equivalence checks: n <= 5 docs, <= 12 distinct terms."""
    vocab_size = rng.randint(1, max_vocab)
    vocab = [f"t{j:02d}" for j in range(vocab_size)]
    n_docs = rng.randint(1, max_docs)
    docs = []
    for _ in range(n_docs):
        length = rng.randint(0, 8)
        docs.append([vocab[rng.randrange(vocab_size)] for _ in range(length)])
    return docs


# ---------------------------------------------------------------------------
# Stub chat-completions server


class _StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):  # noqa: N802 - http.server API
        server: StubServer = self.server  # type: ignore[assignment]
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length) or b"{}")
        with server.lock:
            server.requests.append((self.path, payload))
            step = server.script.pop(0) if server.script else None
        if step is not None:
            body = step.get("body", {"error": {"message": step.get("message", "scripted")}})
            self._reply(step.get("status", 200), body)
            return
        n = payload.get("n", 1)
        prompt = payload["messages"][-1]["content"]
        choices = [
            {"index": i, "message": {"role": "assistant", "content": server.make_text(prompt, i, payload)}}
            for i in range(n)
        ]
        prompt_tokens = len(prompt.split()) + 2
        completion_tokens = 7 * n
        self._reply(
            200,
            {
                "choices": choices,
                "usage": {
                    "prompt_tokens": prompt_tokens,
                    "completion_tokens": completion_tokens,
                    "total_tokens": prompt_tokens + completion_tokens,
                },
            },
        )

    def _reply(self, status: int, body: dict) -> None:
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):  # silence request logging in test output
        pass


class StubServer(ThreadingHTTPServer):
    """Local canned-response chat-completions server.

    Responses are deterministic functions of the request, so recording the
    same dataset twice yields byte-identical fixtures. Scripted steps (for
    error-injection) are consumed first, one per request, then the server
    falls back to make_text.
    """

    def __init__(self):
        super().__init__(("127.0.0.1", 0), _StubHandler)
        self.requests: list[tuple[str, dict]] = []
        self.script: list[dict] = []
        self.lock = threading.Lock()
        self.make_text = lambda prompt, i, payload: f"stub answer {i} to {prompt}"

    @property
    def endpoint(self) -> str:
        return f"http://127.0.0.1:{self.server_address[1]}"


@pytest.fixture()
def stub_server():
    server = StubServer()
    thread = threading.Thread(
        target=lambda: server.serve_forever(poll_interval=0.02), daemon=True
    )
    thread.start()
    try:
        yield server
    finally:
        server.shutdown()
        server.server_close()
        thread.join(timeout=5)
