import json
import socket
from pathlib import Path

import pytest

from peermirror.llm import LLMClient
from peermirror.mock import MockBackend, load_references
from peermirror.pipeline import Pipeline

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


class NetworkBlocked(RuntimeError):
    pass


def _blocked(*args, **kwargs):
    raise NetworkBlocked("network access is disabled during tests")


@pytest.fixture(autouse=True)
def no_network(monkeypatch):
    """Any attempt to open a connection fails loudly."""
    monkeypatch.setattr(socket.socket, "connect", _blocked)
    monkeypatch.setattr(socket.socket, "connect_ex", _blocked)
    monkeypatch.setattr(socket, "create_connection", _blocked)
    monkeypatch.setattr(socket, "getaddrinfo", _blocked)


@pytest.fixture(scope="session")
def corpus():
    return [json.loads(l) for l in (FIXTURES / "corpus.jsonl").read_text("utf-8").splitlines() if l.strip()]


@pytest.fixture(scope="session")
def references():
    return load_references(FIXTURES / "references.jsonl")


@pytest.fixture
def mock_pipeline(references):
    return Pipeline(LLMClient(MockBackend(references)))
