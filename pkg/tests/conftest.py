import socket

import pytest

from manualrag import DeterministicHashEmbedder, generate_synthetic_corpus


@pytest.fixture
def small_corpus():
    return generate_synthetic_corpus(5, 6, seed=11)


@pytest.fixture
def hash_embedder():
    return DeterministicHashEmbedder(dim=64)


class _SocketRecorder:
    """Records (and refuses) any attempt to open a network connection."""

    def __init__(self):
        self.attempts = []


@pytest.fixture
def no_network(monkeypatch):
    recorder = _SocketRecorder()
    real_connect = socket.socket.connect

    def guarded_connect(self, address):
        recorder.attempts.append(address)
        raise AssertionError(f"network connection attempted to {address}")

    monkeypatch.setattr(socket.socket, "connect", guarded_connect)
    yield recorder
    monkeypatch.setattr(socket.socket, "connect", real_connect)
