"""Service test fixtures: in-process client, live server, and golden request."""

from __future__ import annotations

import threading
import time
from pathlib import Path

import pytest
import uvicorn
from fastapi.testclient import TestClient

from humorkit.annotate import annotate_joke, read_conllu_corpus
from humorkit.corpus import load_corpus
from humorkit.infill import template_request
from humorkit.lexicons import load_lexicon_set
from humorkit.template import extract_template

from mlm_service import ServiceConfig, create_app

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def service_config():
    return ServiceConfig(max_top_k=10, max_sequence_tokens=32)


@pytest.fixture()
def client(service_config):
    with TestClient(create_app(service_config)) as test_client:
        yield test_client


@pytest.fixture(scope="session")
def golden_docs():
    """The three golden jokes annotated from the shipped CoNLL-U fixture."""
    jokes = load_corpus(FIXTURES / "golden_jokes.jsonl", "jsonl")
    with (FIXTURES / "conllu" / "golden_jokes.conllu").open(encoding="utf-8") as fh:
        gold = dict(read_conllu_corpus(fh))
    return [annotate_joke(joke, sentences=gold[joke.id]) for joke in jokes]


@pytest.fixture(scope="session")
def golden_request(golden_docs):
    """Three-mask infill request built from the first golden joke."""
    lexicons = load_lexicon_set(FIXTURES / "lexicons")
    doc = golden_docs[0]
    return template_request(extract_template(doc, lexicons), doc, top_k=5)


@pytest.fixture(scope="session")
def live_server():
    """A real uvicorn instance on an ephemeral port, for HTTP-client tests."""
    app = create_app(ServiceConfig())
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("service did not start within 10 s")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)
