import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mefa.evalbench import load_corpus
from mefa.gateway import BackendSpec, Gateway

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def corpus6():
    return load_corpus(FIXTURES / "corpus6.jsonl")


@pytest.fixture
def scripted6():
    return json.loads((FIXTURES / "scripted6.json").read_text())


@pytest.fixture
def scripted_gateway(scripted6):
    def make(cache_dir=None, **kw):
        return Gateway(BackendSpec("scripted", responses=scripted6, cache_dir=cache_dir), **kw)
    return make
