import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from sembeam.kb import load_kb

FIXTURES = os.path.join(os.path.dirname(__file__), os.pardir, "fixtures")
MINI_TRIPLES = os.path.join(FIXTURES, "mini.triples")
MINI_SCHEMA = os.path.join(FIXTURES, "mini.schema")


@pytest.fixture(scope="session")
def mini_paths():
    return MINI_TRIPLES, MINI_SCHEMA


@pytest.fixture(scope="session")
def mini():
    return load_kb(MINI_TRIPLES, MINI_SCHEMA)
