import os
import sys

import pytest

# Add the project root to the path so tests import `config` and `src` like the cli does
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.core.model_group import ModelGroup
from src.core.permgrp import build_chain, elements, wn_generators


@pytest.fixture(autouse=True)
def default_caps(monkeypatch):
    """Tests run against the shipped caps, whatever a local .env says"""
    for name in ("TREEMONO_LEVEL_CAP", "TREEMONO_GROUP_LEVEL_CAP", "TREEMONO_SEED",
                 "TREEMONO_OUTPUT_FORMAT", "TREEMONO_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture(scope="session")
def two_fixed():
    """<a, b> with a=(a,1,1)(1 2), b=(1,1,b)(2 3)"""
    return ModelGroup.from_families([(0, 1), (0, 1)])


@pytest.fixture(scope="session")
def period_two():
    """<a1, a2, b>, one c-generator"""
    return ModelGroup.from_families([(0, 2), (0, 1)])


@pytest.fixture(scope="session")
def w2_elements():
    return list(elements(build_chain(wn_generators(2))))
