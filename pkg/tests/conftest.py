from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import helpers  # noqa: E402


@pytest.fixture
def bundle():
    return helpers.golden_bundle()


@pytest.fixture
def bank():
    return helpers.golden_bank()


@pytest.fixture
def config(bundle, bank):
    return helpers.scripted_config(bundle, bank)


@pytest.fixture
def guidelines():
    from cardioscribe.factcheck import default_guidelines

    return default_guidelines()
