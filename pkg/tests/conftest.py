import json
import sys

import pytest

from isabel.cli import _bundled
from isabel.kg import load_kg
from isabel.pipeline import PipelineConfig
from isabel.text import load_lexicon

FIXTURE_KG_PATH = _bundled("kg_gaming.json")
FIXTURE_LEXICON_PATH = _bundled("lexicon_en.json")


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon(FIXTURE_LEXICON_PATH.read_bytes())


@pytest.fixture(scope="session")
def kg(lexicon):
    return load_kg(FIXTURE_KG_PATH.read_bytes(), lexicon)


@pytest.fixture(scope="session")
def kg_doc():
    return json.loads(FIXTURE_KG_PATH.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def config(kg):
    return PipelineConfig.from_kg(kg)


def pytest_terminal_summary(terminalreporter):
    # Surface the acceptance verdict lines even though pytest captures
    # per-test stdout; the module records one line per criterion.
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "REPORT_LINES", None) if module else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
