import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from apliance.dpdp import builtin
from apliance.schema import Assignment

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def dpdp():
    """(schema, pack) for the built-in DPDP rule set."""
    return builtin()


@pytest.fixture
def favourable_base(dpdp):
    """All 16 base attributes at their compliance-favourable values."""
    schema, _ = dpdp
    values = {a.name: "true" for a in schema.base}
    values["purpose_of_processing"] = "other"
    return Assignment(values)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def golden_dir():
    return GOLDEN
