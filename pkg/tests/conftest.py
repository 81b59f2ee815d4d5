import pytest

from cnametrack.sitectx import PublicSuffixTable


@pytest.fixture(scope="session")
def psl() -> PublicSuffixTable:
    return PublicSuffixTable.bundled()
