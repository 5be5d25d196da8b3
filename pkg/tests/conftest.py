import pytest

from hmegraph import default_vocab


@pytest.fixture(scope="session")
def vocab():
    return default_vocab()
