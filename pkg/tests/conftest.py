import pytest

from components.coupling import build
from components.ground_state import solve


@pytest.fixture(scope="session")
def solved():
    """Memoised solver: ``solved(N)`` or ``solved(N, "dd")``."""
    store = {}

    def get(n_worlds, precision="double"):
        key = (n_worlds, precision)
        if key not in store:
            store[key] = solve(n_worlds, precision=precision)
        return store[key]

    return get


@pytest.fixture(scope="session")
def coupled(solved):
    store = {}

    def get(n_worlds):
        if n_worlds not in store:
            store[n_worlds] = build(solved(n_worlds))
        return store[n_worlds]

    return get


@pytest.fixture
def cache_dir(tmp_path, monkeypatch):
    monkeypatch.delenv("MIW_CACHE_DIR", raising=False)
    return tmp_path / "cache"
