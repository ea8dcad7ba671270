import pytest

from kpmass.acceptance import load_frozen


@pytest.fixture(scope="session")
def frozen():
    """Oracle values frozen by scripts/derive_oracles.py."""
    return {name: entry["values"] for name, entry in load_frozen().items()}
