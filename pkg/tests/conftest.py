import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "scripts"))

from make_demo import build_demo   # noqa: E402


@pytest.fixture(scope="session")
def demo_workspace(tmp_path_factory):
    """One shared synthetic workspace for the CLI and acceptance tests."""
    root = tmp_path_factory.mktemp("demo")
    config_path = build_demo(root, seed=0)
    return root, config_path
