import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ehcmm.kinematics import default_model  # noqa: E402
from ehcmm.reachability import cached_map  # noqa: E402

CACHE = Path(os.environ.get("EHCMM_CACHE_DIR") or Path.home() / ".cache" / "ehcmm")


@pytest.fixture(scope="session")
def model():
    return default_model()


@pytest.fixture(scope="session")
def rmap(model):
    """The default 0.05 m map (built once, then cached on disk)."""
    return cached_map(model, CACHE)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
