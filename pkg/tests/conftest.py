import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dsmpa import _kernels  # noqa: E402
from dsmpa.channel import Geometry, channel_stats  # noqa: E402
from dsmpa.codebook import Codebook, CodebookConfig  # noqa: E402

BACKENDS = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])


@pytest.fixture(scope="session")
def cfg():
    return CodebookConfig()


@pytest.fixture(scope="session")
def codebook(cfg):
    return Codebook(cfg, "alamouti")


@pytest.fixture(scope="session")
def diag_codebook(cfg):
    return Codebook(cfg, "diagonal")


@pytest.fixture(scope="session")
def stats():
    return channel_stats(Geometry())


@pytest.fixture
def rng():
    return np.random.default_rng(20241016)


# criterion number -> (passed, one-line summary); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(ACCEPTANCE, key=str):
        passed, summary = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {summary}")
