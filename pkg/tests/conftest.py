import os
import tempfile

# the ledger engine is created at import time, so point it away from the working tree first
_LEDGER_DIR = tempfile.mkdtemp(prefix="bathy-tests-")
os.environ["BATHY_DATABASE_URL"] = f"sqlite:///{os.path.join(_LEDGER_DIR, 'runs.db')}"
os.environ["BATHY_OUTPUT_DIR"] = os.path.join(_LEDGER_DIR, "out")

import numpy as np
import pytest

from bathy.elliptic import SolverSettings
from bathy.geometry import Grid1D, ScalarField


@pytest.fixture
def window():
    return Grid1D(0.0, 1.0, 33)


@pytest.fixture
def settings():
    return SolverSettings()


@pytest.fixture
def flat(window):
    return ScalarField.constant(window, -1.0), ScalarField.constant(window, 0.0)


@pytest.fixture
def bump_bottom(window):
    return ScalarField.from_function(window, lambda x: -1.0 + 0.2 * np.exp(-50.0 * (x - 0.5) ** 2))


@pytest.fixture
def linear_potential(window):
    return ScalarField.from_function(window, lambda x: x)

