"""
Shared fixtures for the test suite.
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from app.core.models import ProjectionNet, build_model  # noqa: E402


@pytest.fixture(autouse=True)
def _no_budget_env(monkeypatch):
    monkeypatch.delenv("LTO_VERIFY_BUDGET", raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def toric():
    """Square-layout toric patch; its straddling terms are the named C/D generators."""
    return build_model("toric", {"patch": [4, 4], "layout": "square"})


@pytest.fixture
def toric_net(toric):
    return ProjectionNet(toric)


@pytest.fixture
def rotated():
    """Mirror-symmetric toric patch: width 4 with the cut at x = 1.5."""
    return build_model("toric", {"patch": [4, 5], "layout": "rotated"})


@pytest.fixture
def rotated_net(rotated):
    return ProjectionNet(rotated)
