"""Shared pytest fixtures for SIMLab."""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path for imports
sys.path.insert(0, str(Path(__file__).parent))

from model import DeepNet, TwoLayerNet, get_activation
from utils.eval_tracker import reset_default_tracker
from utils.seeding import make_rng


@pytest.fixture
def rng() -> np.random.Generator:
    return make_rng(1234)


@pytest.fixture
def two_layer():
    """Factory: two_layer(m, d, activation) -> TwoLayerNet."""
    def make(m: int = 2, d: int = 1, activation: str = "tanh") -> TwoLayerNet:
        return TwoLayerNet(m, d, get_activation(activation))
    return make


@pytest.fixture
def deep_net():
    """Factory: deep_net(widths, activation) -> DeepNet."""
    def make(widths=(2, 3, 2, 1), activation: str = "tanh", linear_readout: bool = False) -> DeepNet:
        return DeepNet(widths, get_activation(activation), linear_readout=linear_readout)
    return make


@pytest.fixture(autouse=True)
def fresh_tracker():
    reset_default_tracker()
    yield
