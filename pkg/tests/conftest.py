import numpy as np
import pytest

import pgmkit as pk

import _helpers as H


@pytest.fixture
def ab_net() -> pk.Network:
    return H.ab_network()


@pytest.fixture
def chain3() -> pk.Network:
    return H.chain3_network()


@pytest.fixture(scope="session")
def bench8() -> pk.Network:
    return H.benchmark8_network()


@pytest.fixture(scope="session")
def rare8() -> pk.Network:
    return H.rare_chain8_network()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
