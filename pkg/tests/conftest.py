import numpy as np
import pytest

from cointegra.acceptance import coint_ou, delay, mcarma_spec, ou_stationary
from cointegra.mcarma import msdde_from_mcarma
from cointegra.measure import MatExpDensity, SignedMatrixMeasure

A_COINT = np.array([[-1.0, 1.0], [0.0, 0.0]])
C0_COINT = np.array([[0.0, 1.0], [0.0, 1.0]])


@pytest.fixture(scope="session")
def ou_coint():
    return coint_ou()


@pytest.fixture(scope="session")
def ou_stat():
    return ou_stationary()


@pytest.fixture(scope="session")
def pure_delay():
    return delay()


@pytest.fixture(scope="session")
def carma_measure():
    return msdde_from_mcarma(mcarma_spec())


@pytest.fixture(scope="session")
def scalar_exp():
    """eta = -delta_0 + 0.5 e^{-2t} dt on the line."""
    d = MatExpDensity([[0.5]], [[-2.0]], [[1.0]])
    return SignedMatrixMeasure(1, ((0.0, [[-1.0]]),), d)
