"""Shared fixtures: the expensive objects are computed once per session.

The Feigenbaum fixed point, the golden rotation number, the logistic-type
family, and the unstable-manifold points f*_j are reused across modules;
everything else is cheap enough to build inside the tests.
"""

import pytest

from qprenorm_lab import (
    DomainConfig,
    RotationNumber,
    feigenbaum_fixed_point,
    flm_family,
    unstable_manifold_points,
)


@pytest.fixture(scope="session")
def domain():
    return DomainConfig()


@pytest.fixture(scope="session")
def fp(domain):
    return feigenbaum_fixed_point(domain)


@pytest.fixture(scope="session")
def golden():
    return RotationNumber.golden()


@pytest.fixture(scope="session")
def flm():
    return flm_family()


@pytest.fixture(scope="session")
def stars(fp):
    # f*_1 .. f*_4 on the unstable manifold, f*_j superstable of period 2^j
    return unstable_manifold_points(fp, 4)
