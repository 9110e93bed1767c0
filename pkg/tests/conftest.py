import os

os.environ["ENV"] = "test"

import pytest
from hypothesis import HealthCheck, settings

from epsense.model import build_mirror_ring, build_single_ring, build_three_ring, build_two_ring
from epsense.sensing_types import MirrorRing, SingleRing, ThreeRing, TwoRing

settings.register_profile(
    "epsense",
    max_examples=200,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
    print_blob=True,
)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "epsense"))


@pytest.fixture
def two_ring_ep():
    return build_two_ring(TwoRing(gamma=1.0, v=0.25))


@pytest.fixture
def three_ring_ep():
    return build_three_ring(ThreeRing(gamma=1.0))


@pytest.fixture
def isolated_mode():
    return build_single_ring(SingleRing(gamma=1.0, gamma_wg=0.5))


@pytest.fixture
def mirror_ring_half():
    return build_mirror_ring(MirrorRing(gamma=1.0, rho=0.5))


@pytest.fixture
def zoo():
    """Every zoo model at a few parameter points, with and without loss."""
    return [
        build_two_ring(TwoRing(gamma=1.0, v=0.25)),
        build_two_ring(TwoRing(gamma=1.0, v=0.4, kappa=0.1)),
        build_two_ring(TwoRing(gamma=2.0, v=0.1, v_phase=0.7)),
        build_three_ring(ThreeRing(gamma=1.0)),
        build_three_ring(ThreeRing(gamma=1.0, kappa=0.05)),
        build_single_ring(SingleRing(gamma=1.0, gamma_wg=0.5)),
        build_single_ring(SingleRing(gamma=1.0, kappa=0.2)),
        build_mirror_ring(MirrorRing(gamma=1.0, rho=0.5, phi=0.3)),
        build_mirror_ring(MirrorRing(gamma=1.0, rho=1.0, kappa=0.1)),
    ]
