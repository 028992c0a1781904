import warnings

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def quiet_regime():
    from qzeno.model import RegimeViolation

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeViolation)
        yield
