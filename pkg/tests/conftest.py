from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from radial_lab import SystemParams

settings.register_profile(
    "lab", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("lab")

P1 = SystemParams(3, 0, 0, 0.5, 0.2, 1)
P2 = SystemParams(4, 1, 2, 0.5, 0.1, 1)
P3 = SystemParams(3, 0, 0, 0.3, 0.2, 2)
REFERENCE = {"P1": P1, "P2": P2, "P3": P3}


@pytest.fixture(params=list(REFERENCE), ids=list(REFERENCE))
def reference(request):
    return REFERENCE[request.param]
