import functools

import numpy as np
import pytest

from phsg.models import parametrize
from phsg.pce_basis import ChaosBasis
from phsg.sg_assembly import assemble_sg

_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@functools.lru_cache(maxsize=None)
def sg_system(model, variation, degree, transform="image"):
    """Cached SG systems shared across test modules."""
    psys = parametrize(model, variation)
    pt = psys.image_transform() if transform == "image" else psys.basis_transform(transform)
    return assemble_sg(pt, ChaosBasis(psys.q, degree))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance(request):
    """Record a pass/fail line for an acceptance criterion, then assert it."""
    store = request.config.stash.setdefault(_ACCEPTANCE_KEY, {})

    def record(number, ok, detail):
        store[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE_KEY, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        ok, detail = store[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
