import numpy as np
import pytest

from pseudomcf import catalog
from pseudomcf.geometry import build_frame


@pytest.fixture(scope="session")
def frames():
    """Catalog frames at default resolutions, built once per session."""
    cache = {}

    def get(name, resolution=None, order=4, refine=0):
        key = (name, resolution, order, refine)
        if key not in cache:
            sample, meta = catalog.build(name, resolution, order, refine)
            cache[key] = (build_frame(sample), meta)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def closed_curve():
    from pseudomcf.alcurve import find_closed

    report = find_closed((0.3, 0.9), "2/3", tolerance=1e-6)
    assert report.success
    return report.curve


def interior_sup(field, frame):
    return float(np.max(field[frame.interior]))
