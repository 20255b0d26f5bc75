import os

# keep timing-sensitive acceptance checks honest on shared hardware
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from promptseg import _kernels  # noqa: E402


@pytest.fixture(params=_kernels.available())
def backend(request):
    """Run the test once per kernel backend."""
    previous = _kernels.backend_name()
    _kernels.set_backend(request.param)
    yield request.param
    _kernels.set_backend(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
