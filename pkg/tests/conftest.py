import os

# single-threaded BLAS: the suites parallelize over processes, and threaded
# small-matrix kernels only fight over the cores (must be set before numpy
# loads)
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
