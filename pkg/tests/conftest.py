import numpy as np
import pytest

from voldens.simmodel import make_model, rng_stream, sample_log_sigma2


@pytest.fixture(scope="session")
def expou():
    return make_model("expou")


@pytest.fixture(scope="session")
def cir():
    return make_model("cir")


@pytest.fixture(scope="session")
def conv_sample(expou):
    """Exact-convolution draws: N(0,1) log-variance plus log chi-square noise."""
    def draw(n, seed=11):
        x = sample_log_sigma2(expou, n, rng_stream(seed, "volatility"))
        z = rng_stream(seed, "price").standard_normal(n)
        return x + np.log(z * z)
    return draw
