"""Shared fixtures: figure parameter sets and cached expensive objects."""

import numpy as np
import pytest

from gspt.models import builtin_model

# parameter sets used in the source figures
EM_FIG = dict(mu=1.0, kappa=1e-2, a=4.0, b=6.0)
SSEXP_FIG = dict(v0=0.5, mu_m=1.0, mu_s=2.0, a=3.0)
SSPOLY_FIG = dict(v0=0.25, v_m=1.0, mu_m=0.5, mu_s=1.0)
TRANSITION_BASE = dict(v0=2.0, mu_s=9.0, a1=4.0, a3=0.1)

# model name -> params giving the published phase portraits
FIG_PARAMS = {
    "minimal": {},
    "ebers_moll": EM_FIG,
    "stickslip_exp": SSEXP_FIG,
    "stickslip_poly": SSPOLY_FIG,
    "vdp": {},
    "transition": dict(delta=1.0, **TRANSITION_BASE),
}


def fig_model(name):
    return builtin_model(name, FIG_PARAMS[name])


@pytest.fixture(scope="session")
def minimal():
    return builtin_model("minimal")


@pytest.fixture(scope="session")
def vdp():
    return builtin_model("vdp")


@pytest.fixture(scope="session")
def ebers():
    return builtin_model("ebers_moll", EM_FIG)


@pytest.fixture(scope="session")
def sspoly():
    return builtin_model("stickslip_poly", SSPOLY_FIG)


@pytest.fixture(scope="session")
def minimal_cycle(minimal):
    """The minimal-model limit cycle at eps = 1e-2, shared across tests."""
    from gspt.simulate import find_limit_cycle
    return find_limit_cycle(minimal, 1e-2)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260816)
