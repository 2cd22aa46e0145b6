"""Stackelberg network interdiction against a logit (quantal-response) adversary."""

from .errors import *  # noqa: F401,F403
from .graph import (
    Constraints,
    CriticalData,
    InterdictionInstance,
    KindRecord,
    LayeredInstance,
    NodeRecord,
    ValidatedInstance,
    build_layered,
    build_subgraph_retaining,
    chain,
    diamond,
    generate_random,
    validate,
)
from .kernels import BACKEND

__version__ = "0.1.0"
