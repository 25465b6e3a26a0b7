"""Sublinear expectations of maximally distributed white noise.

Exact region algebra, certified box maximization and the operators built on
them: finite-dimensional expectations, stochastic integrals, conditional
expectations, plus numerical cross-checks against the PDE and LLN
characterizations.
"""

__version__ = "0.1.0"

from .expr import parse, to_text  # noqa: E402
from .maximal import (CertificationError, CertifiedValue, MaximalVector,  # noqa: E402
                      UncertaintyInterval, expect, maximize, minimize)
from .regions import Box, Region, atoms, interval, normalize, region  # noqa: E402
from .whitenoise import FddQuery, WhiteNoiseModel, fdd_expect, fdd_generating  # noqa: E402

__all__ = [
    "parse", "to_text", "CertificationError", "CertifiedValue", "MaximalVector",
    "UncertaintyInterval", "expect", "maximize", "minimize", "Box", "Region", "atoms",
    "interval", "normalize", "region", "FddQuery", "WhiteNoiseModel", "fdd_expect",
    "fdd_generating",
]
