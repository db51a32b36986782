"""Numerical c-projective geometry on a chart: metrics from defining
functions, canonical connections, curvature and Schouten tensors, slot-form
tractor calculus, and boundary-limit certification of compactification
asymptotics."""

__version__ = "0.1.0"

from . import boundary, cproj, examples, fieldexpr, geometry, jets, tractor

__all__ = ["boundary", "cproj", "examples", "fieldexpr", "geometry", "jets",
           "tractor", "__version__"]
