"""Toolkit for deciding whether a family of bubble balls in a ball domain is
avoidable or unavoidable for the censored alpha-stable process (alpha in (1,2)).

Two independent routes are provided and can be cross-checked:

* ``criteria`` evaluates capacity-based divergence criteria (boundary series,
  radial integral, Whitney/Wiener/Aikawa sums) with two-sided envelopes;
* ``simulate`` estimates the hitting probability of the bubble union by a
  jump-suppression Monte-Carlo chain.

The simulator is a discretization of the censored process, not an exact
construction; see the README for the documented approximations.
"""

from .geometry import BallDomain, dist_to_boundary, interior_ball_point, scale_domain
from .kernels import Constants, Envelope

__version__ = "0.1.0"

__all__ = [
    "BallDomain",
    "Constants",
    "Envelope",
    "dist_to_boundary",
    "interior_ball_point",
    "scale_domain",
    "__version__",
]
