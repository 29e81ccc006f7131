"""tsrmlab: a laboratory for the true self-repelling motion.

Three kinds of machinery live here:

* an exact discrete web engine (`lattice_web`, `contour`) for structural
  identities: non-crossing, duality, Ray-Knight local-time bookkeeping,
  plane-filling contours;
* continuum Monte Carlo samplers (`samplers`) for the distributional laws
  the process inherits from Brownian areas;
* closed-form Brownian-area analytics (`area_laws`) that serve as
  independent oracles, plus estimation tooling (`estimators`) and a CLI.
"""

__version__ = "0.1.0"

from . import area_laws, contour, estimators, lattice_web, rng, samplers  # noqa: F401
