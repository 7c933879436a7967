"""Verification and simulation toolkit for anisotropic oriented percolation.

Open each lattice edge (x, x + e_i) independently with its own probability
p_i; the package decides, certifies, and simulates whether the origin's open
cluster can be infinite.  Submodules:

* vectors   - direction-weight vectors, exact or float, with mu and var(Y_0)
* oracle    - zero-tolerance rational enumeration of oriented path pairs
* walk      - two-walk collision series, renewal inversion, certified tails
* packing   - the mass-packing transform on capped probability vectors
* certify   - percolation certificates (closed-form, numeric, subcritical)
* simulate  - counter-based seeded Monte Carlo of the growing cluster
* acceptance - the release gate behind `opercolate verify-all`
"""

from .errors import InternalInvariantError, ResourceLimitError, ValidationError
from .vectors import EdgeParams, ProbVector, mu, normalize, parse_vector, var_y0

__all__ = [
    "EdgeParams",
    "ProbVector",
    "mu",
    "normalize",
    "parse_vector",
    "var_y0",
    "ValidationError",
    "ResourceLimitError",
    "InternalInvariantError",
]

__version__ = "0.1.0"
