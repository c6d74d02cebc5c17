"""polymerlab: exact enumeration and Monte Carlo for one-dimensional
self-repellent lattice polymers, with weak-coupling scaling checks."""

__version__ = "0.1.0"

from .models import attraction, domb_joyce, saw, strip  # noqa: F401
from .steps import make_distribution  # noqa: F401
