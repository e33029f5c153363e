"""Multi-entity Bayesian networks for situation assessment.

Subpackages: ``bn`` (discrete networks and exact inference), ``kb``
(knowledge bases of network fragments), ``ssn`` (situation-specific network
construction), ``hypman`` (hypothesis management and refine cycles) and
``battlefield`` (the bundled ground-force domain).
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

__all__ = ["__version__"]
