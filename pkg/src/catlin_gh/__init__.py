"""Numerical laboratory for Catlin-type Finsler metrics on pseudoconvex model
domains in C^2: metrics, quasi-geodesics, length and height bounds,
hyperbolicity estimates and localization."""

from .errors import CatlinError, ConfigError, NumericError, PreconditionError
from .fixtures import list_domains, load_domain
from .metrics import MetricField

__version__ = "0.1.0"

__all__ = ["CatlinError", "ConfigError", "NumericError", "PreconditionError", "MetricField",
           "list_domains", "load_domain", "__version__"]
