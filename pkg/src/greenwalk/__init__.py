"""Green functions of random walks on free groups and free products of cyclic groups."""
from .errors import (AdmissibilityError, DivergenceError, GreenwalkError, InputError,
                     InstabilityError, InvariantError, ParameterError, ResourceError, SchemaError)
from .groups import Group, GroupSpec, free_group, free_product
from .measures import Measure, TailFamily, delta, lazy, nearest_neighbor, realize, srw
from .domains import Domain
from .green import (GreenConfig, GreenValue, first_visit, green, green_restricted,
                    martin_kernel, spectral_radius)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError", "DivergenceError", "GreenwalkError", "InputError", "InstabilityError",
    "InvariantError", "ParameterError", "ResourceError", "SchemaError",
    "Group", "GroupSpec", "free_group", "free_product",
    "Measure", "TailFamily", "delta", "lazy", "nearest_neighbor", "realize", "srw",
    "Domain", "GreenConfig", "GreenValue", "first_visit", "green", "green_restricted",
    "martin_kernel", "spectral_radius",
]
