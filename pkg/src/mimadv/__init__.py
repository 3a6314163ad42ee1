"""Mixed mimetic spectral elements for upwinded (Petrov-Galerkin) tracer advection."""
from .assembly import VelocityModel
from .mesh import Field, build_mesh, project_to_Q
from .operators import build_operator
from .polybasis import build_basis, gll_points

__version__ = "0.1.0"

__all__ = ["VelocityModel", "Field", "build_mesh", "project_to_Q", "build_operator", "build_basis", "gll_points", "__version__"]
