"""Simulation toolkit for low-field all-optical NV-ensemble magnetometry."""

from .geometry import ORIENTATIONS, FieldPoint, Orientation, degeneracy_angles
from .hamiltonian import Isotope, PhysicalConstants

__version__ = "0.1.0"

__all__ = ["ORIENTATIONS", "FieldPoint", "Orientation", "degeneracy_angles", "Isotope",
           "PhysicalConstants", "__version__"]
