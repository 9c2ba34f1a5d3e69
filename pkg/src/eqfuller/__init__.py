"""Equivariant Fuller index for flows with finite symmetry groups."""
__version__ = "0.1.0"

from .errors import EqFullerError
from .fuller_index import FullerResult, fuller_index, iterate_index_sum
from .group_theory import (FiniteGroup, OrthogonalAction, builtin_group,
                           enumerate_subgroup_classes, table_of_marks)
from .homotopy_sweep import sweep_family, sweep_map_family, verify_invariance
from .periodic_orbits import PeriodicOrbit, shoot_periodic, sweep_seeds
from .regions import EssentialWindow, Region
from .systems import VectorFieldSystem, builtin_system
from .tomdieck import TomDieckVector
