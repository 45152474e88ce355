"""
cutfem - cut finite elements stabilized by a discrete extension operator
"""

__version__ = "0.1.0"

from .geometry import LevelSetDomain, volume_quadrature, surface_quadrature, classify_cell
from .mesh import BackgroundGrid, build_active_mesh, build_sh_map
from .femspace import ElementFamily, FESpace, build_dof_map
from .extension import build_extension, apply_expand, restrict, interpolate_pi_E
from .forms import (FormParams, assemble_poisson, assemble_interface, assemble_biharmonic,
                    assemble_triharmonic, assemble_mass)
from .solver import solve, estimate_condition
from .analysis import error_norms, eoc_table
from .timestep import backward_euler_run
from .fields import Field

__all__ = [
    'LevelSetDomain', 'volume_quadrature', 'surface_quadrature', 'classify_cell',
    'BackgroundGrid', 'build_active_mesh', 'build_sh_map',
    'ElementFamily', 'FESpace', 'build_dof_map',
    'build_extension', 'apply_expand', 'restrict', 'interpolate_pi_E',
    'FormParams', 'assemble_poisson', 'assemble_interface', 'assemble_biharmonic',
    'assemble_triharmonic', 'assemble_mass',
    'solve', 'estimate_condition',
    'error_norms', 'eoc_table',
    'backward_euler_run',
    'Field',
]
