"""Chiral Majorana edge modes of the Kitaev honeycomb model.

Lattice and quadratic-Hamiltonian construction, momentum-space diagnostics,
closed-form edge theory, exact free-fermion time evolution, edge-mediated
quantum-information protocols, and a disorder sweep harness.
"""

__version__ = "0.1.0"

from .lattice import (  # noqa: F401
    LatticeError,
    LatticeGraph,
    LinkRecord,
    SiteCoord,
    TripleRecord,
    attach_external_spin,
    build_finite,
    build_strip,
    build_torus,
)
from .hamiltonian import (  # noqa: F401
    AssemblyError,
    CouplingMatrix,
    CouplingParams,
    FluxPattern,
    GaugeConfig,
    ModeBasis,
    assemble,
    flux_pattern,
    insert_flux_pair,
)
