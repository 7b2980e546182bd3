"""dwlab: a desk-scale laboratory for volume-constrained double-well energies.

Subsystems:

- ``potential``    admissible double wells and certified landmark constants
- ``radial``       compactly supported radial ground states at unit scale
- ``rearrange``    symmetric decreasing rearrangement on grids
- ``domain``       2-D masked grid domains with tabulated topology
- ``fieldsolver``  volume-constrained gradient flow and Newton polish
- ``multiplicity`` bump transplantation, barycenters and solution catalogs
- ``spectral``     constrained linearization spectra and index bookkeeping
- ``cli``          batch experiments with manifests, tables and figures
"""

__version__ = "0.1.0"
