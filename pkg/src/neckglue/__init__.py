"""Gluing of Dirac-type operators over long cylindrical necks.

Modules
-------
subspaces   subspace gaps, projections and principal angles
boundary    cross-section data, spectral splitting and lagrangian checks
necks       neck perturbations, cut-offs and the scalar ODE estimates
ends        ends with caps, extended-L² kernels and trace spaces
glue        the glued operator on a finite neck and the gluing map
eigen       small eigenvalues, eigenvectors and the box-scheme oracle
analysis    threshold schedules, sweeps and dimension ledgers
cli         JSON configs in, CSV and JSON reports out

Support modules: ``propagation`` (transfer matrices and frame tracking),
``models`` (regression and random data) and ``acceptance`` (the checks run
by ``neckglue check``).
"""
from __future__ import annotations

__version__ = "0.1.0"
