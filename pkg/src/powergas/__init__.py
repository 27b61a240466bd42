"""Co-optimization and settlement of coupled electricity / natural-gas systems.

Library layout:

* ``powergas.system``      domain types and validation
* ``powergas.fileio``      JSON system/scenario files and the schema validator
* ``powergas.conic``       LP/SOCP interior-point solver and branch-and-bound
* ``powergas.formulation`` translation of the domain model into conic blocks
* ``powergas.pcc``         cone relaxation and penalty convex-concave loop
* ``powergas.benders``     commitment master / dispatch subproblem decomposition
* ``powergas.admm``        two-block decentralized subproblem solves
* ``powergas.scenarios``   forecast errors, transport-metric scenario reduction
* ``powergas.pricing``     nodal prices, expected locational marginal values,
                           settlement and revenue-adequacy certificates
* ``powergas.cli``         end-to-end command driver
"""

__version__ = "0.1.0"
