"""wharm: weighted harmonic analysis on boxes and half-spaces, at desk scale.

Submodules: grid (cell-centered grids and reflections), dyadic (lattices and
the Haar system), weights (Muckenhoupt classes), kernels (closed forms),
operators (semigroups, Riesz transforms, commutators, norms), squarefn
(area functions and Hardy norms), bmo (BMO-type norms), sparse (stopping
times and sparse operators), atoms (atomic decomposition), harness
(experiments), cli (command line).
"""

__version__ = "0.1.0"
