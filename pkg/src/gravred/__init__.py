"""Simulation engine for gravity-induced quantum state reduction.

The package covers the full chain from gravitational coupling energies
between superposed mass configurations, through the non-relativistic
stochastic jump process, to the relativistic wave formulation with
classical scenarios, bundling, amplitude fields and reduction waves,
plus the correlated-reduction extension and its signaling constraint.

Submodules (imported on demand; the kernel backends JIT-compile on
first use): massmodel, dpcore, relfield, redwave, corrsig, scenario_io,
cli, kernels.
"""

__version__ = "0.1.0"
