"""Adaptive Fourier decompositions and Nystrom Karhunen-Loeve expansions of random signals.

Boundary functions are numpy vectors sampled on a :class:`Grid` of
``[0, 2pi]``; the unit circle is parameterised by ``z = exp(i t)``.
"""

from .basis import Decomposition, OrthonormalSystem
from .core import (afd_decompose, afd_select, build_system, convergence_budget, extend_system,
                   gs_extend, nbest_cyclic, poafd_decompose, poafd_select, reduced_remainder)
from .dictionary import Family, KernelDescriptor, kernel_eval, normalized_element, tm_system
from .kl import (KLBasis, apply_T, degree, hcj_norm, kl_basis, kl_decompose,
                 kl_optimality_check, kl_partial_sum, mercer_reconstruct, variance_identities)
from .numerics import Grid, InnerProductMode, inner_product, norm, rel_error, sym_eig, trapezoid_grid
from .processes import (BridgeSpec, bridge_covariance, brownian_bridge_cov, kl_bridge_reference,
                        simulate_bridge, simulate_bridges)
from .search import SearchConfig
from .stochastic import (CovarianceKernel, ParametricRandomField, SamplePathEnsemble,
                         analytic_covariance, analytic_ensemble, covariance_from_ensemble,
                         covariance_from_parametric, empirical_mean, project_paths,
                         safd_decompose, snb_optimize, spoafd_decompose, stochastic_objective)

__version__ = "0.1.0"
