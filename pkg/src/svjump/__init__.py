"""Option pricing under Heston, Bates and Bates-Hull-White dynamics.

Three pricing routes share one model description:

* :mod:`svjump.hybrid` - backward tree/finite-difference engine (European
  and American),
* :mod:`svjump.montecarlo` - hybrid Monte Carlo with Longstaff-Schwartz,
* :mod:`svjump.reference` - affine characteristic-function pricer and
  closed-form diagnostics.
"""

from .errors import (ArbError, CurveError, DegenerateError, DomainError, GridError,
                     ParamError, ReductionError, RegressionError, ScopeError,
                     ShapeError, SingularError, StyleError, SvJumpError, TolError)
from .model import (MarketModel, MertonJumpLaw, OptionContract, hull_white_flat_phi,
                    levy_density, mu_eff, mu_x, phi_from_curve, validate)
from .lattice import (FactorTree, JointTransition, build_cir_tree, build_ou_tree,
                      forward_expectation, joint_transition, local_moments,
                      sample_factor_paths, sample_joint_path)
from .fd import (LevyGrid, SpaceGrid, TriDiag, apply_B, assemble_A, boundary_vector,
                 build_levy_grid, build_space_grid, solve_tridiag)
from .hybrid import (HybridResult, NumericalConfig, PriceSurface, backward_step,
                     extract_exercise_boundary, interpolate_shift, price,
                     price_standard_bates)
from .montecarlo import (McConfig, McEstimate, price_american_ls, price_european_mc,
                         simulate_increment, simulate_paths)
from .reference import (EepCheck, RiccatiSolution, bates_cf, black_scholes_price,
                        carr_madan_price, convergence_ratio,
                        early_exercise_premium_check, implied_vol, riccati_solve,
                        vasicek_bond_factor)

__version__ = "0.1.0"
