"""freesb: symbolic and numeric tools for the large-N Segal-Bargmann
transform on the unitary groups U(N).

Trace-polynomial calculus, the intertwining operators D and D_N, the
free unitary Segal-Bargmann transform G_{s,t} and its inverse, Biane
polynomial recursions, an exact word-polynomial engine for finite-N
heat-kernel expectations, and a random-matrix Monte Carlo lab.
"""

__version__ = "0.1.0"

from .tracepoly import TracePoly, format_poly, parse
from .operators import GeneratorSpec, apply_D, apply_DN, exp_apply, operator_matrix
from .moments import b_poly, c_poly, catalan, nu, pi_eval, varrho
from .transform import G, H, Pi_series, biane, pde_residual, verify_gen_fn
from .words import Measure, WordPoly, canonicalize, expectation, iota, iota_star, l2_norm_sq, sesq_B
from .matrixlab import (SamplerCfg, basis_uN, concentration_experiment, evaluate,
                        evaluate_word, expm, laplacian_eval, mc_expectation,
                        sample_mu, sample_rho, verify_magic, zero_test)

__all__ = [
    "TracePoly", "format_poly", "parse",
    "GeneratorSpec", "apply_D", "apply_DN", "exp_apply", "operator_matrix",
    "b_poly", "c_poly", "catalan", "nu", "pi_eval", "varrho",
    "G", "H", "Pi_series", "biane", "pde_residual", "verify_gen_fn",
    "Measure", "WordPoly", "canonicalize", "expectation", "iota", "iota_star",
    "l2_norm_sq", "sesq_B",
    "SamplerCfg", "basis_uN", "concentration_experiment", "evaluate",
    "evaluate_word", "expm", "laplacian_eval", "mc_expectation",
    "sample_mu", "sample_rho", "verify_magic", "zero_test",
    "__version__",
]
