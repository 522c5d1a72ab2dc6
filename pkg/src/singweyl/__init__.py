"""Numerical Weyl-Titchmarsh-Kodaira theory for perturbed Bessel operators.

    tau = -d^2/dx^2 + l(l+1)/x^2 + q(x)  on (0, b],  cos(beta) f(b) + sin(beta) f'(b) = 0.
"""

from .config import DEFAULT, Tolerances, load_tolerances
from .debranges import (HermiteBiehlerFunction, assoc_membership, build_E, gram_matrix, hb_check, kernel,
                        kernel_formula, kernel_integral, psd_margin, reproducing_check)
from .nentire import (EntireIndexReport, ExtensionPair, PsiJet, bessel_threshold, c_conditions, h_beta,
                      h_beta_prime, l2_classification, minimal_n_estimate, parseval_check, psi_jet,
                      verify_mf1, verify_mf2, verify_mf3)
from .ode import (SolutionJet, endpoint_solution, make_grid, regular_solution, second_solution, wronskian_at)
from .problem import (BUILTIN_PROBLEMS, BoundaryCondition, builtin_problem, PotentialSpec, ProblemDomainError, ProblemError, ProblemParseError,
                      SturmLiouvilleProblem, load_problem, problem_from_dict, validate_potential)
from .spectrum import (Spectrum, TailFit, eigenvalues, fit_tail, moment_test, norming_constants, trace_identity,
                       wprime_crosscheck)
from .weyl import (WeylFunction, WeylGauge, build_weyl, herglotz_gauge, integral_representation_check,
                   residue_check, stieltjes_recovery, weyl_eval)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT", "Tolerances", "load_tolerances",
    "BUILTIN_PROBLEMS", "builtin_problem", "BoundaryCondition", "PotentialSpec", "SturmLiouvilleProblem", "load_problem", "problem_from_dict",
    "validate_potential", "ProblemError", "ProblemParseError", "ProblemDomainError",
    "SolutionJet", "regular_solution", "second_solution", "endpoint_solution", "wronskian_at", "make_grid",
    "Spectrum", "TailFit", "eigenvalues", "norming_constants", "wprime_crosscheck", "fit_tail", "trace_identity",
    "moment_test",
    "WeylFunction", "WeylGauge", "build_weyl", "weyl_eval", "residue_check", "herglotz_gauge",
    "integral_representation_check", "stieltjes_recovery",
    "PsiJet", "psi_jet", "l2_classification", "verify_mf1", "verify_mf2", "verify_mf3", "parseval_check",
    "h_beta", "h_beta_prime", "ExtensionPair", "c_conditions", "bessel_threshold", "minimal_n_estimate",
    "EntireIndexReport",
    "HermiteBiehlerFunction", "build_E", "hb_check", "kernel", "kernel_formula", "kernel_integral",
    "reproducing_check", "assoc_membership", "gram_matrix", "psd_margin",
]
