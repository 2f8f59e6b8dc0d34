"""Quasi-periodic doubling renormalization laboratory."""

import os as _os

# Cap the BLAS/OpenMP pools before numpy is pulled in below; explicit
# per-library settings in the environment win over the blanket knob.
_threads = _os.environ.get("QPRENORM_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"

from .errors import (QPRenormError, DomainError, CompositionDomainError,
                     DegenerateScalingError, NoConvergenceError, SearchError,
                     InconsistencyError, MeshError, TruncationError,
                     NoSectionError, DegeneratePointError,
                     UnsupportedBaseError, PrecisionExhaustedError,
                     EscapeError, BasinError, ExistenceError,
                     FormulaMismatchError, ConsistencyError, DiophantineError,
                     ForcingParseError)
from .funcspace import (DomainConfig, AnalyticFn, QPFn, PairFn, compose_fiber,
                        project_p0, project_pik, shift_tgamma, sup_norm,
                        eval_qpfn, qpfn_to_json, qpfn_from_json)
from .renorm1d import (UnimodalMap, FixedPointData, FamilySpec, renormalize_1d,
                       in_domain_R, l1_matrix, l2_matrix, dr_matrix,
                       solve_fixed_point, feigenbaum_fixed_point, check_H0,
                       superstable_params, stable_manifold_param,
                       unstable_manifold_points)
from .qprenorm import (RotationNumber, SectionConfig, double_mod1,
                       require_diophantine, apply_T, apply_DT, LOmegaOperator,
                       build_L_omega, rotation_matrix, SpectrumReport,
                       spectrum_L_omega, gamma_normalize, apply_L_prime)
from .curvedyn import (InvariantCurve, DerivativeProduct, iterate_fiber,
                       solve_invariant_curve, fiber_product, G1, G1_hat,
                       DG1_hat, DG1, functional_K, functional_L,
                       ExtremumResult, extremum_m, extremum_M, ChainResult,
                       slope_chain, slope_formula, locate_reducibility_loss,
                       direct_slope, flm_family)
from .asymptotics import (QuotientSequence, EquivalenceFit,
                          fit_geometric_decay, slope_table, quotient_sequence,
                          mixed_quotient_sequence, Obs1Report, observation1,
                          renormalized_family, renorm_identity_gap,
                          Obs2Report, observation2, flm_eta_family,
                          component_chains, Obs3Report, observation3,
                          H3Report, check_H3, H4Report, check_H4,
                          H5Report, check_H5, QuotientFactorsReport,
                          quotient_factorization)
