"""Distributed testing against independence under variable-length coding."""
from .errors import (AbsoluteContinuityViolation, ConfigError, DegenerateChannels, DomainError,
                     InfeasibleTarget, MalformedMessage, NonConvergence, ResourceLimit, VldhtError)
from .info import (AuxChannel, EmpiricalType, JointSource, Pmf, binary_entropy,
                   binary_entropy_inv, dsbs, empirical_type, entropy, is_jointly_typical,
                   is_typical, kl_divergence, mutual_information, sample_iid, sample_joint, star,
                   typical_count_bounds)
from .montecarlo import Hypothesis, wilson_interval
from .solver import (Dmc, ExponentQuery, ExponentResult, binary_example_exponent, blahut_arimoto,
                     capacity, gaussian_example_exponent, solve_dmc_exponent, solve_fl_exponent,
                     solve_vl_exponent)

__version__ = "0.1.0"
