"""Type-II error-exponent regions for one-observer, two-decision-center
hypothesis testing: numerical frontier solvers, Gaussian closed forms,
random-coding scheme simulators, and desk-scale brute-force oracles."""

from .probcore import (Alphabet, Channel, HypothesisPair, JointPmf,
                       alternative_hypothesis, conditional, entropy, extend,
                       is_typical, kl_divergence, marginalize,
                       mutual_information)
from .regions import (AuxiliaryWitness, FrontierPoint, LessNoisyVerdict,
                      RatePoint, RegionFrontier, SolverOptions,
                      evaluate_general_witness, evaluate_gw_witness,
                      evaluate_hb_witness, evaluate_noisy_witness,
                      general_frontier, gw_frontier, hb_frontier,
                      less_noisy_check, maximize_weighted_exponents,
                      noisy_frontier)
from .gaussian import (GwGaussianParams, HbGaussianParams, gw_gaussian_corner,
                       hb_gaussian_frontier, hb_gaussian_point)
from .oracle import (GridSpec, brute_force_frontier, exact_np_beta,
                     frontier_support_gap)

__version__ = "0.1.0"
