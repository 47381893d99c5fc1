"""Information divergences, contraction coefficients, reversible projections,
mixing times and hypothesis tests for finite Markov chains."""

__version__ = "0.1.0"

from .chain import (
    as_distribution,
    as_transition_matrix,
    classify,
    edge_measure,
    hypercube_walk,
    metropolis_chain,
    stationary_distribution,
)
from .divergence import alpha_div, f_div_chains, kl_div, named_div, renyi_div
from .errors import (
    CapacityError,
    ChainParseError,
    DimensionError,
    DomainError,
    MDKError,
    NumericalError,
    UnsupportedError,
)
from .ergodicity import dobrushin_time, dobrushin_tv, estimate_eta_f, estimate_eta_renyi
from .hypothesis import bayes_error_mc, chernoff_information, llr, sample_edges
from .mixing import MixingQuery, mixing_time
from .projection import alpha_project
from .spectral import spectrum_reversible
