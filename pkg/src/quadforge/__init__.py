"""Positive interpolatory quadrature rules built by adding, swapping and removing nodes."""

from .caratheodory import RemovalOption, reduce_to_interpolatory, removal_options
from .exceptions import *  # noqa: F401,F403
from .extend1 import (
    add_node,
    addition_set,
    pairwise_corner,
    pairwise_corner_moments,
    removable_by,
    replace_with,
    replacement_region,
    replacement_regions,
    swap_node,
    weight_correction,
    zero_weight_node,
)
from .extendM import (
    ExtensionCandidate,
    NodalCandidatePolynomial,
    explore_additions,
    extension_rule,
    minimal_extension,
    multinode_weights,
    nullify_weights,
    patterson_extension,
    patterson_polynomial,
)
from .generators import (
    SequenceResult,
    clenshaw_curtis,
    default_init,
    gaussian,
    nested_sequence,
    partially_nested_sequence,
)
from .intervals import Interval, IntervalSet, sign_set
from .measures import Measure, beta, custom, load_moment_file, parse_measure, uniform
from .numerics import Polynomial, Root, poly_roots, solve_vandermonde, working_precision
from .rules import (
    QuadratureRule,
    apply,
    extension_deficit,
    load_rule,
    rule_from_document,
    rule_to_document,
    save_rule,
    sequence_from_document,
    sequence_to_document,
    verified_degree,
    weights_from_nodes,
)

__version__ = "0.1.0"
