"""Fourier-sampling tools for finite Abelian groups: exact transforms, coset
bucketing, query-counted estimators, the implicit sieve, and tolerant
isomorphism testing up to group automorphisms."""

from .automorphisms import (
    Automorphism,
    apply,
    compose,
    dual_double,
    enumerate_automorphisms,
    exact_automorphism_distance,
    invert,
    permute_coefficients,
)
from .cosets import (
    Coset,
    CosetStructure,
    annihilator,
    is_pseudo_independent,
    minimal_spanning_set,
    prefix_coset,
    random_coset_structure,
    subgroup_members,
)
from .errors import (
    AbelisoError,
    ConfigError,
    GroupTooLarge,
    Indeterminate,
    InvalidGroup,
    NotASubgroup,
    PartitionError,
    SearchCapExceeded,
    ShapeError,
)
from .estimators import (
    EstimatorConfig,
    QueryOracle,
    estimate_coefficient,
    estimate_projection,
    estimate_wt2,
    estimate_wt4,
    sample_count,
)
from .fourier import (
    BooleanFunction,
    FourierTable,
    dft,
    exact_bucket_weights,
    exact_projection,
    hamming_distance,
    idft,
    sparsity,
    spectral_norm,
)
from .group import GroupSpec, RootOfUnity, build_group, character_eval, parse_group, pseudo_inner
from .sieve import (
    GLConfig,
    SieveConfig,
    SieveOutput,
    gl_prefix_search,
    implicit_sieve,
    round_to_root,
    sparse_implicit_sieve,
)
from .tester import (
    Decision,
    SparseSurrogate,
    TesterConfig,
    Verdict,
    correlation_sweep,
    reconstruct_surrogate,
    test_isomorphism,
    test_isomorphism_sparse,
)

__version__ = "0.1.0"
