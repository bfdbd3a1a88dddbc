"""editsim: stochastic string edit models, exact marginal edit kernels, and
edit similarity learning with sparse linear classifiers."""

from editsim._backend import backend_name
from editsim.alphabet import GAP, Alphabet, AlphabetError, AlphabetMismatchError, Str
from editsim.automata import (
    ConditionalAutomaton,
    IntersectionAutomaton,
    conditional_automaton,
    intersect,
    remove_epsilon,
    string_mass,
)
from editsim.baselines import (
    Measure,
    knn_classify,
    sym_logprob_kernel,
    zero_string_kernel,
)
from editsim.costlearn import (
    CostFit,
    PairSet,
    build_pairs,
    fit_costs,
    margin_from_gap,
)
from editsim.distances import (
    CostMatrix,
    OpCounts,
    edit_distance,
    exp_edit_similarity,
    levenshtein,
    levenshtein_script,
    script_cost,
)
from editsim.goodness import (
    GoodnessCurve,
    MulticlassModel,
    ScoreNormalizer,
    SparseLinearModel,
    fit_multiclass,
    fit_sparse_classifier,
    goodness_curve,
    normalize_measure,
    predict_label,
    predict_margin,
    predict_multiclass,
)
from editsim.kernel import (
    GramMatrix,
    check_psd,
    export_precomputed,
    gram_matrix,
    kernel_approx,
    kernel_exact,
)
from editsim.transducer import (
    DegeneratePairError,
    EmReport,
    MemorylessTransducer,
    backward,
    cond_prob,
    dissimilarity,
    fit_em,
    forward,
    uniform_init,
)

__version__ = "0.1.0"
