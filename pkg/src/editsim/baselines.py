"""Reference (dis)similarities and the k-nearest-neighbor classifier."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

from editsim.alphabet import Str
from editsim.distances import CostMatrix, edit_distance, exp_edit_similarity, levenshtein
from editsim.transducer import MemorylessTransducer, forward


@dataclass(frozen=True)
class Measure:
    """A named pairwise score with an orientation.

    kind is "similarity" (greater = closer) or "dissimilarity" (smaller =
    closer); classifiers use the orientation to rank neighbors.
    """

    name: str
    func: Callable[[Str, Str], float]
    kind: str = "similarity"

    def __post_init__(self):
        if self.kind not in ("similarity", "dissimilarity"):
            raise ValueError("kind must be 'similarity' or 'dissimilarity'")


def sym_logprob_kernel(
    model: MemorylessTransducer, t: float, x: Str, y: Str
) -> float:
    """exp(t/2 * (log p(y|x) + log p(x|y))): the symmetrized exponential of
    the two conditional log-probabilities, i.e. (p(y|x) p(x|y))^(t/2)."""
    if t <= 0:
        raise ValueError("the exponent parameter t must be positive")
    _, l1 = forward(model, x, y)
    _, l2 = forward(model, y, x)
    if math.isinf(l1) or math.isinf(l2):
        warnings.warn("zero conditional probability: kernel value clamped to 0")
        return 0.0
    return math.exp(0.5 * t * (l1 + l2))


def zero_string_kernel(x0: Str, x: Str, y: Str) -> float:
    """Distance-substitution kernel anchored at a hand-picked zero string:
    (d(x,x0)^2 + d(x0,y)^2 - d(x,y)^2) / 2 with the unit-cost distance."""
    dx = levenshtein(x, x0)
    dy = levenshtein(x0, y)
    dxy = levenshtein(x, y)
    return 0.5 * (dx * dx + dy * dy - dxy * dxy)


def lev_measure() -> Measure:
    return Measure("lev", levenshtein, "dissimilarity")


def edit_distance_measure(costs: CostMatrix) -> Measure:
    return Measure("edit", lambda x, y: edit_distance(costs, x, y), "dissimilarity")


def neglogprob_measure(
    model: MemorylessTransducer, direction: str = "query-to-train"
) -> Measure:
    """-log p as a dissimilarity. The conditional runs from the first
    argument to the second ("query-to-train", the default) or the reverse.
    """
    if direction not in ("query-to-train", "train-to-query"):
        raise ValueError("unknown direction %r" % direction)

    def func(query: Str, item: Str) -> float:
        if direction == "query-to-train":
            _, logpe = forward(model, query, item)
        else:
            _, logpe = forward(model, item, query)
        return -logpe

    return Measure("neglogprob[%s]" % direction, func, "dissimilarity")


def sym_logprob_measure(model: MemorylessTransducer, t: float) -> Measure:
    return Measure(
        "symlogprob[t=%g]" % t,
        lambda x, y: sym_logprob_kernel(model, t, x, y),
        "similarity",
    )


def zero_string_measure(x0: Str) -> Measure:
    return Measure("zerostring", lambda x, y: zero_string_kernel(x0, x, y), "similarity")


def cost_similarity_measure(costs: CostMatrix) -> Measure:
    return Measure("costsim", lambda x, y: exp_edit_similarity(costs, x, y), "similarity")


def cached(measure: Measure) -> Measure:
    """Memoize a measure on (x, y); useful when classifiers revisit pairs."""
    store: dict = {}

    def func(x: Str, y: Str) -> float:
        key = (x, y)
        if key not in store:
            store[key] = measure.func(x, y)
        return store[key]

    return Measure(measure.name, func, measure.kind)


def knn_classify(measure: Measure, train, k: int, query: Str):
    """Majority label among the k nearest training items under the measure.

    Distance ties keep the earliest training index; label ties pick the
    smallest label in sorted order. Both rules are fixed so the prediction
    never depends on the training-set iteration order.
    """
    train = list(train)
    if not train:
        raise ValueError("the training set is empty")
    if not 1 <= k <= len(train):
        raise ValueError("k must be between 1 and the training size")
    sign = -1.0 if measure.kind == "similarity" else 1.0
    scored = sorted(
        (sign * measure.func(query, item), idx, label)
        for idx, (label, item) in enumerate(train)
    )
    votes: dict = {}
    for _, _, label in scored[:k]:
        votes[label] = votes.get(label, 0) + 1
    best = max(votes.values())
    return sorted(label for label, v in votes.items() if v == best)[0]
