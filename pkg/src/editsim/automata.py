"""Weighted automata realizing the output distribution of an edit model.

Conditioning a memoryless transducer on an input string x yields an
automaton over the output alphabet whose states are the prefix lengths
0..len(x): each state carries an insertion self-loop per symbol, an arc to
the next state per substitution, and an empty-output (epsilon) arc to the
next state for the deletion. Removing the epsilon arcs gives an equivalent
automaton whose per-symbol transition matrices are upper triangular, and
intersecting two such automata multiplies their weights symbol by symbol,
so the mass the product assigns to a string s is p(s | x) * p(s | x').
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from editsim.alphabet import Alphabet, AlphabetMismatchError, Str
from editsim.transducer import MemorylessTransducer, _check_model_strings


class AutomatonError(ValueError):
    pass


@dataclass(frozen=True)
class ConditionalAutomaton:
    """Automaton generating the outputs of an edit model driven by one string.

    weights[b-1, i, j] is the arc i -> j emitting symbol b; eps[i, j] is the
    empty-output arc (deletions), zero everywhere once epsilon-free. State 0
    is initial with weight 1; rho holds the final weights.
    """

    alphabet: Alphabet
    source: Str
    weights: np.ndarray
    eps: np.ndarray
    rho: np.ndarray

    @property
    def n_states(self) -> int:
        return int(self.rho.shape[0])

    @property
    def epsilon_free(self) -> bool:
        return not self.eps.any()


@dataclass(frozen=True)
class IntersectionAutomaton:
    """Product of two epsilon-free conditional automata.

    States are the pairs (i, j) in lexicographic order, so index r = i*n2+j;
    matrices[b-1] is the per-symbol transition matrix, upper triangular by
    construction (arcs never move backward in either factor). The initial
    state is (0, 0) with weight 1.
    """

    alphabet: Alphabet
    shape: tuple[int, int]
    matrices: np.ndarray
    rho: np.ndarray

    @property
    def n_states(self) -> int:
        return int(self.rho.shape[0])

    @property
    def states(self) -> list[tuple[int, int]]:
        n1, n2 = self.shape
        return [(i, j) for i in range(n1) for j in range(n2)]

    @property
    def transition_sum(self) -> np.ndarray:
        """M, the sum of the per-symbol transition matrices."""
        return self.matrices.sum(axis=0)


def conditional_automaton(
    model: MemorylessTransducer, x: Str
) -> ConditionalAutomaton:
    """Build the automaton for the outputs of `model` on input `x`.

    State i (the length-i prefix consumed) has an insertion self-loop per
    symbol b with weight c[0, b], a consume arc i -> i+1 per symbol with the
    substitution weight c[x[i], b], and an epsilon arc i -> i+1 with the
    deletion weight c[x[i], 0]. Only the last state is final, with the
    termination weight.
    """
    _check_model_strings(model, x, x)
    c = model.probs
    s = model.alphabet.size
    n = len(x) + 1
    weights = np.zeros((s, n, n))
    eps = np.zeros((n, n))
    for i in range(n):
        weights[:, i, i] = c[0, 1:]
    for i, code in enumerate(x.codes):
        weights[:, i, i + 1] = c[code, 1:]
        eps[i, i + 1] = c[code, 0]
    rho = np.zeros(n)
    rho[n - 1] = c[0, 0]
    return ConditionalAutomaton(model.alphabet, x, weights, eps, rho)


def remove_epsilon(a: ConditionalAutomaton) -> ConditionalAutomaton:
    """Equivalent automaton without empty-output arcs.

    The epsilon arcs form the chain i -> i+1, so the closure from i to j is
    the product of the deletion weights along the way. Each new arc i -> j
    on b sums the closure into j followed by the insertion self-loop at j
    with the closure into j-1 followed by the consume arc into j; the new
    final weight of i is the closure to the last state times the old final
    weight. Per-string generation mass is preserved exactly.
    """
    if a.epsilon_free:
        return ConditionalAutomaton(
            a.alphabet, a.source, a.weights.copy(), np.zeros_like(a.eps), a.rho.copy()
        )
    n = a.n_states
    if np.any(a.eps != np.diagflat(np.diagonal(a.eps, offset=1), 1)):
        raise AutomatonError("epsilon arcs must form the forward chain i -> i+1")
    closure = np.zeros((n, n))
    for i in range(n):
        closure[i, i] = 1.0
        for j in range(i + 1, n):
            closure[i, j] = closure[i, j - 1] * a.eps[j - 1, j]
    weights = np.zeros_like(a.weights)
    for b in range(a.weights.shape[0]):
        loops = np.diagonal(a.weights[b])
        weights[b] = closure * loops[None, :]
        consume = np.diagonal(a.weights[b], offset=1)
        weights[b, :, 1:] += closure[:, :-1] * consume[None, :]
        weights[b] = np.triu(weights[b])
    rho = closure[:, n - 1] * a.rho[n - 1]
    return ConditionalAutomaton(a.alphabet, a.source, weights, np.zeros((n, n)), rho)


def intersect(
    a1: ConditionalAutomaton, a2: ConditionalAutomaton
) -> IntersectionAutomaton:
    """Product automaton whose weight on each string is the product of the
    factors' weights: per-symbol weights, initial and final weights all
    multiply pointwise."""
    if a1.alphabet != a2.alphabet:
        raise AlphabetMismatchError("cannot intersect automata over different alphabets")
    if not (a1.epsilon_free and a2.epsilon_free):
        raise AutomatonError("intersection requires epsilon-free automata")
    s = a1.weights.shape[0]
    n = a1.n_states * a2.n_states
    matrices = np.empty((s, n, n))
    for b in range(s):
        matrices[b] = np.kron(a1.weights[b], a2.weights[b])
        if np.tril(matrices[b], -1).any():
            raise AutomatonError("product transition matrix is not upper triangular")
    rho = np.kron(a1.rho, a2.rho)
    return IntersectionAutomaton(
        a1.alphabet, (a1.n_states, a2.n_states), matrices, rho
    )


def string_mass(a: IntersectionAutomaton | ConditionalAutomaton, s: Str) -> float:
    """Summed weight of the accepting paths labeled s: tau' M_s1 ... M_st rho."""
    if isinstance(a, ConditionalAutomaton):
        if not a.epsilon_free:
            raise AutomatonError("string_mass needs an epsilon-free automaton")
        mats = a.weights
    else:
        mats = a.matrices
    if s.alphabet != a.alphabet:
        raise AlphabetMismatchError("string is not over the automaton alphabet")
    v = a.rho.copy()
    for code in s.codes[::-1]:
        v = mats[code - 1] @ v
    return float(v[0])


def arc_lines(a: IntersectionAutomaton | ConditionalAutomaton) -> list[str]:
    """Text arc-list form: one line per arc (from, to, symbol, weight), then
    initial/final weight lines. Used for debugging and the test harness."""
    lines = ["initial 0 1.0"]
    if isinstance(a, ConditionalAutomaton):
        mats = a.weights
        eps = a.eps
    else:
        mats = a.matrices
        eps = None
    n = mats.shape[1]
    for b in range(mats.shape[0]):
        sym = a.alphabet.symbol(b + 1)
        for i in range(n):
            for j in range(n):
                if mats[b, i, j]:
                    lines.append(
                        "arc %d %d %s %s" % (i, j, sym, repr(float(mats[b, i, j])))
                    )
    if eps is not None:
        for i in range(n):
            for j in range(n):
                if eps[i, j]:
                    lines.append("eps %d %d %s" % (i, j, repr(float(eps[i, j]))))
    for i in range(n):
        if a.rho[i]:
            lines.append("final %d %s" % (i, repr(float(a.rho[i]))))
    return lines


def save_arcs(a, path) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(arc_lines(a)) + "\n")
