"""Pure-Python/numpy implementations of the hot numeric kernels.

This module mirrors the interface of the compiled extension
``editsim._ckernels``; ``editsim._backend`` picks one of the two at import
time. Inputs are raw arrays: strings as int32 code vectors (values 1..n,
0 is the gap) and probability/cost tables as float64 matrices indexed
[input, output] with the gap at index 0.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

BACKEND_NAME = "python"

_NEG_INF = float("-inf")


def lev_distance(a: np.ndarray, b: np.ndarray) -> int:
    """Minimum number of insertions/deletions/substitutions turning a into b."""
    la, lb = len(a), len(b)
    prev = list(range(lb + 1))
    cur = [0] * (lb + 1)
    for i in range(1, la + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, lb + 1):
            sub = prev[j - 1] + (0 if ai == b[j - 1] else 1)
            dele = prev[j] + 1
            ins = cur[j - 1] + 1
            cur[j] = min(sub, dele, ins)
        prev, cur = cur, prev
    return prev[lb]


def lev_script_counts(a: np.ndarray, b: np.ndarray, m: int) -> np.ndarray:
    """Operation counts of one optimal unit-cost script turning a into b.

    Returns an (m, m) matrix with counts[i, j] = uses of the operation that
    rewrites symbol i as symbol j (0 = gap: row 0 insertions, column 0
    deletions, diagonal identity substitutions). The backtrace breaks ties
    in the fixed order substitution/match, then deletion, then insertion,
    so the script is deterministic.
    """
    la, lb = len(a), len(b)
    d = np.zeros((la + 1, lb + 1), dtype=np.int64)
    d[:, 0] = np.arange(la + 1)
    d[0, :] = np.arange(lb + 1)
    for i in range(1, la + 1):
        ai = a[i - 1]
        for j in range(1, lb + 1):
            sub = d[i - 1, j - 1] + (0 if ai == b[j - 1] else 1)
            dele = d[i - 1, j] + 1
            ins = d[i, j - 1] + 1
            d[i, j] = min(sub, dele, ins)
    counts = np.zeros((m, m), dtype=np.int64)
    i, j = la, lb
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + (
            0 if a[i - 1] == b[j - 1] else 1
        ):
            counts[a[i - 1], b[j - 1]] += 1
            i -= 1
            j -= 1
        elif i > 0 and d[i, j] == d[i - 1, j] + 1:
            counts[a[i - 1], 0] += 1
            i -= 1
        else:
            counts[0, b[j - 1]] += 1
            j -= 1
    return counts


def weighted_distance(costs: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Cost of the cheapest edit script under an arbitrary cost matrix."""
    la, lb = len(a), len(b)
    prev = np.empty(lb + 1)
    cur = np.empty(lb + 1)
    prev[0] = 0.0
    for j in range(1, lb + 1):
        prev[j] = prev[j - 1] + costs[0, b[j - 1]]
    for i in range(1, la + 1):
        ai = a[i - 1]
        cur[0] = prev[0] + costs[ai, 0]
        for j in range(1, lb + 1):
            cur[j] = min(
                prev[j - 1] + costs[ai, b[j - 1]],
                prev[j] + costs[ai, 0],
                cur[j - 1] + costs[0, b[j - 1]],
            )
        prev, cur = cur, prev
    return float(prev[lb])


def _logadd(x: float, y: float) -> float:
    if x == _NEG_INF:
        return y
    if y == _NEG_INF:
        return x
    if x < y:
        x, y = y, x
    return x + math.log1p(math.exp(y - x))


def forward_log(logc: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Log-domain prefix table F with F[i, j] = log alpha(b[:j] | a[:i]).

    F[i, j] sums, over all edit-operation sequences rewriting the length-i
    prefix of a as the length-j prefix of b, the product of the operation
    probabilities (termination excluded).
    """
    la, lb = len(a), len(b)
    F = np.full((la + 1, lb + 1), _NEG_INF)
    F[0, 0] = 0.0
    for i in range(la + 1):
        row = F[i]
        prev_row = F[i - 1] if i > 0 else None
        for j in range(lb + 1):
            if i == 0 and j == 0:
                continue
            acc = _NEG_INF
            if i > 0 and j > 0:
                acc = logc[a[i - 1], b[j - 1]] + prev_row[j - 1]
            if i > 0:
                acc = _logadd(acc, logc[a[i - 1], 0] + prev_row[j])
            if j > 0:
                acc = _logadd(acc, logc[0, b[j - 1]] + row[j - 1])
            row[j] = acc
    return F


def backward_log(logc: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Log-domain suffix table B with B[i, j] = log beta(b[j:] | a[i:])."""
    la, lb = len(a), len(b)
    B = np.full((la + 1, lb + 1), _NEG_INF)
    B[la, lb] = 0.0
    for i in range(la, -1, -1):
        row = B[i]
        next_row = B[i + 1] if i < la else None
        for j in range(lb, -1, -1):
            if i == la and j == lb:
                continue
            acc = _NEG_INF
            if i < la and j < lb:
                acc = logc[a[i], b[j]] + next_row[j + 1]
            if i < la:
                acc = _logadd(acc, logc[a[i], 0] + next_row[j])
            if j < lb:
                acc = _logadd(acc, logc[0, b[j]] + row[j + 1])
            row[j] = acc
    return B


def em_pair_counts(
    logc: np.ndarray, a: np.ndarray, b: np.ndarray, delta: np.ndarray
) -> float:
    """Accumulate one pair's expected operation counts into delta.

    Returns log p(b | a); if that is -inf the pair is unreachable and delta
    is left untouched.
    """
    la, lb = len(a), len(b)
    F = forward_log(logc, a, b)
    B = backward_log(logc, a, b)
    logpe = logc[0, 0] + F[la, lb]
    if logpe == _NEG_INF:
        return logpe
    k = logc[0, 0] - logpe
    with np.errstate(invalid="ignore"):
        if la and lb:
            post = np.exp(
                F[:-1, :-1] + logc[a[:, None], b[None, :]] + B[1:, 1:] + k
            )
            np.add.at(delta, (a[:, None], b[None, :]), post)
        if la:
            post = np.exp(F[:-1, :] + logc[a, 0][:, None] + B[1:, :] + k)
            np.add.at(delta[:, 0], a, post.sum(axis=1))
        if lb:
            post = np.exp(F[:, :-1] + logc[0, b][None, :] + B[:, 1:] + k)
            np.add.at(delta[0, :], b, post.sum(axis=0))
    delta[0, 0] += 1.0
    return float(logpe)


def solve_kernel(
    W1: np.ndarray, rho1: np.ndarray, W2: np.ndarray, rho2: np.ndarray
) -> float:
    """Total mass generated jointly by two epsilon-free conditional automata.

    Builds the product automaton's summed transition matrix M (upper
    triangular under the lexicographic state order) and returns component
    (0, 0) of (I - M)^{-1} rho via a triangular solve, i.e. the sum over
    every output string of the product of the two generation masses.
    """
    n1, n2 = W1.shape[1], W2.shape[1]
    n = n1 * n2
    M = np.einsum("bik,bjl->ijkl", W1, W2).reshape(n, n)
    diag = 1.0 - np.diagonal(M)
    if diag.min() <= 0.0:
        return float("nan")
    rho = np.outer(rho1, rho2).reshape(n)
    A = -M
    np.fill_diagonal(A, diag)
    v = scipy.linalg.solve_triangular(A, rho, lower=False)
    return float(v[0])
