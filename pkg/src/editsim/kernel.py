"""Marginal edit kernel: exact computation, finite approximation, Gram export.

The kernel value of a pair (x, x') is the sum, over every output string s,
of p(s | x) * p(s | x'). The infinite sum collapses to component (0, 0) of
(I - M)^{-1} rho on the product automaton, where M sums the per-symbol
transition matrices; M is upper triangular with diagonal below one, so a
back-substitution solve suffices. Cost O(len(x)^2 * len(x')^2 * |alphabet|)
per pair. The kernel is positive semi-definite: it is the inner product of
the (infinite) output-probability profiles of the two strings.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from editsim import _backend
from editsim.alphabet import Alphabet, Str, check_same_alphabet
from editsim.automata import conditional_automaton, remove_epsilon
from editsim.transducer import MemorylessTransducer, cond_prob


class KernelError(ValueError):
    pass


class ModelDegeneracyError(KernelError):
    """The product automaton had a nonpositive pivot: the model violates its
    normalization constraints (some state keeps no escape mass)."""


def _eliminated(model: MemorylessTransducer, x: Str):
    a = remove_epsilon(conditional_automaton(model, x))
    return np.ascontiguousarray(a.weights), np.ascontiguousarray(a.rho)


def kernel_exact(model: MemorylessTransducer, x: Str, y: Str) -> float:
    """Exact marginal kernel value for one pair of strings."""
    w1, r1 = _eliminated(model, x)
    w2, r2 = _eliminated(model, y)
    value = _backend.solve_kernel(w1, r1, w2, r2)
    if math.isnan(value):
        raise ModelDegeneracyError(
            "nonpositive pivot while solving for pair (%r, %r); "
            "check the model normalization" % (x.text(), y.text())
        )
    return value


def kernel_approx(
    model: MemorylessTransducer, x: Str, y: Str, landmarks
) -> float:
    """Finite approximation: the kernel sum restricted to the given output
    strings. Never exceeds the exact value and grows with the landmark set."""
    landmarks = list(landmarks)
    if not landmarks:
        raise KernelError("the landmark set must be nonempty")
    total = 0.0
    for s in landmarks:
        total += cond_prob(model, x, s) * cond_prob(model, y, s)
    return total


@dataclass
class GramMatrix:
    """Symmetric kernel matrix over a list of strings, with provenance."""

    values: np.ndarray
    strings: list[Str]
    mode: str  # "exact", "approx", or "baseline"
    detail: str = ""  # landmark count for approx, measure name for baseline
    normalized: bool = False

    @property
    def n(self) -> int:
        return len(self.strings)


def _pair_worker(args):
    fn, i, j = args
    return i, j, fn(i, j)


def gram_matrix(
    model: MemorylessTransducer,
    xs,
    mode: str = "exact",
    landmarks=None,
    normalize: bool = False,
    threads: int = 1,
) -> GramMatrix:
    """Kernel matrix over `xs`, exact or landmark-approximated.

    Fills the upper triangle (in parallel when threads > 1; cells are
    independent, so the result does not depend on scheduling) and mirrors
    it. With normalize=True, entries become K(x,y)/sqrt(K(x,x)K(y,y)) and
    rows with a zero diagonal are mapped to zero.
    """
    xs = list(xs)
    if not xs:
        raise KernelError("need at least one string")
    check_same_alphabet(*xs)
    if mode == "exact":
        autos = [_eliminated(model, x) for x in xs]

        def cell(i: int, j: int) -> float:
            w1, r1 = autos[i]
            w2, r2 = autos[j]
            return _backend.solve_kernel(w1, r1, w2, r2)

        detail = ""
    elif mode == "approx":
        if not landmarks:
            raise KernelError("approx mode needs a nonempty landmark set")
        landmarks = list(landmarks)

        def cell(i: int, j: int) -> float:
            return kernel_approx(model, xs[i], xs[j], landmarks)

        detail = str(len(landmarks))
    else:
        raise KernelError("unknown gram mode %r" % mode)

    n = len(xs)
    values = np.zeros((n, n))
    jobs = [(i, j) for i in range(n) for j in range(i, n)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = pool.map(_pair_worker, [(cell, i, j) for i, j in jobs])
            for i, j, v in results:
                values[i, j] = v
    else:
        for i, j in jobs:
            values[i, j] = cell(i, j)
    if np.isnan(values).any():
        i, j = map(int, np.argwhere(np.isnan(np.triu(values)))[0])
        raise ModelDegeneracyError(
            "kernel failed for pair (%r, %r)" % (xs[i].text(), xs[j].text())
        )
    values = values + np.triu(values, 1).T
    if normalize:
        d = np.sqrt(np.diagonal(values).copy())
        with np.errstate(divide="ignore", invalid="ignore"):
            values = values / np.outer(d, d)
        values[~np.isfinite(values)] = 0.0
    return GramMatrix(values, xs, mode, detail, normalize)


def baseline_gram(measure, xs, normalize: bool = False) -> GramMatrix:
    """Gram matrix of an arbitrary symmetric measure, tagged as a baseline."""
    xs = list(xs)
    n = len(xs)
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            values[i, j] = measure.func(xs[i], xs[j])
    values = values + np.triu(values, 1).T
    g = GramMatrix(values, xs, "baseline", measure.name, False)
    if normalize:
        d = np.sqrt(np.abs(np.diagonal(values)))
        with np.errstate(divide="ignore", invalid="ignore"):
            values = values / np.outer(d, d)
        values[~np.isfinite(values)] = 0.0
        g = GramMatrix(values, xs, "baseline", measure.name, True)
    return g


@dataclass
class PsdReport:
    lambda_min: float
    trace: float
    tol: float
    ok: bool


def check_psd(gram: GramMatrix, tol: float = 1e-8) -> PsdReport:
    """Estimate the smallest eigenvalue and compare it to -tol * trace."""
    v = gram.values
    if not np.allclose(v, v.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(v).max())):
        raise KernelError("matrix is not symmetric")
    lam = float(np.linalg.eigvalsh((v + v.T) / 2.0)[0])
    tr = float(np.trace(v))
    return PsdReport(lam, tr, tol, lam >= -tol * tr)


def export_precomputed(gram: GramMatrix, labels, path) -> None:
    """SVM precomputed-kernel text format: per row, the label, the 1-based
    row index as feature 0, then one feature per column."""
    labels = list(labels)
    if len(labels) != gram.n:
        raise KernelError("label count does not match the matrix size")
    with open(path, "w") as fh:
        for i, label in enumerate(labels):
            parts = ["%s 0:%d" % (label, i + 1)]
            parts.extend(
                "%d:%s" % (j + 1, repr(float(gram.values[i, j])))
                for j in range(gram.n)
            )
            fh.write(" ".join(parts) + "\n")


def save_gram_csv(gram: GramMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# mode: %s\n" % gram.mode)
        fh.write("# detail: %s\n" % gram.detail)
        fh.write("# normalized: %d\n" % int(gram.normalized))
        fh.write("# alphabet: %s\n" % " ".join(gram.strings[0].alphabet.symbols))
        fh.write("# strings: %s\n" % "\t".join(s.text() for s in gram.strings))
        writer = csv.writer(fh)
        writer.writerow(["s%d" % i for i in range(gram.n)])
        for row in gram.values:
            writer.writerow([repr(float(x)) for x in row])


def load_gram_csv(path) -> GramMatrix:
    meta: dict[str, str] = {}
    rows = []
    with open(path, newline="") as fh:
        header = None
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                meta[key.strip()] = val.strip()
                continue
            for rec in csv.reader([line]):
                if header is None:
                    header = rec
                else:
                    rows.append([float(x) for x in rec])
    alphabet = Alphabet(meta.get("alphabet", "").split())
    strings = [
        alphabet.encode(text) for text in meta.get("strings", "").split("\t")
    ] if meta.get("strings", "") else [alphabet.encode("")] * len(rows)
    return GramMatrix(
        np.array(rows),
        strings,
        meta.get("mode", "exact"),
        meta.get("detail", ""),
        bool(int(meta.get("normalized", "0"))),
    )
