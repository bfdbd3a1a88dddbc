"""Memoryless conditional edit transducers and their EM estimation.

A model is a (n+1) x (n+1) table c with c[a, b] the probability of emitting
output symbol b while consuming input symbol a (gap at index 0): c[0, b]
inserts b, c[a, 0] deletes a, c[0, 0] terminates. Two normalization
constraints make the table a conditional distribution over output strings
for every input string:

    for every a:  sum_b c[0, b] + sum_b c[a, b] + c[a, 0] = 1
    and           sum_b c[0, b] + c[0, 0] = 1,  with c[0, 0] > 0.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from editsim import _backend
from editsim.alphabet import Alphabet, Str, check_same_alphabet
from editsim.distances import load_matrix_csv, save_matrix_csv


class TransducerError(ValueError):
    pass


class DegeneratePairError(TransducerError):
    """A training pair has zero probability under the current parameters."""


@dataclass(frozen=True)
class Violation:
    constraint: str
    residual: float

    def __str__(self) -> str:
        return "%s (residual %.3g)" % (self.constraint, self.residual)


class MemorylessTransducer:
    """Single-state conditional edit model over an alphabet."""

    __slots__ = ("probs", "alphabet", "_log")

    def __init__(self, probs: np.ndarray, alphabet: Alphabet):
        probs = np.ascontiguousarray(probs, dtype=np.float64)
        m = alphabet.size + 1
        if probs.shape != (m, m):
            raise TransducerError(
                "probability table shape %r does not match alphabet size %d"
                % (probs.shape, alphabet.size)
            )
        self.probs = probs
        self.alphabet = alphabet
        self._log = None

    @property
    def log_probs(self) -> np.ndarray:
        if self._log is None:
            with np.errstate(divide="ignore"):
                self._log = np.log(self.probs)
        return self._log

    def validate(self, tol: float = 1e-9) -> list[Violation]:
        """Check positivity and both normalization constraints.

        Returns a list of violations (empty when the model is valid), each
        naming the constraint and its residual.
        """
        c = self.probs
        out: list[Violation] = []
        if (c < 0).any():
            out.append(Violation("all entries nonnegative", float(-c.min())))
        if c[0, 0] <= 0:
            out.append(Violation("termination probability positive", float(c[0, 0])))
        ins_total = c[0, 1:].sum()
        r = abs(ins_total + c[0, 0] - 1.0)
        if r > tol:
            out.append(Violation("insertion row sums to 1 with termination", float(r)))
        for a in range(1, c.shape[0]):
            r = abs(ins_total + c[a].sum() - 1.0)
            if r > tol:
                out.append(
                    Violation(
                        "row %r sums to 1 with insertions" % self.alphabet.symbol(a),
                        float(r),
                    )
                )
        return out

    @property
    def ok(self) -> bool:
        return not self.validate()

    def save_csv(self, path, metadata: dict | None = None) -> None:
        meta = {"alphabet": " ".join(self.alphabet.symbols)}
        meta.update(metadata or {})
        save_matrix_csv(path, self.probs, self.alphabet, meta)

    @classmethod
    def load_csv(cls, path) -> "MemorylessTransducer":
        values, alphabet, _ = load_matrix_csv(path)
        return cls(values, alphabet)


def uniform_init(alphabet: Alphabet) -> MemorylessTransducer:
    """Uniform valid starting point for EM.

    Termination and each insertion get mass 1/(n+1); for each input symbol
    the mass left by the insertions is split evenly over its substitutions
    and deletion, so both normalization constraints hold exactly.
    """
    n = alphabet.size
    if n < 1:
        raise TransducerError("cannot initialize a model over an empty alphabet")
    m = n + 1
    probs = np.empty((m, m))
    probs[0, :] = 1.0 / m
    probs[1:, :] = (1.0 - n / m) / m
    return MemorylessTransducer(probs, alphabet)


def _check_model_strings(model: MemorylessTransducer, *strings: Str) -> None:
    check_same_alphabet(*strings)
    if strings[0].alphabet != model.alphabet:
        raise TransducerError("strings are not encoded against the model alphabet")


def forward(model: MemorylessTransducer, x: Str, y: Str):
    """Log-domain prefix table and log p(y | x).

    Entry [i, j] of the table is the log summed probability, over every
    edit-operation sequence rewriting x[:i] as y[:j], of the operation
    probabilities; multiplying out of log domain by the termination
    probability at [len(x), len(y)] gives p(y | x). O(len(x)*len(y)).
    """
    _check_model_strings(model, x, y)
    table = _backend.forward_log(model.log_probs, x.codes, y.codes)
    logpe = model.log_probs[0, 0] + table[len(x), len(y)]
    return table, float(logpe)


def backward(model: MemorylessTransducer, x: Str, y: Str):
    """Log-domain suffix table and log p(y | x); agrees with forward."""
    _check_model_strings(model, x, y)
    table = _backend.backward_log(model.log_probs, x.codes, y.codes)
    logpe = model.log_probs[0, 0] + table[0, 0]
    return table, float(logpe)


def cond_prob(model: MemorylessTransducer, x: Str, y: Str) -> float:
    """p(y | x): the probability that editing x yields exactly y."""
    _, logpe = forward(model, x, y)
    return math.exp(logpe)


def dissimilarity(model: MemorylessTransducer, x: Str, y: Str) -> float:
    """-log p(y | x); +inf when the probability underflows to zero."""
    _, logpe = forward(model, x, y)
    return -logpe


@dataclass
class EmReport:
    """Fit diagnostics: one mean log-likelihood per iteration (the value of
    the parameters entering that iteration), nondecreasing up to tolerance."""

    iterations: int = 0
    loglik_trace: list[float] = field(default_factory=list)
    converged: bool = False

    def save_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("iteration,mean_loglik\n")
            for i, ll in enumerate(self.loglik_trace):
                fh.write("%d,%s\n" % (i, repr(ll)))


_CHUNK = 64  # fixed E-step chunk size; merge order is by chunk index, so
             # accumulation is bit-identical for any thread count


def _e_step(logc: np.ndarray, pairs, threads: int):
    m = logc.shape[0]

    def one_chunk(chunk):
        delta = np.zeros((m, m))
        logliks = np.empty(len(chunk))
        for idx, (x, y) in enumerate(chunk):
            logliks[idx] = _backend.em_pair_counts(logc, x.codes, y.codes, delta)
        return delta, logliks

    chunks = [pairs[i : i + _CHUNK] for i in range(0, len(pairs), _CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_chunk, chunks))
    else:
        results = [one_chunk(c) for c in chunks]
    delta = np.zeros((m, m))
    logliks = []
    for d, lls in results:
        delta += d
        logliks.append(lls)
    return delta, np.concatenate(logliks)


def _m_step(delta: np.ndarray) -> np.ndarray:
    m = delta.shape[0]
    total = delta.sum()
    ins = delta[0, 1:].sum()
    keep = (total - ins) / total
    probs = np.empty((m, m))
    probs[0, 1:] = delta[0, 1:] / total
    probs[0, 0] = keep
    row_totals = delta[1:, :].sum(axis=1)
    for a in range(1, m):
        if row_totals[a - 1] > 0:
            probs[a, :] = delta[a, :] / row_totals[a - 1] * keep
        else:
            # No evidence for this input symbol: spread its mass evenly.
            probs[a, :] = keep / m
    return probs


def fit_em(
    pairs,
    init: MemorylessTransducer,
    max_iter: int = 200,
    tol: float = 1e-6,
    smoothing: float = 1e-9,
    threads: int = 1,
):
    """Expectation-maximization fit of the edit probabilities.

    `pairs` is a nonempty sequence of (input Str, output Str) drawn from the
    same alphabet as `init`. Each E-step accumulates expected operation
    counts through the forward/backward tables; the M-step renormalizes
    them under the two model constraints. `smoothing` is added to every
    expected count before each M-step so no operation is ever locked at
    zero (pass 0 to disable). Stops when the mean log-likelihood improves
    by less than `tol` or after `max_iter` iterations.

    Returns (fitted model, EmReport).
    """
    pairs = list(pairs)
    if not pairs:
        raise TransducerError("EM needs at least one training pair")
    for x, y in pairs:
        _check_model_strings(init, x, y)
    violations = init.validate()
    if violations:
        raise TransducerError("invalid initial model: %s" % violations[0])

    model = init
    report = EmReport()
    for _ in range(max_iter):
        delta, logliks = _e_step(model.log_probs, pairs, threads)
        if np.isneginf(logliks).any():
            bad = int(np.isneginf(logliks).argmax())
            x, y = pairs[bad]
            raise DegeneratePairError(
                "pair (%r, %r) has zero probability under the current model"
                % (x.text(), y.text())
            )
        report.loglik_trace.append(float(logliks.mean()))
        if len(report.loglik_trace) > 1 and (
            report.loglik_trace[-1] - report.loglik_trace[-2] < tol
        ):
            report.converged = True
            break
        if smoothing:
            delta = delta + smoothing
        model = MemorylessTransducer(_m_step(delta), init.alphabet)
        report.iterations += 1
    return model, report
