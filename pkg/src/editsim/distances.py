"""Edit distances, deterministic edit scripts, and script-based similarities.

The cost-matrix layout is fixed throughout the package: row = input symbol,
column = output symbol, index 0 = the gap "$". Entry (a, 0) prices deleting
a, entry (0, b) prices inserting b, entry (a, b) prices substituting a
with b.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from editsim import _backend
from editsim.alphabet import Alphabet, Str, check_same_alphabet


class CostMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class CostMatrix:
    """Nonnegative (n+1) x (n+1) edit operation costs over an alphabet."""

    values: np.ndarray
    alphabet: Alphabet

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        m = self.alphabet.size + 1
        if v.shape != (m, m):
            raise CostMatrixError(
                "cost matrix shape %r does not match alphabet size %d"
                % (v.shape, self.alphabet.size)
            )
        if (v < 0).any():
            raise CostMatrixError("edit costs must be nonnegative")
        object.__setattr__(self, "values", v)

    @classmethod
    def unit(cls, alphabet: Alphabet) -> "CostMatrix":
        """Unit costs: 0 on the diagonal, 1 elsewhere."""
        m = alphabet.size + 1
        return cls(np.ones((m, m)) - np.eye(m), alphabet)

    @classmethod
    def zeros(cls, alphabet: Alphabet) -> "CostMatrix":
        m = alphabet.size + 1
        return cls(np.zeros((m, m)), alphabet)

    @property
    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.values, self.values.T))

    def save_csv(self, path, metadata: dict | None = None) -> None:
        save_matrix_csv(path, self.values, self.alphabet, metadata)

    @classmethod
    def load_csv(cls, path) -> "CostMatrix":
        values, alphabet, _ = load_matrix_csv(path)
        return cls(values, alphabet)


@dataclass(frozen=True)
class OpCounts:
    """Edit-operation counts of one script, same layout as CostMatrix."""

    values: np.ndarray
    alphabet: Alphabet

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.int64)
        m = self.alphabet.size + 1
        if v.shape != (m, m):
            raise CostMatrixError("count matrix shape does not match alphabet")
        if (v < 0).any() or v[0, 0] != 0:
            raise CostMatrixError("invalid operation counts")
        object.__setattr__(self, "values", v)

    @property
    def total(self) -> int:
        return int(self.values.sum())


def save_matrix_csv(path, values, alphabet, metadata: dict | None = None) -> None:
    """Write a square symbol-indexed matrix: comment metadata, a header row
    of symbols ("$" first), then one labeled row of values per input
    symbol."""
    with open(path, "w", newline="") as fh:
        for key, val in (metadata or {}).items():
            fh.write("# %s: %s\n" % (key, val))
        writer = csv.writer(fh)
        writer.writerow(("",) + alphabet.all_symbols)
        for sym, row in zip(alphabet.all_symbols, values):
            writer.writerow([sym] + [repr(float(x)) for x in row])


def load_matrix_csv(path):
    """Read a matrix written by save_matrix_csv.

    Returns (values, alphabet, metadata).
    """
    metadata: dict[str, str] = {}
    rows = []
    row_labels = []
    with open(path, newline="") as fh:
        header = None
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                metadata[key.strip()] = val.strip()
                continue
            for rec in csv.reader([line]):
                if header is None:
                    header = rec
                else:
                    row_labels.append(rec[0])
                    rows.append([float(x) for x in rec[1:]])
    if header is None or len(header) < 2 or header[0] != "" or header[1] != "$":
        raise CostMatrixError("matrix file %s lacks a '$'-first header row" % path)
    alphabet = Alphabet(header[2:])
    if row_labels != list(alphabet.all_symbols):
        raise CostMatrixError("matrix file %s has mislabeled rows" % path)
    values = np.array(rows, dtype=np.float64)
    m = alphabet.size + 1
    if values.shape != (m, m):
        raise CostMatrixError("matrix file %s has %r values for %d symbols"
                              % (path, values.shape, alphabet.size))
    return values, alphabet, metadata


def levenshtein(x: Str, y: Str) -> int:
    """Minimum number of edit operations turning x into y."""
    check_same_alphabet(x, y)
    return _backend.lev_distance(x.codes, y.codes)


def levenshtein_script(x: Str, y: Str) -> OpCounts:
    """Operation counts of the deterministic optimal unit-cost script.

    Identity substitutions are counted too (so a cost matrix can price
    matches); priced at unit cost with free matches, the script totals
    exactly levenshtein(x, y). When several optimal scripts exist, the
    backtrace resolves each tie in the fixed order substitution/match,
    deletion, insertion.
    """
    alphabet = check_same_alphabet(x, y)
    counts = _backend.lev_script_counts(x.codes, y.codes, alphabet.size + 1)
    return OpCounts(counts, alphabet)


def edit_distance(costs: CostMatrix, x: Str, y: Str) -> float:
    """Cost of the cheapest edit script turning x into y under `costs`."""
    check_same_alphabet(x, y)
    if costs.alphabet != x.alphabet:
        raise CostMatrixError("cost matrix alphabet does not match the strings")
    return _backend.weighted_distance(costs.values, x.codes, y.codes)


def script_cost(costs: CostMatrix, counts: OpCounts) -> float:
    """Price a fixed edit script: sum of costs(i, j) * counts(i, j).

    Linear in the costs, which is what makes the cost matrix directly
    learnable by a convex program.
    """
    if costs.alphabet != counts.alphabet:
        raise CostMatrixError("cost matrix and counts use different alphabets")
    return float(np.tensordot(costs.values, counts.values, axes=2))


def exp_edit_similarity(costs: CostMatrix, x: Str, y: Str) -> float:
    """Similarity 2*exp(-script_cost) - 1 in (-1, 1], over the fixed
    unit-cost script of (x, y)."""
    e = script_cost(costs, levenshtein_script(x, y))
    return 2.0 * math.exp(-e) - 1.0
