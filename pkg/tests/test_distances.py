import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from editsim.alphabet import Alphabet, AlphabetError, AlphabetMismatchError
from editsim.distances import (
    CostMatrix,
    CostMatrixError,
    OpCounts,
    edit_distance,
    exp_edit_similarity,
    levenshtein,
    levenshtein_script,
    script_cost,
)
from oracles import enum_optimal_scripts

strings_ab = st.text(alphabet="ab", max_size=8)


def enc(ab, text):
    return ab.encode_chars(text)


class TestAlphabet:
    def test_first_appearance_order(self):
        ab = Alphabet.from_tokens([["b", "a"], ["c", "a"]])
        assert ab.symbols == ("b", "a", "c")
        assert ab.all_symbols == ("$", "b", "a", "c")

    def test_index_bijection(self, ab3):
        for i, s in enumerate(ab3.symbols, start=1):
            assert ab3.index(s) == i
            assert ab3.symbol(i) == s

    def test_rejects_duplicates_and_gap(self):
        with pytest.raises(AlphabetError):
            Alphabet(("a", "a"))
        with pytest.raises(AlphabetError):
            Alphabet(("a", "$"))

    def test_encode_round_trip(self, ab2):
        s = ab2.encode("a b b a")
        assert s.tokens == ("a", "b", "b", "a")
        assert s.text() == "a b b a"

    def test_unknown_symbol(self, ab2):
        with pytest.raises(AlphabetError):
            ab2.encode("a z")


class TestLevenshtein:
    def test_worked_example(self, ab2):
        assert levenshtein(enc(ab2, "abb"), enc(ab2, "aa")) == 2

    def test_empty_cases(self, ab3):
        assert levenshtein(enc(ab3, ""), enc(ab3, "")) == 0
        assert levenshtein(enc(ab3, "abc"), enc(ab3, "")) == 3

    def test_alphabet_mismatch(self, ab2, ab3):
        with pytest.raises(AlphabetMismatchError):
            levenshtein(ab2.encode("a"), ab3.encode("a"))

    @settings(max_examples=200, deadline=None)
    @given(strings_ab, strings_ab, strings_ab)
    def test_metric(self, s, t, u):
        ab = Alphabet(("a", "b"))
        x, y, z = enc(ab, s), enc(ab, t), enc(ab, u)
        dxy = levenshtein(x, y)
        assert dxy >= 0
        assert (dxy == 0) == (s == t)
        assert dxy == levenshtein(y, x)
        assert dxy <= levenshtein(x, z) + levenshtein(z, y)


class TestScript:
    def test_worked_example_and_tiebreak(self, ab2):
        x, y = enc(ab2, "abb"), enc(ab2, "aa")
        counts = levenshtein_script(x, y).values
        expected = np.zeros((3, 3), dtype=np.int64)
        expected[2, 1] = 1  # substitute b -> a
        expected[2, 0] = 1  # delete b
        expected[1, 1] = 1  # keep a
        assert (counts == expected).all()
        # the chosen script is one of the optimal ones, and specifically the
        # one preferred by the substitution > deletion > insertion order
        dist, scripts = enum_optimal_scripts((1, 2, 2), (1, 1))
        assert dist == 2

        def as_counts(ops):
            c = np.zeros((3, 3), dtype=np.int64)
            for a, b in ops:
                c[a, b] += 1
            return c

        assert any((as_counts(ops) == counts).all() for ops in scripts)

        def rank(ops):
            # operation preference at each step, for lexicographic comparison
            order = {"sub": 0, "del": 1, "ins": 2}
            return [order["sub" if a and b else ("del" if a else "ins")] for a, b in ops]

        best = min(scripts, key=rank)
        assert (as_counts(best) == counts).all()

    def test_identity(self, ab2):
        counts = levenshtein_script(enc(ab2, "a"), enc(ab2, "a")).values
        assert counts[1, 1] == 1 and counts.sum() == 1

    def test_pure_insertions(self, ab2):
        counts = levenshtein_script(enc(ab2, ""), enc(ab2, "ab")).values
        assert counts[0, 1] == 1 and counts[0, 2] == 1 and counts.sum() == 2

    @settings(max_examples=150, deadline=None)
    @given(strings_ab, strings_ab)
    def test_unit_cost_pricing_matches_distance(self, s, t):
        ab = Alphabet(("a", "b"))
        x, y = enc(ab, s), enc(ab, t)
        counts = levenshtein_script(x, y)
        unit = CostMatrix.unit(ab)
        assert script_cost(unit, counts) == levenshtein(x, y)


class TestEditDistance:
    def test_worked_examples(self, ab2, table_costs):
        x, y = enc(ab2, "abb"), enc(ab2, "aa")
        assert edit_distance(table_costs, x, y) == 10.0
        assert edit_distance(CostMatrix.unit(ab2), x, y) == 2.0

    def test_zero_diagonal_identity(self, ab2, table_costs):
        x = enc(ab2, "abba")
        assert edit_distance(table_costs, x, x) == 0.0

    def test_symmetric_costs_symmetric_distance(self, ab2, table_costs):
        rng = np.random.default_rng(3)
        for _ in range(50):
            x = enc(ab2, "".join(rng.choice(["a", "b"], size=rng.integers(0, 7))))
            y = enc(ab2, "".join(rng.choice(["a", "b"], size=rng.integers(0, 7))))
            assert edit_distance(table_costs, x, y) == pytest.approx(
                edit_distance(table_costs, y, x), abs=1e-12
            )

    def test_unit_costs_equal_levenshtein_exhaustive(self):
        ab = Alphabet(("a", "b"))
        unit = CostMatrix.unit(ab)
        pool = [
            ab.encode_chars("".join(p))
            for n in range(5)
            for p in __import__("itertools").product("ab", repeat=n)
        ]
        for x in pool:
            for y in pool:
                assert edit_distance(unit, x, y) == levenshtein(x, y)

    def test_unit_costs_equal_levenshtein_random_large(self, ab3):
        rng = np.random.default_rng(11)
        unit = CostMatrix.unit(ab3)
        for _ in range(2000):
            x = ab3.encode([("a", "b", "c")[i] for i in rng.integers(0, 3, rng.integers(0, 7))])
            y = ab3.encode([("a", "b", "c")[i] for i in rng.integers(0, 3, rng.integers(0, 7))])
            assert edit_distance(unit, x, y) == levenshtein(x, y)

    @pytest.mark.skipif(
        __import__("editsim").backend_name() != "compiled",
        reason="full exhaustive sweep needs the compiled backend",
    )
    def test_unit_costs_equal_levenshtein_full_exhaustive(self):
        import itertools

        for size in (1, 2, 3):
            ab = Alphabet(tuple("abc"[:size]))
            unit = CostMatrix.unit(ab)
            pool = [
                ab.encode_chars("".join(p))
                for n in range(7)
                for p in itertools.product("abc"[:size], repeat=n)
            ]
            for i, x in enumerate(pool):
                for y in pool[i:]:
                    assert edit_distance(unit, x, y) == levenshtein(x, y)

    def test_dimension_mismatch(self, ab2, ab3, table_costs):
        with pytest.raises(CostMatrixError):
            edit_distance(table_costs, ab3.encode("a"), ab3.encode("b"))


class TestScriptCostAndSimilarity:
    def test_zero_costs(self, ab2):
        zeros = CostMatrix.zeros(ab2)
        counts = levenshtein_script(enc(ab2, "abb"), enc(ab2, "aa"))
        assert script_cost(zeros, counts) == 0.0
        assert exp_edit_similarity(zeros, enc(ab2, "ab"), enc(ab2, "ba")) == 1.0

    def test_worked_value(self, ab2, table_costs):
        counts = levenshtein_script(enc(ab2, "abb"), enc(ab2, "aa"))
        # sub(b->a)=4 + del(b)=10 + keep(a)=0; differs from the cheapest
        # script cost (10) because the unit-cost script is fixed first
        assert script_cost(table_costs, counts) == 14.0
        assert exp_edit_similarity(table_costs, enc(ab2, "abb"), enc(ab2, "aa")) == (
            pytest.approx(2.0 * math.exp(-14.0) - 1.0, rel=1e-15)
        )

    def test_log2_cost_gives_zero_similarity(self, ab2):
        costs = CostMatrix.zeros(ab2).values.copy()
        costs[1, 2] = math.log(2.0)  # substituting a -> b costs ln 2
        cm = CostMatrix(costs, ab2)
        assert exp_edit_similarity(cm, enc(ab2, "a"), enc(ab2, "b")) == pytest.approx(
            0.0, abs=1e-15
        )

    @settings(max_examples=100, deadline=None)
    @given(strings_ab, strings_ab, st.floats(0.0, 5.0), st.floats(0.0, 5.0))
    def test_similarity_range_and_monotonicity(self, s, t, c1, c2):
        ab = Alphabet(("a", "b"))
        x, y = enc(ab, s), enc(ab, t)
        lo_costs = np.full((3, 3), min(c1, c2))
        hi_costs = np.full((3, 3), max(c1, c2))
        k_lo = exp_edit_similarity(CostMatrix(hi_costs, ab), x, y)
        k_hi = exp_edit_similarity(CostMatrix(lo_costs, ab), x, y)
        for k in (k_lo, k_hi):
            # open lower bound in exact arithmetic; -1.0 only via underflow
            assert -1.0 <= k <= 1.0
        assert k_lo <= k_hi + 1e-15  # raising any cost can only lower it

    def test_csv_round_trip(self, tmp_path, table_costs):
        path = tmp_path / "costs.csv"
        table_costs.save_csv(path)
        back = CostMatrix.load_csv(path)
        assert (back.values == table_costs.values).all()
        assert back.alphabet == table_costs.alphabet

    def test_negative_costs_rejected(self, ab2):
        with pytest.raises(CostMatrixError):
            CostMatrix(np.full((3, 3), -1.0), ab2)

    def test_counts_validation(self, ab2):
        with pytest.raises(CostMatrixError):
            OpCounts(np.eye(3, dtype=np.int64), ab2)  # nonzero gap-gap cell
