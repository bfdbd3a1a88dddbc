import math

import numpy as np
import pytest

from editsim.baselines import Measure, lev_measure
from editsim.goodness import (
    DegenerateSimilarityError,
    ScoreNormalizer,
    as_similarity,
    fit_multiclass,
    fit_sparse_classifier,
    goodness_curve,
    hinge_l1_objective,
    margins_from_matrix,
    normalize_measure,
    predict_label,
    predict_margin,
    predict_multiclass,
)
from editsim.kernel import kernel_exact
from oracles import lp_hinge_l1_oracle, random_string, random_valid_transducer

# Similarity table of the eight-point worked example: rows are the three
# reference points, columns the points A..H; first four points are one
# class, the last four the other. The published margins come from the
# unrounded coordinates, so agreement is to table precision only.
REF_TABLE = {
    "A": [1.0, 0.40, 0.42],
    "B": [0.40, 1.0, 0.42],
    "C": [0.50, 0.22, 0.70],
    "D": [0.22, 0.50, 0.70],
    "E": [0.42, 0.42, 1.0],
    "F": [0.46, 0.46, 0.95],
    "G": [0.39, 0.22, 0.78],
    "H": [0.28, 0.37, 0.86],
}
REF_MARGINS = {
    "A": 0.3277, "B": 0.3277, "C": 0.0063, "D": 0.0063,
    "E": 0.0554, "F": 0.0106, "G": 0.0552, "H": 0.0707,
}
REF_LABELS = {"A": 1, "B": 1, "C": 1, "D": 1, "E": -1, "F": -1, "G": -1, "H": -1}


class TestNormalizer:
    def test_degenerate(self):
        with pytest.raises(DegenerateSimilarityError):
            ScoreNormalizer.fit([3.0, 3.0, 3.0])

    def test_already_standard(self):
        norm = ScoreNormalizer.fit([-1.0, 1.0])
        assert norm.transform(-1.0) == -1.0
        assert norm.transform(1.0) == 1.0

    def test_worked_values(self):
        norm = ScoreNormalizer.fit([0.0, 10.0, 20.0])
        assert norm.mean == 10.0
        assert norm.std == pytest.approx(math.sqrt(200.0 / 3.0))
        assert norm.transform(20.0) == 1.0  # 10/8.165 clips at 1
        assert norm.transform(10.0) == 0.0

    def test_measure_wrapper(self, ab2):
        pairs = [
            (ab2.encode("a"), ab2.encode("a a a")),
            (ab2.encode("a"), ab2.encode("a")),
            (ab2.encode("b b"), ab2.encode("a")),
        ]
        wrapped = normalize_measure(lev_measure(), pairs)
        assert wrapped.kind == "similarity"
        values = [wrapped.func(x, y) for x, y in pairs]
        assert all(-1.0 <= v <= 1.0 for v in values)
        # larger distance maps to smaller normalized similarity
        assert wrapped.func(ab2.encode("a"), ab2.encode("a")) >= values[0]


class TestGoodnessCurve:
    def test_single_class_perfect_similarity(self, ab2):
        items = [("0", ab2.encode("a")), ("0", ab2.encode("b"))]
        one = Measure("one", lambda x, y: 1.0, "similarity")
        curve = goodness_curve(one, items, np.linspace(0.0, 1.0, 11))
        assert (curve.epsilons == 0.0).all()

    def test_balanced_classes_constant_similarity(self, ab2):
        items = [
            ("0", ab2.encode("a")), ("0", ab2.encode("b")),
            ("1", ab2.encode("a a")), ("1", ab2.encode("b b")),
        ]
        one = Measure("one", lambda x, y: 1.0, "similarity")
        curve = goodness_curve(one, items, [0.0, 0.25, 0.5])
        assert curve.epsilons[0] == 0.0  # margins are exactly zero
        assert (curve.epsilons[1:] == 1.0).all()

    def test_curve_monotone_step(self, ab2):
        rng = np.random.default_rng(70)
        t = random_valid_transducer(ab2, rng)
        items = [
            (str(rng.integers(0, 2)), random_string(ab2, rng, 5, min_len=1))
            for _ in range(12)
        ]
        pairs = [(a, b) for _, a in items for _, b in items]
        m = normalize_measure(
            Measure("k", lambda x, y: kernel_exact(t, x, y), "similarity"), pairs
        )
        curve = goodness_curve(m, items)
        assert all(
            b >= a for a, b in zip(curve.epsilons, curve.epsilons[1:])
        )
        assert curve.tau == 1.0

    def test_eight_point_reference_margins(self):
        names = list(REF_TABLE)
        y = np.array([REF_LABELS[n] for n in names], dtype=float)
        kvals = np.zeros((8, 8))
        for i, n in enumerate(names):
            # columns 0, 1, 4 are the reference points A, B and E
            kvals[i, [0, 1, 4]] = REF_TABLE[n]
        margins = margins_from_matrix(kvals, y, reasonable=[0, 1, 4])
        for i, n in enumerate(names):
            assert margins[i] == pytest.approx(REF_MARGINS[n], abs=5e-3)

    def test_curve_csv(self, tmp_path, ab2):
        items = [("0", ab2.encode("a")), ("1", ab2.encode("b"))]
        one = Measure("one", lambda x, y: 1.0, "similarity")
        curve = goodness_curve(one, items, [0.0, 0.5, 1.0])
        path = tmp_path / "curve.csv"
        curve.save_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "gamma,epsilon"
        assert len(lines) == 4


def lut_measure(strings, kmat):
    index = {s: i for i, s in enumerate(strings)}
    return Measure(
        "lut", lambda x, y: kmat[index[x], index[y]], "similarity"
    )


def random_instance(rng, n):
    ab = None
    from editsim.alphabet import Alphabet

    ab = Alphabet(("a",))
    from editsim.alphabet import Str

    strings = [Str(np.full(i, 1, np.int32), ab) for i in range(n)]
    kmat = rng.uniform(-1.0, 1.0, size=(n, n))
    kmat = (kmat + kmat.T) / 2.0
    np.fill_diagonal(kmat, 1.0)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    if abs(y.sum()) == n:
        y[0] = -y[0]
    train = [("1" if v > 0 else "0", s) for v, s in zip(y, strings)]
    return strings, kmat, y, train


class TestSparseLinear:
    def test_zero_solution_threshold(self):
        rng = np.random.default_rng(71)
        for trial in range(10):
            strings, kmat, y, train = random_instance(rng, int(rng.integers(8, 30)))
            m = lut_measure(strings, kmat)
            lam_star = np.abs((kmat * y[:, None]).sum(axis=0)).max()
            hi = fit_sparse_classifier(m, train, lam_star * (1 + 1e-9))
            lo = fit_sparse_classifier(m, train, lam_star * (1 - 1e-3))
            assert hi.sparsity == 0
            assert lo.sparsity > 0

    def test_matches_lp_oracle(self):
        rng = np.random.default_rng(72)
        for trial in range(6):
            strings, kmat, y, train = random_instance(rng, int(rng.integers(10, 51)))
            lam = float(rng.uniform(0.05, 2.0))
            model = fit_sparse_classifier(lut_measure(strings, kmat), train, lam)
            reference = lp_hinge_l1_oracle(kmat, y, lam)
            assert model.objective == pytest.approx(reference, rel=1e-6, abs=1e-9)

    def test_objective_no_worse_than_zero(self):
        rng = np.random.default_rng(73)
        strings, kmat, y, train = random_instance(rng, 20)
        model = fit_sparse_classifier(lut_measure(strings, kmat), train, 0.7)
        assert model.objective <= len(train) + 1e-12

    def test_separable_copy_kernel(self, copy_model, ab2):
        x0, x1 = ab2.encode("a a"), ab2.encode("b")
        train = [("0", x0), ("1", x1)]
        m = Measure("k", lambda a, b: kernel_exact(copy_model, a, b), "similarity")
        model = fit_sparse_classifier(m, train, lam=0.1)
        assert predict_label(model, x0) == "0"
        assert predict_label(model, x1) == "1"
        assert model.sparsity <= 2

    def test_scale_equivariance(self):
        rng = np.random.default_rng(74)
        strings, kmat, y, train = random_instance(rng, 15)
        lam = 0.6
        scale = 3.7
        preds1 = []
        preds2 = []
        m1 = fit_sparse_classifier(lut_measure(strings, kmat), train, lam)
        m2 = fit_sparse_classifier(
            lut_measure(strings, scale * kmat), train, lam * scale
        )
        for s in strings:
            preds1.append(predict_label(m1, s))
            preds2.append(predict_label(m2, s))
        assert preds1 == preds2

    def test_predict_conventions(self, ab2):
        model_measure = Measure("k", lambda x, y: 0.7, "similarity")
        from editsim.goodness import SparseLinearModel

        zero = SparseLinearModel(np.zeros(1), [ab2.encode("a")], 0.0, model_measure)
        assert predict_margin(zero, ab2.encode("b")) == 0.0
        assert predict_label(zero, ab2.encode("b")) == "+1"  # zero goes positive
        single = SparseLinearModel(np.ones(1), [ab2.encode("a")], 0.0, model_measure)
        assert predict_margin(single, ab2.encode("b")) == pytest.approx(0.7)

    def test_margin_invariant_under_landmark_permutation(self):
        rng = np.random.default_rng(75)
        strings, kmat, y, train = random_instance(rng, 12)
        m = lut_measure(strings, kmat)
        model = fit_sparse_classifier(m, train, 0.4)
        perm = rng.permutation(len(model.landmarks))
        from editsim.goodness import SparseLinearModel

        shuffled = SparseLinearModel(
            model.alphas[perm], [model.landmarks[i] for i in perm], 0.4, m,
            diagnostics=model.diagnostics,
        )
        for s in strings[:5]:
            assert predict_margin(shuffled, s) == pytest.approx(
                predict_margin(model, s), rel=1e-12, abs=1e-12
            )

    def test_lambda_zero_allowed_negative_rejected(self):
        rng = np.random.default_rng(76)
        strings, kmat, y, train = random_instance(rng, 8)
        fit_sparse_classifier(lut_measure(strings, kmat), train, 0.0)
        with pytest.raises(ValueError):
            fit_sparse_classifier(lut_measure(strings, kmat), train, -1.0)


class TestMulticlass:
    def test_two_class_ova_equals_binary_sign(self):
        rng = np.random.default_rng(77)
        strings, kmat, y, train = random_instance(rng, 14)
        m = lut_measure(strings, kmat)
        mm = fit_multiclass(m, train, lam=0.5, strategy="ova")
        binary = fit_sparse_classifier(m, train, lam=0.5)
        for s in strings:
            assert predict_multiclass(mm, s) == predict_label(binary, s)

    def test_dominant_margin_wins(self, ab2):
        from editsim.goodness import MulticlassModel, SparseLinearModel

        meas = Measure("k", lambda x, y: 1.0, "similarity")
        lm = [ab2.encode("a")]
        models = {
            "x": SparseLinearModel(np.array([0.2]), lm, 0.0, meas),
            "y": SparseLinearModel(np.array([5.0]), lm, 0.0, meas),
            "z": SparseLinearModel(np.array([-3.0]), lm, 0.0, meas),
        }
        mm = MulticlassModel("ova", ["x", "y", "z"], models)
        assert predict_multiclass(mm, ab2.encode("b")) == "y"

    def test_three_class_synthetic_beats_chance(self, ab3):
        rng = np.random.default_rng(78)

        def draw(cls):
            probs = {0: (0.8, 0.1, 0.1), 1: (0.1, 0.8, 0.1), 2: (0.1, 0.1, 0.8)}[cls]
            length = int(rng.integers(3, 7))
            return ab3.encode(
                [("a", "b", "c")[i] for i in rng.choice(3, size=length, p=probs)]
            )

        train = [(str(c), draw(c)) for c in rng.integers(0, 3, size=30)]
        test = [(str(c), draw(c)) for c in rng.integers(0, 3, size=30)]
        t = random_valid_transducer(ab3, rng)
        raw = Measure("k", lambda x, y: kernel_exact(t, x, y), "similarity")
        pairs = [(a, b) for _, a in train[:12] for _, b in train[:12]]
        m = normalize_measure(raw, pairs)
        for strategy in ("ova", "ovo"):
            mm = fit_multiclass(m, train, lam=0.5, strategy=strategy)
            acc = sum(
                1 for lab, s in test if predict_multiclass(mm, s) == lab
            ) / len(test)
            assert acc > 1.0 / 3.0

    def test_empty_class_rejected(self, ab2):
        m = Measure("k", lambda x, y: 1.0, "similarity")
        with pytest.raises(ValueError):
            fit_multiclass(m, [], lam=0.1)

    def test_model_csv(self, tmp_path):
        rng = np.random.default_rng(79)
        strings, kmat, y, train = random_instance(rng, 10)
        model = fit_sparse_classifier(lut_measure(strings, kmat), train, 0.5)
        path = tmp_path / "model.csv"
        model.save_csv(path)
        text = path.read_text()
        assert "# lambda: 0.5" in text
        assert text.count("\n") == len(model.landmarks) + 3
