"""The compiled extension and the numpy fallback must agree numerically."""

import numpy as np
import pytest

from editsim import _ckernels, _pykernels
from oracles import random_string, random_valid_transducer

try:
    from editsim import _ckernels  # noqa: F811
except ImportError:  # pragma: no cover - exercised only without the extension
    _ckernels = None

pytestmark = pytest.mark.skipif(
    _ckernels is None, reason="compiled extension not built"
)


@pytest.fixture
def cases(ab3):
    rng = np.random.default_rng(99)
    out = []
    for _ in range(25):
        t = random_valid_transducer(ab3, rng, max_insert=0.5)
        x = random_string(ab3, rng, 7)
        y = random_string(ab3, rng, 7)
        out.append((t, x, y))
    return out


def test_lev_distance_equal(cases):
    for _, x, y in cases:
        assert _ckernels.lev_distance(x.codes, y.codes) == _pykernels.lev_distance(
            x.codes, y.codes
        )


def test_script_counts_equal(cases):
    for _, x, y in cases:
        a = _ckernels.lev_script_counts(x.codes, y.codes, 4)
        b = _pykernels.lev_script_counts(x.codes, y.codes, 4)
        assert (a == b).all()


def test_weighted_distance_equal(cases):
    rng = np.random.default_rng(100)
    costs = rng.uniform(0.0, 3.0, size=(4, 4))
    np.fill_diagonal(costs, 0.0)
    costs = np.ascontiguousarray(costs)
    for _, x, y in cases:
        assert _ckernels.weighted_distance(costs, x.codes, y.codes) == pytest.approx(
            _pykernels.weighted_distance(costs, x.codes, y.codes), rel=1e-15
        )


def test_forward_backward_equal(cases):
    for t, x, y in cases:
        fc = _ckernels.forward_log(t.log_probs, x.codes, y.codes)
        fp = _pykernels.forward_log(t.log_probs, x.codes, y.codes)
        np.testing.assert_allclose(fc, fp, rtol=1e-12, atol=1e-300)
        bc = _ckernels.backward_log(t.log_probs, x.codes, y.codes)
        bp = _pykernels.backward_log(t.log_probs, x.codes, y.codes)
        np.testing.assert_allclose(bc, bp, rtol=1e-12, atol=1e-300)


def test_em_counts_equal(cases):
    for t, x, y in cases:
        dc = np.zeros((4, 4))
        dp = np.zeros((4, 4))
        lc = _ckernels.em_pair_counts(t.log_probs, x.codes, y.codes, dc)
        lp = _pykernels.em_pair_counts(t.log_probs, x.codes, y.codes, dp)
        assert lc == pytest.approx(lp, rel=1e-12)
        np.testing.assert_allclose(dc, dp, rtol=1e-10, atol=1e-300)


def test_solve_kernel_equal(cases):
    from editsim.automata import conditional_automaton, remove_epsilon

    for t, x, y in cases:
        a1 = remove_epsilon(conditional_automaton(t, x))
        a2 = remove_epsilon(conditional_automaton(t, y))
        args = (
            np.ascontiguousarray(a1.weights),
            np.ascontiguousarray(a1.rho),
            np.ascontiguousarray(a2.weights),
            np.ascontiguousarray(a2.rho),
        )
        assert _ckernels.solve_kernel(*args) == pytest.approx(
            _pykernels.solve_kernel(*args), rel=1e-12
        )
