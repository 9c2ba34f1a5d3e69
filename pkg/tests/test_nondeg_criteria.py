import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eqfuller.nondeg_criteria import (DEGENERATE, NONDEG_H, NONDEG_LIN, NONDEG_PARAM,
                                      NONDEG_RANK2, richardson_gradient, s1_nondegenerate,
                                      z2_branch_spot_check, z2_nondegenerate)


def test_z2_examples():
    assert z2_nondegenerate(lambda v, lam: 1 + lam[0], [0.0]) == NONDEG_PARAM
    assert z2_nondegenerate(lambda v, lam: 1.0, [0.0]) == DEGENERATE
    assert z2_nondegenerate(lambda v, lam: 2.0, [0.0]) == NONDEG_H


def test_s1_examples():
    one, zero = (lambda x, y, lam: 1.0), (lambda x, y, lam: 0.0)
    assert s1_nondegenerate(one, zero, [0.0], s=1) == DEGENERATE
    assert s1_nondegenerate(lambda x, y, lam: 1 + lam[0], lambda x, y, lam: lam[1],
                            [0.0, 0.0], s=2) == NONDEG_RANK2
    assert s1_nondegenerate(lambda x, y, lam: 0.5, zero, [0.0]) == NONDEG_LIN


def test_s1_one_parameter_never_suffices():
    # a strong parameter dependence in a and b still cannot give rank 2 with s = 1
    assert s1_nondegenerate(lambda x, y, lam: 1 + 5 * lam[0], lambda x, y, lam: 3 * lam[0],
                            [0.0]) == DEGENERATE
    # rank one with s = 2: both derivatives parallel
    assert s1_nondegenerate(lambda x, y, lam: 1 + lam[0] + lam[1],
                            lambda x, y, lam: 2 * (lam[0] + lam[1]), [0.0, 0.0]) == DEGENERATE


def test_thresholds():
    assert z2_nondegenerate(lambda v, lam: 1 + 1e-9, [0.0]) == DEGENERATE
    assert z2_nondegenerate(lambda v, lam: 1 + 1e-7, [0.0]) == NONDEG_H
    assert z2_nondegenerate(lambda v, lam: 1 + 1e-7 * lam[0], [0.0]) == DEGENERATE
    assert z2_nondegenerate(lambda v, lam: 1 + 1e-5 * lam[0], [0.0]) == NONDEG_PARAM


def test_richardson_gradient_accuracy():
    g = richardson_gradient(lambda lam: np.sin(lam[0]) * np.exp(lam[1]), [0.3, -0.2])
    exact = [np.cos(0.3) * np.exp(-0.2), np.sin(0.3) * np.exp(-0.2)]
    assert np.allclose(g, exact, atol=1e-9)
    with pytest.raises(ValueError):
        richardson_gradient(lambda lam: 0.0, [0.0], fd_step=0.0)


def test_branch_spot_check():
    assert z2_branch_spot_check(lambda v, lam: 1 + lam[0] - v * v, [0.0])
    assert z2_branch_spot_check(lambda v, lam: 2 - v * v, [0.0])
    assert not z2_branch_spot_check(lambda v, lam: 1.0, [0.0])


coef = st.floats(min_value=-3, max_value=3, allow_nan=False).filter(lambda c: abs(c) > 1e-3)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([0.0, 1.0]), st.sampled_from([0.0, 1.0]), coef, coef)
def test_verdicts_invariant_under_reflection(use_offset, use_lambda, c_lam, c_vv):
    h0 = 1.0 + use_offset * 0.5

    def h(v, lam):
        return h0 + use_lambda * c_lam * lam[0] + c_vv * v * v + 0.1 * v ** 4

    reflected = lambda v, lam: h(-v, lam)
    assert z2_nondegenerate(h, [0.0]) == z2_nondegenerate(reflected, [0.0])
    verdict = z2_nondegenerate(h, [0.0])
    if verdict != DEGENERATE:
        assert z2_branch_spot_check(h, [0.0])
