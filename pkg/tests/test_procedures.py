from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptfdr import (
    CriticalConstants,
    DomainError,
    LengthMismatch,
    PValueVector,
    bh_constants,
    bh_procedure,
    check_theorem1_condition,
    ms_constants,
    ms_procedure,
    oracle_bh,
    prds_constants,
    prds_procedure,
    step_down,
    step_up,
    sts_procedure,
    two_stage_bky,
)
from adaptfdr.procedures import apply_procedure


def ms_exact(m, q, beta=1):
    q = Fraction(q)
    return [i * q / (m + beta - i * (1 - q)) for i in range(1, m + 1)]


# ------------------------------------------------------------- constants


def test_ms_constants_m1():
    c = ms_constants(1, 0.05)
    assert c.alphas[0] == pytest.approx(float(Fraction(5, 100) / Fraction(105, 100)), rel=1e-15)
    assert c.alphas[0] == pytest.approx(0.047619, abs=1e-6)


def test_ms_constants_last_approaches_one():
    c = ms_constants(4096, 0.05)
    assert c.alphas[-1] == pytest.approx(float(ms_exact(4096, Fraction(1, 20))[-1]), rel=1e-14)
    assert c.alphas[-1] == pytest.approx(0.99514, abs=5e-6)


def test_ms_constants_m3_half():
    c = ms_constants(3, 0.5)
    np.testing.assert_allclose(c.alphas, [1 / 7, 1 / 3, 3 / 5], rtol=1e-15)


@pytest.mark.parametrize("m", [1, 2, 5, 64, 513])
@pytest.mark.parametrize("q", ["1/20", "1/10", "1/3"])
@pytest.mark.parametrize("beta", [1, 2, 7])
def test_ms_constants_match_rational(m, q, beta):
    exact = ms_exact(m, Fraction(q), beta)
    c = ms_constants(m, float(Fraction(q)), beta)
    np.testing.assert_allclose(c.alphas, [float(a) for a in exact], rtol=1e-14)


@pytest.mark.parametrize("kw", [dict(q=0.0), dict(q=1.0), dict(q=-1), dict(q=0.05, beta=0.5)])
def test_ms_constants_domain(kw):
    with pytest.raises(DomainError):
        ms_constants(4, **kw)


def test_bh_constants():
    np.testing.assert_allclose(bh_constants(4, 0.05).alphas, [0.0125, 0.025, 0.0375, 0.05], rtol=1e-15)
    assert bh_constants(1, 0.05).alphas.tolist() == [0.05]
    assert bh_constants(2, 0.5).alphas.tolist() == [0.25, 0.5]
    with pytest.raises(DomainError):
        bh_constants(3, 1.5)


@pytest.mark.parametrize("m", [1, 10, 100])
def test_prds_last_constant_is_q(m):
    assert prds_constants(m, 0.05).alphas[-1] == pytest.approx(0.05, rel=1e-12)


def test_prds_below_ms_on_grid():
    for m in range(2, 80):
        for q in (0.01, 0.05, 0.1, 0.3):
            p, ms = prds_constants(m, q).alphas, ms_constants(m, q).alphas
            assert np.all(p[:-1] < ms[:-1])


def test_theorem1_condition_examples():
    assert check_theorem1_condition(ms_constants(7, 0.05), 0.05)
    for m in range(1, 65):
        bh, ms = bh_constants(m, 0.05).alphas, ms_constants(m, 0.05).alphas
        # BH is below MS from i = 2 on, but q/m > q/(m + q) at i = 1,
        # so BH never meets the condition
        assert np.all(bh[1:-1] < ms[1:-1])
        assert bh[0] > ms[0]
        assert not check_theorem1_condition(bh_constants(m, 0.05), 0.05)
    assert not check_theorem1_condition(CriticalConstants([0.01, 0.999]), 0.05)


# ---------------------------------------------------------------- engines


def test_step_down_examples():
    rs = step_down([0.01, 0.02, 0.9], [0.025, 0.05, 0.075])
    assert rs.k == 2 and rs.rejected_ids == {0, 1} and rs.threshold == 0.02
    assert step_down([0.5, 0.6], [0.025, 0.05]).k == 0
    assert step_down([0.0] * 5, ms_constants(5, 0.05)).k == 5


def test_step_up_examples():
    assert step_up([0.03, 0.04], [0.025, 0.05]).k == 2
    assert step_down([0.03, 0.04], [0.025, 0.05]).k == 0
    assert step_up([1.0] * 4, bh_constants(4, 0.05)).k == 0


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        step_down([0.1, 0.2], [0.05])
    with pytest.raises(LengthMismatch):
        step_up([0.1], [0.05, 0.1])


def test_empty_input():
    for tag in ("BH", "TS", "MS", "STS", "PRDS"):
        assert apply_procedure(tag, [], 0.05).k == 0
    assert oracle_bh([], 0.05, 0).k == 0


# ------------------------------------------------------- named procedures


def test_ms_procedure_single():
    assert ms_procedure([0.04], 0.05).k == 1
    assert ms_procedure([0.049], 0.05).k == 0


def test_ms_procedure_m2():
    # alpha = (0.05 / 2.05, 0.1 / 1.1)
    rs = ms_procedure([0.01, 0.04], 0.05)
    assert rs.k == 2
    np.testing.assert_allclose(rs.alphas, [0.05 / 2.05, 0.1 / 1.1], rtol=1e-15)


def test_two_stage_edges():
    assert two_stage_bky([0.0] * 6, 0.05).k == 6
    assert two_stage_bky([1.0] * 6, 0.05).k == 0


def test_two_stage_second_stage():
    # stage one at q' = 0.05/1.05 rejects 2 of 4; stage two level q' * 4 / 2
    p = [0.001, 0.02, 0.045, 0.9]
    q1 = 0.05 / 1.05
    assert bh_procedure(p, q1).k == 2
    rs = two_stage_bky(p, 0.05)
    np.testing.assert_allclose(rs.alphas, np.arange(1, 5) * (q1 * 2) / 4)
    assert rs.k == 3


def test_sts_examples():
    assert sts_procedure([0.6, 0.7, 0.8, 0.9], 0.05).k == 0
    rs = sts_procedure([0.001, 0.002, 0.003, 0.004], 0.05)
    assert rs.k == 4
    np.testing.assert_allclose(rs.alphas, [0.025, 0.05, 0.075, 0.1], rtol=1e-14)
    with pytest.raises(DomainError):
        sts_procedure([0.1], 0.05, lam=1.0)


def test_sts_never_rejects_above_lambda():
    # q* is huge here, so only the lambda cap keeps 0.55 and 0.6 unrejected
    p = [0.01] * 8 + [0.55, 0.6]
    rs = sts_procedure(p, 0.4, lam=0.5)
    assert rs.k == 8


def test_oracle():
    rng = np.random.default_rng(3)
    for _ in range(200):
        p = rng.random(12) ** 3
        assert oracle_bh(p, 0.05, 12).rejected_ids == step_up(p, bh_constants(12, 0.05)).rejected_ids
    rs = oracle_bh([0.01, 0.03, 0.07, 0.5], 0.05, 2)
    np.testing.assert_allclose(rs.alphas, np.arange(1, 5) * 0.1 / 4)
    assert oracle_bh([0.3, 0.99, 1.0], 0.05, 0).k == 2
    with pytest.raises(DomainError):
        oracle_bh([0.1], 0.05, 2)


def test_prds_procedure():
    assert prds_procedure([0.049], 0.05).k == 1
    assert prds_procedure([1.0] * 5, 0.05).k == 0


# ------------------------------------------- independent plain-python rules


def _bh_k(p, level, cap=float("inf")):
    p = sorted(p)
    m = len(p)
    for i in range(m, 0, -1):
        if p[i - 1] <= min(i * level / m, cap):
            return i
    return 0


def _ts_k(p, q):
    m = len(p)
    q1 = q / (1 + q)
    r1 = _bh_k(p, q1)
    if r1 == 0:
        return 0
    if r1 == m:
        return m
    return _bh_k(p, q1 * m / (m - r1))


def _sts_k(p, q, lam):
    m = len(p)
    r = sum(x <= lam for x in p)
    m0 = (m + 1 - r) / (1 - lam)
    q_star = q * m / m0
    # plain rule: step-up at q_star, then keep only p <= lam
    k = _bh_k(p, q_star)
    return sum(1 for x in sorted(p)[:k] if x <= lam)


pv_lists = st.lists(st.one_of(st.floats(0, 1), st.floats(0, 0.05), st.sampled_from([0.0, 0.01, 0.5])),
                    min_size=1, max_size=25)


@given(pv_lists, st.sampled_from([0.01, 0.05, 0.1, 0.2]), st.sampled_from([0.2, 0.5, 0.8]))
@settings(max_examples=400, deadline=None)
def test_named_procedures_match_plain_rules(p, q, lam):
    assert bh_procedure(p, q).k == _bh_k(p, q)
    assert two_stage_bky(p, q).k == _ts_k(p, q)
    assert sts_procedure(p, q, lam).k == _sts_k(p, q, lam)
