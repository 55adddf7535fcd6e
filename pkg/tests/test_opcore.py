import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nclp.errors import ContractViolation, NumericError
from nclp.opcore import (Algebra, Interval, Op, abs_op, annihilation_check,
                         dense_algebra, is_projection, l2_inner, l2_norm,
                         mu_function, op_norm, proj_join, proj_meet,
                         schatten_norm, singular_values, spectral_decompose,
                         spectral_projection, tail_trace, weak_l1)

ALG = dense_algebra(4)
BLOCKY = Algebra(3, 2, np.array([1.0 / 8, 1.0 / 4, 1.0 / 8]))


def rand_op(alg, seed, hermitian=False):
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((alg.nblocks, alg.d, alg.d)) \
        + 1j * rng.standard_normal((alg.nblocks, alg.d, alg.d))
    a = Op(b, alg)
    return a.hermitize() if hermitian else a


def test_trace_is_normalized():
    assert ALG.unit().trace() == pytest.approx(1.0)
    assert BLOCKY.unit().trace() == pytest.approx(1.0)


def test_trace_is_tracial():
    a = rand_op(BLOCKY, 1)
    b = rand_op(BLOCKY, 2)
    assert (a @ b).trace() == pytest.approx((b @ a).trace(), abs=1e-12)


def test_nonfinite_rejected():
    bad = np.zeros((1, 4, 4), dtype=complex)
    bad[0, 0, 0] = np.nan
    with pytest.raises(NumericError):
        Op(bad, ALG)


def test_shape_mismatch_rejected():
    with pytest.raises(ContractViolation):
        Op(np.zeros((2, 4, 4)), ALG)


def test_spectral_decompose_reconstructs():
    h = rand_op(BLOCKY, 3, hermitian=True)
    recon = BLOCKY.zero()
    for w, p in spectral_decompose(h):
        recon = recon + w * p
    assert (recon - h).max_abs() < 1e-10


def test_spectral_decompose_merges_close_eigenvalues():
    # [DERIVED] two eigenvalues 1e-10 apart collapse into one projection
    d = np.diag([1.0, 1.0 + 1e-10, 2.0, 3.0]).astype(complex)
    pairs = spectral_decompose(Op(d[None], ALG))
    assert len(pairs) == 3
    assert pairs[0][1].trace() == pytest.approx(0.5)


def test_spectral_projection_interval_endpoints():
    d = np.diag([0.0, 1.0, 2.0, 3.0]).astype(complex)
    h = Op(d[None], ALG)
    p = spectral_projection(h, Interval(1.0, 2.0, True, True))
    assert p.trace() == pytest.approx(0.5)
    p = spectral_projection(h, Interval(1.0, 2.0, False, True))
    assert p.trace() == pytest.approx(0.25)
    # endpoint snapping within 1e-9
    p = spectral_projection(h, Interval(1.0 + 1e-10, 2.0, True, True))
    assert p.trace() == pytest.approx(0.5)


def test_schatten_known_values():
    # [DERIVED] diag(3, -4) in M_2 with tau = tr/2: ||a||_1 = 7/2,
    # ||a||_2 = 5/sqrt(2), ||a||_inf = 4
    alg = dense_algebra(2)
    a = Op(np.diag([3.0, -4.0]).astype(complex)[None], alg)
    assert schatten_norm(a, 1) == pytest.approx(3.5)
    assert schatten_norm(a, 2) == pytest.approx(np.sqrt(12.5))
    assert op_norm(a) == pytest.approx(4.0)


def test_schatten_p_below_one_rejected():
    with pytest.raises(ContractViolation):
        schatten_norm(rand_op(ALG, 4), 0.5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_l1_equals_mu_integral(seed):
    a = rand_op(BLOCKY, seed)
    assert schatten_norm(a, 1) == pytest.approx(mu_function(a).integral(),
                                                abs=1e-9, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_weak_l1_equals_sup_t_mu(seed):
    a = rand_op(BLOCKY, seed)
    assert weak_l1(a) == pytest.approx(mu_function(a).sup_t_mu(),
                                       abs=1e-9, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_holder_l2(seed):
    a = rand_op(BLOCKY, seed)
    b = rand_op(BLOCKY, seed + 1)
    assert abs((a @ b.H).trace()) <= l2_norm(a) * l2_norm(b) + 1e-10
    assert abs(l2_inner(a, b)) <= l2_norm(a) * l2_norm(b) + 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_weak_l1_dominated_by_l1(seed):
    a = rand_op(BLOCKY, seed)
    assert weak_l1(a) <= schatten_norm(a, 1) + 1e-10


def test_tail_trace_counts_strictly_above():
    alg = dense_algebra(2)
    a = Op(np.diag([1.0, 2.0]).astype(complex)[None], alg)
    assert tail_trace(a, 1.0) == pytest.approx(0.5)   # only the 2 survives
    assert tail_trace(a, 2.0) == pytest.approx(0.0)
    assert tail_trace(a, 0.5) == pytest.approx(1.0)


def test_abs_and_singular_values():
    a = rand_op(BLOCKY, 9)
    s = singular_values(a)
    assert np.all(np.diff(s[0]) <= 1e-12) or s[0].ndim == 1
    assert op_norm(abs_op(a)) == pytest.approx(op_norm(a), abs=1e-10)


def _proj_from(vs, alg):
    q, _ = np.linalg.qr(vs)
    return Op((q @ q.conj().T)[None], alg)


def test_meet_join_against_subspace_oracle():
    # [DERIVED] meet/join of random subspace projections equals projection
    # onto intersection/span computed by rank arithmetic
    alg = dense_algebra(4)
    rng = np.random.default_rng(5)
    v = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    p = _proj_from(v[:, :2], alg)
    q = _proj_from(v[:, 1:], alg)
    m = proj_meet([p, q])
    j = proj_join([p, q])
    assert is_projection(m) and is_projection(j)
    # shared column v[:,1]: intersection rank 1, span rank 3
    assert m.trace().real * 4 == pytest.approx(1.0, abs=1e-8)
    assert j.trace().real * 4 == pytest.approx(3.0, abs=1e-8)
    # meet <= each factor
    for f in (p, q):
        assert np.linalg.eigvalsh((f - m).blocks[0]).min() > -1e-10


def test_annihilation_check():
    alg = dense_algebra(2)
    p = Op(np.diag([1.0, 0.0]).astype(complex)[None], alg)
    f = Op(np.diag([0.0, 5.0]).astype(complex)[None], alg)
    assert annihilation_check(p, f)
    assert not annihilation_check(p, alg.unit())
