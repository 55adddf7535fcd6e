import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nclp.errors import ContractViolation
from nclp.filtration import GridFiltration, TensorDyadicFiltration
from nclp.martingale import (CoeffMatrix, Martingale, bmo_norms, col_square,
                             dirac_coeffs, function_bmo, l2_identity_check,
                             lp_rc_norm, partition_coeffs, row_square,
                             split_upper_bound, transform_family)
from nclp.opcore import Op, l2_norm, op_norm

FILT = TensorDyadicFiltration(3)


def rand_mart(seed, filt=FILT, hermitian=True):
    rng = np.random.default_rng(seed)
    alg = filt.algebra
    b = rng.standard_normal((alg.nblocks, alg.d, alg.d)) \
        + 1j * rng.standard_normal((alg.nblocks, alg.d, alg.d))
    top = Op(b, alg)
    return Martingale(filt, top.hermitize() if hermitian else top)


def test_differences_telescope():
    f = rand_mart(0)
    total = f.algebra.zero()
    for d in f.diffs:
        total = total + d
    assert (total - f.top).max_abs() < 1e-12
    assert len(f.diffs) == len(f.levels)


def test_first_difference_is_first_level():
    f = rand_mart(1)
    assert (f.diffs[0] - f.seq[0]).max_abs() == 0


def test_differences_are_orthogonal():
    f = rand_mart(2)
    for i in range(len(f.diffs)):
        for j in range(i):
            inner = (f.diffs[i] @ f.diffs[j].H).trace()
            assert abs(inner) < 1e-12
    # and each is conditionally centered
    for i, d in enumerate(f.diffs):
        assert f.expect_before(i, d).max_abs() < 1e-12


def test_energy_identity():
    f = rand_mart(3)
    assert l2_norm(f.top) ** 2 == pytest.approx(
        sum(l2_norm(d) ** 2 for d in f.diffs), rel=1e-12)


def test_coeff_matrix_presets():
    d = dirac_coeffs(4)
    assert d.entries.shape[1] == 4
    assert np.allclose(d.row_sums(), 1.0)
    p = partition_coeffs(4, [[0, 2], [1, 3]])
    assert set(np.unique(p.entries)) <= {0.0, 1.0}
    assert np.allclose(p.row_sums(), 1.0)
    assert p.row_bound <= 1.0 + 1e-14


def test_transform_family_dirac_recovers_differences():
    f = rand_mart(4)
    fam = transform_family(f, dirac_coeffs(len(f.diffs)))
    for m, g in enumerate(fam):
        assert (g - f.diffs[m]).max_abs() < 1e-14


def test_transform_too_many_rows_rejected():
    f = rand_mart(5)
    xi = CoeffMatrix(np.ones((len(f.diffs) + 1, 1)))
    with pytest.raises(ContractViolation):
        transform_family(f, xi)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_l2_isometry_unit_rows(seed):
    rng = np.random.default_rng(seed)
    f = rand_mart(seed)
    e = rng.standard_normal((len(f.diffs), 3))
    e /= np.sqrt((e ** 2).sum(axis=1, keepdims=True))
    assert l2_identity_check(f, CoeffMatrix(e)) < 1e-10 * l2_norm(f.top) ** 2


def test_row_col_square_oracle():
    # [DERIVED] for a single self-adjoint g, both squares equal |g|
    f = rand_mart(6)
    fam = transform_family(f, dirac_coeffs(len(f.diffs)))
    g = fam[1]
    from nclp.opcore import abs_op
    r = row_square(transform_family(f, CoeffMatrix(
        np.eye(len(f.diffs))[:, 1:2])))
    assert (r - abs_op(g)).max_abs() < 1e-8


def test_lp_rc_norm_rejects_small_p():
    f = rand_mart(7)
    fam = transform_family(f, dirac_coeffs(len(f.diffs)))
    with pytest.raises(ContractViolation):
        lp_rc_norm(fam, 1.5)
    # p = 2 recovers the flat L2 norm of the family
    flat = np.sqrt(sum(l2_norm(g) ** 2 for g in fam))
    assert lp_rc_norm(fam, 2) == pytest.approx(flat, rel=1e-9)


def test_split_upper_bound_dominates():
    f = rand_mart(8)
    fam = transform_family(f, dirac_coeffs(len(f.diffs)))
    bound = split_upper_bound(fam, fam, 4)
    assert bound >= lp_rc_norm(fam, 4) - 1e-9


def test_bmo_constant_martingale_is_zero():
    one = FILT.algebra.unit()
    f = Martingale(FILT, 3.0 * one)
    assert bmo_norms(f)[2] < 1e-12


def test_bmo_dominates_l2_difference_tail():
    # sup_n ||E_n sum_{k>=n} |df_k|^2|| >= its trace at n = 0
    f = rand_mart(9)
    _, _, b = bmo_norms(f)
    tail = sum(l2_norm(d) ** 2 for d in f.diffs[1:])
    assert b ** 2 >= tail - 1e-10


def test_function_bmo_constant_zero_and_haar_oracle():
    filt = GridFiltration(1, 3, 1)
    const = Op(np.ones((8, 1, 1), dtype=complex), filt.algebra)
    br, bc = function_bmo(filt, const)
    assert max(br, bc) < 1e-12
    # [DERIVED] first Haar function: oscillation 1 on the full cube, 0 on
    # dyadic halves; the half-shifted grid sees the jump at cube scale 1/2
    haar = np.ones(8)
    haar[4:] = -1.0
    h = Op(haar.astype(complex)[:, None, None], filt.algebra)
    br, bc = function_bmo(filt, h)
    assert br == pytest.approx(1.0, abs=1e-12)
    assert bc == pytest.approx(br, abs=1e-12)
