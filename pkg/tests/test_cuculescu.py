import numpy as np
import pytest

from nclp.cuculescu import (cuculescu, cuculescu_report, delta_split,
                            delta_trunc, pi_family, q_lambda)
from nclp.errors import ContractViolation
from nclp.filtration import GridFiltration, TensorDyadicFiltration
from nclp.harness import random_positive_martingale, trial_rng
from nclp.martingale import Martingale
from nclp.opcore import Op, annihilation_check, is_projection, l2_norm, op_norm


def naive_cuculescu(f, lam):
    """Independent oracle: project out eigenvectors of q f q above lam,
    forcing the complement of range(q) out with a large penalty."""
    alg = f.algebra
    qs = []
    q = alg.unit()
    big = 1e6
    for fn in f.seq:
        comp = (q @ fn @ q + big * (alg.unit() - q)).hermitize()
        w, v = np.linalg.eigh(comp.blocks)
        keep = w <= lam + 1e-9
        blocks = np.einsum("bik,bk,bjk->bij", v, keep.astype(float), v.conj())
        q = Op(blocks, alg)
        qs.append(q)
    return qs


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_matches_naive_oracle(lam):
    filt = TensorDyadicFiltration(3)
    f = random_positive_martingale(filt, trial_rng(11, 0))
    seq = cuculescu(f, lam)
    for q, q_ref in zip(seq.qs, naive_cuculescu(f, lam)):
        assert (q - q_ref).max_abs() < 1e-8


def test_projections_decrease():
    filt = TensorDyadicFiltration(3)
    f = random_positive_martingale(filt, trial_rng(12, 0))
    seq = cuculescu(f, 1.0)
    prev = f.algebra.unit()
    for q in seq.qs:
        assert is_projection(q, tol=1e-9)
        assert np.linalg.eigvalsh((prev - q).blocks).min() > -1e-10
        prev = q


def test_classical_properties_report():
    filt = GridFiltration(1, 3, 2)
    f = random_positive_martingale(filt, trial_rng(13, 0))
    for lam in (0.25, 1.0, 4.0):
        rep = cuculescu_report(cuculescu(f, lam))
        assert rep["commutator"] < 1e-8
        assert rep["compression_excess"] < 1e-8
        assert lam * rep["tail_trace"] <= f.sup_l1() + 1e-8


def test_scalar_stopping_time_oracle():
    # [DERIVED] d = 1 grid reduces to the classical dyadic stopping time:
    # q_n is the indicator of cells whose running averages stayed <= lam
    filt = GridFiltration(1, 3, 1)
    vals = np.array([0.1, 0.2, 3.0, 0.4, 0.5, 0.6, 0.7, 0.8])
    f = Martingale(filt, Op(vals.astype(complex)[:, None, None],
                            filt.algebra))
    seq = cuculescu(f, 1.0)
    hit = np.zeros(8, dtype=bool)
    for k in range(4):
        avg = vals.reshape(2 ** k, -1).mean(axis=1)
        hit |= np.repeat(avg > 1.0 + 1e-9, 8 // 2 ** k)
        got = seq.qs[k].blocks[:, 0, 0].real
        assert np.allclose(got, (~hit).astype(float))


def test_halfopen_convention_differs_on_kernel():
    # an eigenvalue exactly 0 is kept by the closed convention and dropped
    # by the half-open one
    filt = GridFiltration(1, 1, 2)
    blocks = np.stack([np.diag([0.0, 0.5]), np.diag([0.5, 0.0])]).astype(complex)
    f = Martingale(filt, Op(blocks, filt.algebra))
    closed = cuculescu(f, 0.25, convention="closed")
    halfopen = cuculescu(f, 0.25, convention="half-open")
    assert closed.qs[-1].trace().real > halfopen.qs[-1].trace().real


def test_q_lambda_meet():
    filt = TensorDyadicFiltration(3)
    f = random_positive_martingale(filt, trial_rng(14, 0))
    seq = cuculescu(f, 1.0)
    q = q_lambda(seq)
    for qn in seq.qs:
        assert np.linalg.eigvalsh((qn - q).blocks).min() > -1e-10


def test_pi_family_partitions_unity():
    filt = TensorDyadicFiltration(3)
    f = random_positive_martingale(filt, trial_rng(15, 0))
    pi = pi_family(f, (-2, 3))
    total = f.algebra.zero()
    for ell in pi.indices():
        b = pi.blocks[ell]
        total = total + b
        assert is_projection(b, tol=1e-8)
    assert (total - f.algebra.unit()).max_abs() < 1e-8


def test_pi_family_range_too_small():
    filt = TensorDyadicFiltration(3)
    f = random_positive_martingale(filt, trial_rng(16, 0))
    f = Martingale(filt, 100.0 * f.top)
    with pytest.raises(ContractViolation):
        pi_family(f, (-2, 3))      # 2^3 < sup ||f||_inf


def test_delta_split_is_exact_partition():
    filt = TensorDyadicFiltration(3)
    f = random_positive_martingale(filt, trial_rng(17, 0))
    pi = pi_family(f, (-2, 3))
    rng = np.random.default_rng(18)
    alg = f.algebra
    x = Op(rng.standard_normal((alg.nblocks, alg.d, alg.d))
           + 1j * rng.standard_normal((alg.nblocks, alg.d, alg.d)), alg)
    r, c = delta_split(x, pi)
    assert (r + c - x).max_abs() < 1e-10
    # triangular truncations are L2 contractions and orthogonal pieces
    assert l2_norm(r) <= l2_norm(x) + 1e-10
    assert l2_norm(c) <= l2_norm(x) + 1e-10
    assert l2_norm(r) ** 2 + l2_norm(c) ** 2 == pytest.approx(
        l2_norm(x) ** 2, rel=1e-10)


def test_delta_trunc_contraction_and_nesting():
    filt = TensorDyadicFiltration(3)
    f = random_positive_martingale(filt, trial_rng(19, 0))
    pi = pi_family(f, (-2, 3))
    rng = np.random.default_rng(20)
    alg = f.algebra
    x = Op(rng.standard_normal((alg.nblocks, alg.d, alg.d)) + 0j, alg)
    prev = None
    for ell in pi.indices():
        tr = delta_trunc(x, pi, ell)
        assert l2_norm(tr) <= l2_norm(x) + 1e-10
        prev = tr
    r, _ = delta_split(x, pi)
    assert (prev - r).max_abs() < 1e-10   # full truncation = row part
