import numpy as np
import pytest

from nclp.errors import ContractViolation
from nclp.gundy import (cross_experiment, ergodic_coeffs, ergodic_row_bound,
                        gundy, gundy_verify, thmA1_decompose,
                        weak11_experiment)
from nclp.harness import (random_coeffs, random_positive_martingale,
                          trial_rng)
from nclp.filtration import GridFiltration, TensorDyadicFiltration
from nclp.martingale import CoeffMatrix, Martingale
from nclp.opcore import annihilation_check, l2_norm


def _mart(seed, filt=None):
    filt = filt or TensorDyadicFiltration(3)
    return random_positive_martingale(filt, trial_rng(seed, 0))


def test_parts_sum_to_differences():
    f = _mart(30)
    parts = gundy(f, 1.0)
    for da, db, dg, df in zip(parts.d_alpha, parts.d_beta, parts.d_gamma,
                              f.diffs):
        assert (da + db + dg - df).max_abs() < 1e-10


def test_alpha_is_conditionally_centered():
    f = _mart(31)
    parts = gundy(f, 1.0)
    for i, da in enumerate(parts.d_alpha):
        assert f.expect_before(i, da).max_abs() < 1e-10


def test_gamma_annihilated_by_final_projection():
    f = _mart(32)
    for lam in (0.5, 1.0, 2.0):
        rep = gundy_verify(gundy(f, lam))
        assert rep["gamma_annihilated"]
        assert rep["gamma"] <= 1.0 + 1e-9  # lam*tau(1-q) <= ||f||_1


def test_high_threshold_gives_trivial_split():
    # above sup||f_n||_inf every q_n is the unit: beta and gamma vanish
    f = _mart(33)
    parts = gundy(f, 1e6)
    for db, dg in zip(parts.d_beta, parts.d_gamma):
        assert db.max_abs() < 1e-9
        assert dg.max_abs() < 1e-9


def test_gundy_rejects_bad_lambda():
    with pytest.raises(ContractViolation):
        gundy(_mart(34), 0.0)


def test_thmA1_split_is_exact():
    f = _mart(35)
    xi = random_coeffs(4, 3, trial_rng(36, 0), "row-le-one")
    a_fam, b_fam, pi, shift = thmA1_decompose(f, xi)
    assert shift == 0.0
    for m in range(xi.m_max):
        tm = f.algebra.zero()
        for k in range(xi.k_max):
            tm = tm + xi.entries[k, m] * f.diffs[k]
        assert (a_fam[m] + b_fam[m] - tm).max_abs() < 1e-8


def test_thmA1_shifts_signed_martingales():
    f = _mart(37)
    signed = Martingale(f.filtration,
                        f.top - 2.0 * f.algebra.unit())
    xi = random_coeffs(4, 3, trial_rng(38, 0), "row-le-one")
    a_fam, b_fam, _, shift = thmA1_decompose(signed, xi)
    assert shift > 0.0
    # the split still reproduces the transforms of the *original* input
    for m in range(xi.m_max):
        tm = signed.algebra.zero()
        for k in range(xi.k_max):
            tm = tm + xi.entries[k, m] * signed.diffs[k]
        assert (a_fam[m] + b_fam[m] - tm).max_abs() < 1e-8


def test_weak11_requires_contractive_rows():
    f = _mart(39)
    xi = CoeffMatrix(2.0 * np.eye(4, 3, dtype=complex))
    with pytest.raises(ContractViolation):
        weak11_experiment(f, xi, range(-2, 3))


def test_weak11_ratios_finite_and_ordered():
    f = _mart(40)
    xi = random_coeffs(4, 3, trial_rng(41, 0), "row-le-one")
    rep = weak11_experiment(f, xi, range(-2, 5))
    assert 0.0 <= rep["row_ratio"] <= rep["row_weak_l1"] + 1e-12
    assert 0.0 <= rep["col_ratio"] <= rep["col_weak_l1"] + 1e-12


def test_ergodic_coeffs_values():
    xi = ergodic_coeffs(4)
    # [DERIVED] closed form at (k, m) = (2, 3): 2 / (sqrt(3) * 4)
    assert xi.entries[1, 2] == pytest.approx(2.0 / (np.sqrt(3.0) * 4.0))
    assert xi.entries[3, 1] == 0.0  # upper-triangular support k <= m
    assert xi.row_bound <= 1.0 + 1e-12


def test_ergodic_row_bound_matches_rows():
    xi = ergodic_coeffs(50)
    assert ergodic_row_bound(50) == pytest.approx(float(xi.row_sums().max()))
    # the sup over m_max -> infinity of row k sums k^2 sum_{m>=k} 1/(m(m+1)^2)
    # stays below 1 (each tail is < k^2 * integral_{k-1}^\infty dm/m^3)
    assert ergodic_row_bound(200, 4000) < 1.0


def test_cross_experiment_requires_unit_rows():
    f = _mart(42)
    bad = random_coeffs(4, 3, trial_rng(43, 0), "row-le-one")
    with pytest.raises(ContractViolation):
        cross_experiment(f, bad, bad)


def test_cross_experiment_ratio():
    f = _mart(44)
    rho = random_coeffs(4, 3, trial_rng(45, 0), "row-eq-one")
    eta = random_coeffs(4, 2, trial_rng(46, 1), "row-eq-one")
    rep = cross_experiment(f, rho, eta)
    assert rep["lhs"] > 0.0
    assert rep["ratio"] <= 1.0 + 1e-9


def test_cross_experiment_rank_one_oracle():
    # [DERIVED] with a single coefficient rho = eta = e_{11}, the flattened
    # family is {df_0} and lhs = ||df_0||_4 = row = col contribution
    f = _mart(47)
    one = CoeffMatrix(np.ones((1, 1), dtype=complex))
    rep = cross_experiment(f, one, one)
    from nclp.opcore import schatten_norm
    from nclp.martingale import row_square
    direct = schatten_norm(f.diffs[0], 4)
    assert rep["lhs"] == pytest.approx(direct, rel=1e-9)
