"""Three-part martingale decomposition at a threshold, its verification,
the row/column decomposition behind the weak-(1,1) transform bound, the
ergodic-average coefficients and the cross-term experiment."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cuculescu import (CuculescuSequence, PiFamily, cuculescu, delta_split,
                        pi_family, q_lambda)
from .errors import ContractViolation
from .martingale import (CoeffMatrix, Martingale, OperatorFamily, col_square,
                         row_square, transform_family)
from .opcore import (Op, annihilation_check, l2_norm, op_norm, schatten_norm,
                     tail_trace, weak_l1)


@dataclass
class GundyParts:
    d_alpha: list[Op]
    d_beta: list[Op]
    d_gamma: list[Op]
    seq: CuculescuSequence

    @property
    def martingale(self) -> Martingale:
        return self.seq.martingale

    def partial_sums(self, diffs: list[Op]) -> list[Op]:
        out = []
        acc = self.martingale.algebra.zero()
        for d in diffs:
            acc = acc + d
            out.append(acc)
        return out


def gundy(f: Martingale, lam: float) -> GundyParts:
    """Split f = alpha + beta + gamma at threshold lam.

    d_alpha_k = q_k df_k q_k - E_{k-1}(q_k df_k q_k)
    d_beta_k  = q_{k-1} df_k q_{k-1} - q_k df_k q_k + E_{k-1}(q_k df_k q_k)
    d_gamma_k = df_k - q_{k-1} df_k q_{k-1}
    """
    if lam <= 0:
        raise ContractViolation("gundy requires lambda > 0")
    seq = cuculescu(f, lam)
    d_alpha, d_beta, d_gamma = [], [], []
    for i, df in enumerate(f.diffs):
        qk = seq.qs[i]
        qp = seq.q_at(i - 1)
        core = qk @ df @ qk
        comp = f.expect_before(i, core)
        d_alpha.append(core - comp)
        d_beta.append(qp @ df @ qp - core + comp)
        d_gamma.append(df - qp @ df @ qp)
    return GundyParts(d_alpha, d_beta, d_gamma, seq)


def gundy_verify(parts: GundyParts) -> dict:
    """The three normalized quantities of the decomposition.

    The gamma term uses the certified dominating bound lam*tau(1 - q(lam)):
    supp* d_gamma_k <= 1 - q_{k-1} <= 1 - q(lam), certified via annihilation.
    """
    f = parts.martingale
    lam = parts.seq.lam
    denom = max(f.sup_l1(), 1e-300)
    alpha_sums = parts.partial_sums(parts.d_alpha)
    alpha_term = max(l2_norm(a) ** 2 for a in alpha_sums) / lam
    beta_term = sum(schatten_norm(d, 1) for d in parts.d_beta)
    q = q_lambda(parts.seq)
    scale = max(max((op_norm(df) for df in f.diffs), default=0.0), 1e-300)
    gamma_annihilated = all(annihilation_check(q, dg, tol=1e-10)
                            for dg in parts.d_gamma
                            if op_norm(dg) > 1e-12 * scale)
    gamma_term = lam * float((f.algebra.unit() - q).trace().real)
    return {
        "alpha": alpha_term / denom,
        "beta": beta_term / denom,
        "gamma": gamma_term / denom,
        "gamma_annihilated": gamma_annihilated,
    }


def default_l_range(f: Martingale) -> tuple[int, int]:
    sup = max(op_norm(fn) for fn in f.seq)
    l_max = int(np.ceil(np.log2(max(sup, 1e-12)))) + 1
    return (min(-2, l_max - 8), l_max)


def thmA1_decompose(f: Martingale, xi: CoeffMatrix,
                    l_range: tuple[int, int] | None = None,
                    pi: PiFamily | None = None):
    """Row/column split of the transform family.

    A_m = sum_k xi[k,m] Delta_r(df_k),  B_m = sum_k xi[k,m] Delta_c(df_k),
    so A_m + B_m = T_m exactly.  The martingale must be positive (callers
    with signed martingales shift by a multiple of the identity first; the
    applied shift is returned).
    """
    shift = 0.0
    work = f
    if not f.is_positive():
        from .opcore import positive_part_floor
        floor = min(positive_part_floor(fn) for fn in f.seq)
        shift = -floor + 1e-6
        work = Martingale(f.filtration, f.top + shift * f.algebra.unit())
    if pi is None:
        pi = pi_family(work, l_range or default_l_range(work))
    splits = [delta_split(df, pi) for df in f.diffs[:xi.k_max]]
    a_ops, b_ops = [], []
    for m in range(xi.m_max):
        am = f.algebra.zero()
        bm = f.algebra.zero()
        for k in range(xi.k_max):
            c = xi.entries[k, m]
            if c != 0:
                am = am + c * splits[k][0]
                bm = bm + c * splits[k][1]
        a_ops.append(am)
        b_ops.append(bm)
    return OperatorFamily(a_ops), OperatorFamily(b_ops), pi, shift


def weak11_experiment(f: Martingale, xi: CoeffMatrix,
                      lambda_exps: range | list[int]) -> dict:
    """Measured weak-(1,1) ratios for the row/column decomposition."""
    if xi.row_bound > 1.0 + 1e-9:
        raise ContractViolation("weak11 requires sup_k sum_m |xi_km|^2 <= 1")
    a_fam, b_fam, _, _ = thmA1_decompose(f, xi)
    denom = max(f.sup_l1(), 1e-300)
    row = row_square(a_fam)
    col = col_square(b_fam)
    best_row = max(2.0 ** e * tail_trace(row, 2.0 ** e) for e in lambda_exps)
    best_col = max(2.0 ** e * tail_trace(col, 2.0 ** e) for e in lambda_exps)
    return {
        "row_ratio": best_row / denom,
        "col_ratio": best_col / denom,
        "row_weak_l1": weak_l1(row) / denom,
        "col_weak_l1": weak_l1(col) / denom,
    }


def ergodic_coeffs(m_max: int) -> CoeffMatrix:
    """xi[k, m] = 1_{k <= m} * k / (sqrt(m) * (m+1)), 1-based indices."""
    if m_max < 1:
        raise ContractViolation("m_max >= 1 required")
    k = np.arange(1, m_max + 1)[:, None].astype(float)
    m = np.arange(1, m_max + 1)[None, :].astype(float)
    xi = np.where(k <= m, k / (np.sqrt(m) * (m + 1.0)), 0.0)
    return CoeffMatrix(xi.astype(complex))


def ergodic_row_bound(k_max: int, m_max: int | None = None) -> float:
    """sup_{k <= k_max} sum_{m=k}^{m_max} k^2/(m (m+1)^2) by direct summation."""
    if m_max is None:
        m_max = k_max
    m = np.arange(1, m_max + 1).astype(float)
    w = 1.0 / (m * (m + 1.0) ** 2)
    suffix = np.cumsum(w[::-1])[::-1]
    k = np.arange(1, k_max + 1).astype(float)
    return float((k ** 2 * suffix[:k_max]).max())


def cross_experiment(f: Martingale, rho: CoeffMatrix, eta: CoeffMatrix,
                     p: int = 4) -> dict:
    """Cross-term transform T_{mn} f = sum_k rho[k,m] eta[k,n] df_k.

    Measures ||sum T_{mn} f (x) e_{m,n}||_p against the flattened row/column
    square-function norms (the flattening index is (m, n)).
    """
    for c in (rho, eta):
        if np.abs(c.row_sums() - 1.0).max() > 1e-10:
            raise ContractViolation("cross_experiment requires unit rows")
    if p != 4:
        raise ContractViolation("cross experiment is exercised at p = 4")
    kmax = min(rho.k_max, eta.k_max, len(f.diffs))
    flat = np.einsum("km,kn->kmn", rho.entries[:kmax], eta.entries[:kmax])
    flat = flat.reshape(kmax, -1)
    fam = transform_family(f, CoeffMatrix(flat))
    # ||B||_4 with B = sum T_mn (x) e_{m,n}: per block, assemble
    # (B*B)[n,n'] = sum_m T_mn* T_mn' and take tr((B*B)^2).
    M_m, M_n = rho.m_max, eta.m_max
    alg = f.algebra
    val4 = 0.0
    mats = np.stack([g.blocks for g in fam])  # (M_m*M_n, nb, d, d)
    mats = mats.reshape(M_m, M_n, alg.nblocks, alg.d, alg.d)
    for b in range(alg.nblocks):
        tb = mats[:, :, b]                    # (M_m, M_n, d, d)
        bstar_b = np.einsum("mnab,mqac->nqbc", tb.conj(), tb)
        big = bstar_b.transpose(0, 2, 1, 3).reshape(M_n * alg.d, M_n * alg.d)
        val4 += alg.weights[b] * float(np.trace(big @ big).real)
    lhs = val4 ** 0.25
    row = schatten_norm(row_square(fam), p)
    col = schatten_norm(col_square(fam), p)
    return {
        "lhs": lhs,
        "row": row,
        "col": col,
        "ratio": lhs / max(row + col, 1e-300),
    }
