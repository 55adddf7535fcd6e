"""Hilbert-space-valued kernels on the dyadic torus grid (n = 1), their
discretized singular-integral operators, shifted quasi-orthogonal pieces,
kernel-identity and almost-orthogonality bounds, the paraproduct reduction,
and the commutative and semicommutative localization checks."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _accel
from .errors import ContractViolation, NumericError
from .filtration import GridFiltration
from .martingale import Martingale
from .opcore import Op, l2_norm, op_norm, proj_join

# ---------------------------------------------------------------------------
# dyadic averaging on the scalar grid
# ---------------------------------------------------------------------------


def e_level(f: np.ndarray, k: int) -> np.ndarray:
    """Average a grid function (cells along axis 0) over level-k cubes."""
    N = f.shape[0]
    L = N // (1 << k)
    shp = (1 << k, L) + f.shape[1:]
    m = f.reshape(shp).mean(axis=1, keepdims=True)
    return np.broadcast_to(m, shp).reshape(f.shape).copy()


def delta_level(f: np.ndarray, j: int) -> np.ndarray:
    """Martingale difference at level j >= 1 (level 0 differences from zero)."""
    if j == 0:
        return e_level(f, 0)
    return e_level(f, j) - e_level(f, j - 1)


def avg_rows(X: np.ndarray, k: int) -> np.ndarray:
    """Block-average the output (row) index of kernel matrices (..., N, N)."""
    N = X.shape[-2]
    L = N // (1 << k)
    shp = X.shape[:-2] + (1 << k, L, X.shape[-1])
    m = X.reshape(shp).mean(axis=-2, keepdims=True)
    return np.broadcast_to(m, shp).reshape(X.shape).copy()


def avg_cols(X: np.ndarray, k: int) -> np.ndarray:
    N = X.shape[-1]
    L = N // (1 << k)
    shp = X.shape[:-1] + (1 << k, L)
    m = X.reshape(shp).mean(axis=-1, keepdims=True)
    return np.broadcast_to(m, shp).reshape(X.shape).copy()


def grid_l2(f: np.ndarray, K: int) -> float:
    """L2 norm with the cell measure 2^{-K} (extra axes summed)."""
    return float(np.sqrt(2.0 ** (-K) * (np.abs(f) ** 2).sum()))


# ---------------------------------------------------------------------------
# kernel families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HilbertKernel:
    """M-component kernel (x, y) -> C^M with declared size/smoothness data."""

    family: str                  # "lp-bumps" | "hilbert" | "annuli"
    M: int
    gamma: float
    C1: float
    C2: float
    cutoff: float = 0.0          # only used by the Hilbert-type family

    def evaluate(self, diff: np.ndarray) -> np.ndarray:
        if self.family == "lp-bumps":
            return _accel.lp_bumps_components(diff, self.M)
        if self.family == "hilbert":
            vals = _accel.hilbert_component(diff, self.cutoff)
            taper = np.clip(2.0 * (1.0 - np.abs(diff) / self.cutoff), 0.0, 1.0)
            return vals * taper[None, :, :]
        raise ContractViolation(
            f"kernel family {self.family!r} has no pointwise evaluator")


def lp_bumps_kernel(M: int) -> HilbertKernel:
    """Mean-zero dilated odd bumps k_m = 2^m phi(2^m t), gamma = 1."""
    return HilbertKernel("lp-bumps", M, gamma=1.0, C1=1.0, C2=16.0)


def hilbert_kernel(cutoff: float = 0.25) -> HilbertKernel:
    """Single-component truncated odd 1/t kernel with a Lipschitz taper."""
    return HilbertKernel("hilbert", 1, gamma=1.0, C1=1.0, C2=12.0,
                         cutoff=cutoff)


def annuli_kernel(K: int) -> HilbertKernel:
    """Dyadic frequency multipliers; realized in frequency space, no
    pointwise evaluator."""
    return HilbertKernel("annuli", K, gamma=1.0, C1=np.nan, C2=np.nan)


# ---------------------------------------------------------------------------
# discretized operators
# ---------------------------------------------------------------------------

@dataclass
class DiscOp:
    """Matrix realization of L2(grid) -> L2(grid) (x) C^M.

    ``mats[m, i, j]`` includes the quadrature measure 2^{-K}; the kernel
    value at (x_i, y_j) is mats[m, i, j] * 2^K.
    """

    mats: np.ndarray             # (M, N, N)
    K: int
    kernel: HilbertKernel | None
    eps: float
    normalization: float = 1.0   # divisor applied to the raw assembly

    @property
    def N(self) -> int:
        return 2 ** self.K

    @property
    def M(self) -> int:
        return self.mats.shape[0]

    @property
    def measure(self) -> float:
        return 2.0 ** (-self.K)

    def apply(self, f: np.ndarray) -> np.ndarray:
        """(M, N, ...) result of T f for cellwise data f of shape (N, ...)."""
        return np.einsum("mij,j...->mi...", self.mats, f)

    def adjoint_mats(self) -> np.ndarray:
        return self.mats.conj().transpose(0, 2, 1)


def assemble(kernel: HilbertKernel, K: int, eps: float = 0.0) -> DiscOp:
    """Midpoint-quadrature assembly with hard zero on the diagonal and on
    torus distance <= eps."""
    if K < 2:
        raise ContractViolation("grid depth K >= 2 required")
    N = 2 ** K
    if kernel.family == "annuli":
        return _assemble_annuli(kernel, K, eps)
    diff = _accel.torus_diff_1d(N)
    vals = kernel.evaluate(diff)
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals))[0]
        raise NumericError(f"kernel evaluation not finite at {tuple(bad)}")
    mats = (2.0 ** (-K)) * vals
    dist = np.abs(diff)
    kill = dist <= eps
    np.fill_diagonal(kill, True)
    mats = np.where(kill[None, :, :], 0.0, mats)
    return DiscOp(mats, K, kernel, float(eps))


def _assemble_annuli(kernel: HilbertKernel, K: int, eps: float) -> DiscOp:
    N = 2 ** K
    freqs = np.fft.fftfreq(N, d=1.0 / N).astype(int)
    eye_hat = np.fft.fft(np.eye(N), axis=0)
    mats = np.empty((K, N, N), dtype=complex)
    for k in range(K):
        lo, hi = 2 ** k, 2 ** (k + 1)
        mask = ((freqs >= lo) & (freqs < hi)) | ((freqs > -hi) & (freqs <= -lo))
        mats[k] = np.fft.ifft(mask[:, None] * eye_hat, axis=0)
    return DiscOp(mats, K, kernel, float(eps))


def truncated_mats(T: DiscOp, eps: float) -> np.ndarray:
    """Entries of T_eps: zero where torus distance <= eps."""
    dist = _accel.torus_dist_1d(T.N)
    return np.where(dist[None, :, :] <= eps, 0.0, T.mats)


# -- operator norms ----------------------------------------------------------

def power_iteration(G: np.ndarray, min_iters: int = 200,
                    max_iters: int = 2000, tol: float = 1e-10) -> float:
    """Largest eigenvalue of a PSD matrix from a fixed deterministic start.

    The start is all-ones plus a small fixed ramp; the bare all-ones vector
    lies in the kernel of mean-zero convolution operators, so a deterministic
    tie-breaker is required for reproducible convergence.
    """
    n = G.shape[0]
    v = np.ones(n, dtype=G.dtype) + 1e-3 * np.linspace(0.0, 1.0, n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(max_iters):
        w = G @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new = float(np.real(np.vdot(v, w)))
        v = w / nw
        if it >= min_iters and abs(new - lam) <= tol * max(abs(new), 1e-300):
            lam = new
            break
        lam = new
    return max(lam, 0.0)


def family_gram(mats: np.ndarray) -> np.ndarray:
    return np.einsum("mki,mkj->ij", mats.conj(), mats)


def estimate_norm(mats: np.ndarray) -> float:
    return float(np.sqrt(power_iteration(family_gram(mats))))


def normalized(T: DiscOp) -> DiscOp:
    est = estimate_norm(T.mats)
    if est <= 0:
        raise NumericError("cannot normalize a zero operator")
    return replace(T, mats=T.mats / est, normalization=T.normalization * est)


# ---------------------------------------------------------------------------
# shifted quasi-orthogonal pieces
# ---------------------------------------------------------------------------

def _check_s(T: DiscOp, s: int):
    if not 1 <= s < T.K:
        raise ContractViolation(f"shift s = {s} outside 1..{T.K - 1}")


def ekt_delta(mats: np.ndarray, k: int, j: int) -> np.ndarray:
    """E_k T Delta_j as kernel matrices (row-average, column-difference)."""
    cols = avg_cols(mats, j) - avg_cols(mats, j - 1)
    return avg_rows(cols, k)


def phi_s(T: DiscOp, s: int) -> DiscOp:
    """sum_{k=0}^{K-s} E_k T Delta_{k+s}."""
    _check_s(T, s)
    acc = np.zeros_like(T.mats)
    for k in range(0, T.K - s + 1):
        acc += ekt_delta(T.mats, k, k + s)
    return replace(T, mats=acc)


def psi_s(T: DiscOp, s: int) -> DiscOp:
    """sum_{k=0}^{K-s} (id - E_k) T_{4*2^{-k}} Delta_{k+s}."""
    _check_s(T, s)
    acc = np.zeros_like(T.mats)
    for k in range(0, T.K - s + 1):
        eps_k = 4.0 * 2.0 ** (-k)
        if eps_k >= 0.5:   # torus l-inf diameter: the truncation empties T
            continue
        tk = truncated_mats(T, eps_k)
        cols = avg_cols(tk, k + s) - avg_cols(tk, k + s - 1)
        acc += cols - avg_rows(cols, k)
    return replace(T, mats=acc)


def lambda_family(T: DiscOp, s: int) -> list[np.ndarray]:
    """The Cotlar family Lambda_{s,k} = E_k T Delta_{k+s}."""
    _check_s(T, s)
    return [ekt_delta(T.mats, k, k + s) for k in range(0, T.K - s + 1)]


# ---------------------------------------------------------------------------
# kernel identity and Schur data for E_k T Delta_{k+s}
# ---------------------------------------------------------------------------

def ksk_check(T: DiscOp, s: int, k: int, n_pairs: int,
              rng: np.random.Generator) -> dict:
    """Compare assembled E_k T Delta_{k+s} entries with the two-bump formula
    <T psi_{Qhat_y}, phi_{R_x}> on sampled pairs."""
    _check_s(T, s)
    N = T.N
    A = ekt_delta(T.mats, k, k + s)
    Lr = N // (1 << k)            # cells per level-k cube
    Lq = N // (1 << (k + s))      # cells per level-(k+s) cube
    resid = 0.0
    size_ratio = 0.0
    mids = (np.arange(N) + 0.5) / N
    for _ in range(n_pairs):
        i = int(rng.integers(0, N))
        j = int(rng.integers(0, N))
        qy = j // Lq
        sib = qy ^ 1
        psi = np.zeros(N)
        scale = 1.0 / (2.0 * Lq / N)      # 1/|Qhat_y|
        psi[qy * Lq:(qy + 1) * Lq] = scale
        psi[sib * Lq:(sib + 1) * Lq] = -scale
        tpsi = T.apply(psi)               # (M, N)
        rx = i // Lr
        lhs = A[:, i, j] / T.measure      # kernel value
        rhs = tpsi[:, rx * Lr:(rx + 1) * Lr].mean(axis=1)
        resid = max(resid, float(np.abs(lhs - rhs).max()))
        # size sanity for y outside 3R_x
        d = abs(mids[i] - mids[j])
        d = min(d, 1.0 - d)
        if d > 1.5 * Lr / N:
            norm = float(np.linalg.norm(lhs))
            bound = 2.0 ** (-T.kernel.gamma * (k + s)) / d ** (1 + T.kernel.gamma)
            size_ratio = max(size_ratio, norm / max(bound, 1e-300))
    return {"max_residual": resid, "size_constant": size_ratio}


def schur_bound(T: DiscOp | np.ndarray) -> float:
    """sqrt(||S1||_inf ||S2||_inf) from the component-l2 kernel norms."""
    mats = T.mats if isinstance(T, DiscOp) else T
    norms = np.sqrt((np.abs(mats) ** 2).sum(axis=0))
    s1 = norms.sum(axis=1).max()
    s2 = norms.sum(axis=0).max()
    return float(np.sqrt(s1 * s2))


def cotlar_bound(family: list[np.ndarray]) -> float:
    """sum over offsets d of sqrt(max pairwise composition norm at offset d).

    For maps L2 -> L2(H) the two compositions are L_i* L_j (computed
    directly) and L_i L_j*, whose norm squared equals the spectral radius
    of (L_i* L_i)(L_j* L_j)."""
    F = len(family)
    if F == 0:
        return 0.0
    grams = [np.einsum("mki,mkj->ij", A.conj(), A) for A in family]
    best: dict[int, float] = {}
    for i in range(F):
        for j in range(F):
            x = np.einsum("mki,mkj->ij", family[i].conj(), family[j])
            n1 = float(np.sqrt(power_iteration(x.conj().T @ x)))
            n2 = float(np.sqrt(abs(power_iteration(grams[i] @ grams[j]))))
            d = i - j
            best[d] = max(best.get(d, 0.0), n1, n2)
    return float(sum(np.sqrt(v) for v in best.values()))


def schur_integrals_decay(T: DiscOp, s_range, k_range) -> dict:
    """Row/column kernel integrals of E_k T Delta_{k+s} across shifts."""
    gamma = T.kernel.gamma if T.kernel else 1.0
    rows = []
    for s in s_range:
        for k in k_range:
            if k + s > T.K:
                continue
            A = ekt_delta(T.mats, k, k + s)
            norms = np.sqrt((np.abs(A) ** 2).sum(axis=0))
            s1 = float(norms.sum(axis=1).max())
            s2 = float(norms.sum(axis=0).max())
            rows.append({"s": s, "k": k,
                         "S1": s1, "S2": s2,
                         "S1_normalized": (2.0 ** (gamma * s)) * s1 / s,
                         "S2_normalized": s2 / s})
    return {
        "rows": rows,
        "max_S1_normalized": max(r["S1_normalized"] for r in rows),
        "max_S2_normalized": max(r["S2_normalized"] for r in rows),
    }


# ---------------------------------------------------------------------------
# paraproduct
# ---------------------------------------------------------------------------

def adjoint_one(T: DiscOp) -> np.ndarray:
    """rho = T*1 componentwise: rho[y, m] = int conj(k_m(x, y)) dx."""
    return T.mats.conj().sum(axis=1).T.copy()    # (N, M)


def paraproduct(rho: np.ndarray, f: np.ndarray, K: int) -> np.ndarray:
    """Pi_rho(f) = sum_j Delta_j(rho) E_{j-1}(f), H-valued output (N, M)."""
    out = np.zeros_like(rho)
    for j in range(1, K + 1):
        out += delta_level(rho, j) * e_level(f, j - 1)[:, None]
    return out


def paraproduct_adjoint(rho: np.ndarray, f: np.ndarray, K: int) -> np.ndarray:
    """Pi_rho*(f) = sum_j E_{j-1}( conj(Delta_j rho) f ) per component."""
    out = np.zeros_like(rho)
    for j in range(1, K + 1):
        out += e_level(delta_level(rho, j).conj() * f[:, None], j - 1)
    return out


def paraproduct_adjoint_mats(rho: np.ndarray, K: int) -> np.ndarray:
    """Matrix realization of Pi_rho* as a map L2 -> L2 (x) C^M."""
    N, M = rho.shape
    out = np.zeros((M, N, N), dtype=rho.dtype)
    for j in range(1, K + 1):
        d = delta_level(rho, j).conj()       # (N, M)
        L = N // (1 << (j - 1))
        for b in range(0, N, L):
            out[:, b:b + L, b:b + L] += d[b:b + L].T[:, None, :] / L
    return out


def paraproduct_correction(T: DiscOp) -> tuple[DiscOp, np.ndarray]:
    """T0 = T - Pi_rho* with rho = T*1; returns (T0, rho)."""
    rho = adjoint_one(T)
    pi = paraproduct_adjoint_mats(rho, T.K)
    return replace(T, mats=T.mats - pi), rho


def rho_bmo(rho: np.ndarray, K: int) -> float:
    """Dyadic BMO of the scalarized R = sum_j ||d_j rho(x)|| r_j."""
    sq = np.zeros(rho.shape[0])
    best = 0.0
    # accumulate sum_{j>l} ||d_j rho||^2 from the top level downwards
    tails = [np.zeros(rho.shape[0])]
    for j in range(K, 0, -1):
        sq = sq + (np.abs(delta_level(rho, j)) ** 2).sum(axis=1)
        tails.append(sq.copy())
    tails = tails[::-1]   # tails[l] = sum_{j > l} ||d_j rho||^2
    for lev in range(0, K + 1):
        best = max(best, float(e_level(tails[lev], lev).max()))
    return float(np.sqrt(best))


def paraproduct_bound_report(T: DiscOp, f: np.ndarray) -> dict:
    rho = adjoint_one(T)
    out = paraproduct(rho, f, T.K)
    lhs = float(np.sqrt(T.measure * (np.abs(out) ** 2).sum()))
    bmo = rho_bmo(rho, T.K)
    f2 = float(np.sqrt(T.measure * (np.abs(f) ** 2).sum()))
    return {"lhs": lhs, "bound": bmo * f2, "slack": bmo * f2 - lhs}


# ---------------------------------------------------------------------------
# localization sets and checks
# ---------------------------------------------------------------------------

@dataclass
class SigmaSet:
    omega: dict                  # level k -> boolean cell mask (union of cubes)
    mask: np.ndarray             # union of the 9-fold dilations

    def outside(self) -> np.ndarray:
        return ~self.mask


def sigma_set(f: np.ndarray, s: int, K: int, tol: float = 1e-12) -> SigmaSet:
    """Omega_k = smallest level-k cube set containing supp Delta_{k+s} f;
    Sigma = union of the 9-fold dilations."""
    N = f.shape[0]
    scale = max(np.abs(f).max(), 1e-300)
    omega = {}
    total = np.zeros(N, dtype=bool)
    for k in range(0, K - s + 1):
        df = delta_level(f, k + s)
        supp = np.abs(df) > tol * scale
        L = N // (1 << k)
        cubes = np.unique(np.nonzero(supp)[0] // L)
        m = np.zeros(N, dtype=bool)
        dil = np.zeros(N, dtype=bool)
        for c in cubes:
            m[c * L:(c + 1) * L] = True
            idx = np.arange((c - 4) * L, (c + 5) * L) % N
            dil[idx] = True
        omega[k] = m
        total |= dil
    return SigmaSet(omega, total)


def commutative_pseudoloc_check(T: DiscOp, f: np.ndarray, s: int) -> dict:
    """||Tf||_{L2(H)} outside Sigma_{f,s} against s 2^{-gamma s/2} ||f||_2."""
    _check_s(T, s)
    gamma = T.kernel.gamma if T.kernel else 1.0
    sig = sigma_set(f, s, T.K)
    tf = T.apply(f)
    out = sig.outside()
    val = float(np.sqrt(T.measure * (np.abs(tf[:, out]) ** 2).sum()))
    f2 = float(np.sqrt(T.measure * (np.abs(f) ** 2).sum()))
    denom = s * 2.0 ** (-gamma * s / 2.0) * max(f2, 1e-300)
    return {"outside_norm": val, "ratio": val / denom,
            "outside_fraction": float(out.mean())}


def vanish_check(T: DiscOp, f: np.ndarray, s: int) -> float:
    """sup outside Sigma_{f,s} of | sum_k E_k Pi_rho* Delta_{k+s} f |,
    normalized by ||f||_2."""
    _check_s(T, s)
    rho = adjoint_one(T)
    N = T.N
    total = np.zeros((N, rho.shape[1]), dtype=complex)
    for k in range(0, T.K - s + 1):
        g = delta_level(f, k + s)
        total += e_level(paraproduct_adjoint(rho, g, T.K), k)
    sig = sigma_set(f, s, T.K)
    out = sig.outside()
    f2 = float(np.sqrt(T.measure * (np.abs(f) ** 2).sum()))
    if not out.any():
        return 0.0
    return float(np.abs(total[out]).max() / max(f2, 1e-300))


def restriction_identity_residual(T: DiscOp, f: np.ndarray, s: int) -> float:
    """Residual of 1_outside * Tf = 1_outside * (Phi_s + Psi_s) f.

    Meaningful when the differences of f below level s vanish (the finite
    grid truncates the bi-infinite telescope at level 0).
    """
    _check_s(T, s)
    sig = sigma_set(f, s, T.K)
    out = sig.outside()
    if not out.any():
        return 0.0
    lhs = T.apply(f)
    rhs = phi_s(T, s).apply(f) + psi_s(T, s).apply(f)
    scale = max(np.abs(lhs).max(), 1e-300)
    return float(np.abs((lhs - rhs)[:, out]).max() / scale)


def localization_check(T: DiscOp, x0: float, r1: float, r2: float) -> dict:
    """| int T(1_{B_r1}) 1_{B_r2} |_H against r1^n log(r2/r1)."""
    if r2 <= 2.0 * r1:
        raise ContractViolation("localization requires r2 > 2 r1")
    N = T.N
    mids = (np.arange(N) + 0.5) / N
    d = np.abs(mids - x0)
    d = np.minimum(d, 1.0 - d)
    fmask = (d <= r1).astype(float)
    gmask = (d <= r2).astype(float)
    tf = T.apply(fmask)
    pair = T.measure * tf @ gmask
    val = float(np.linalg.norm(pair))
    denom = r1 * np.log(r2 / r1)
    return {"value": val, "ratio": val / denom}


# ---------------------------------------------------------------------------
# semicommutative localization (matrix-valued f)
# ---------------------------------------------------------------------------

def zeta_fs(filt: GridFiltration, q_list: list[Op], levels: list[int]) -> Op:
    """zeta_{f,s} = meet_k ( 1 - join_Q (1 - xi_Q) 1_{9Q} ) from the supplied
    level projections q_k = sum_Q xi_Q 1_Q."""
    d = filt.d
    ncells = filt.algebra.nblocks
    from .opcore import dense_algebra
    cell_alg = dense_algebra(d)
    lost = [[] for _ in range(ncells)]
    for k, q in zip(levels, q_list):
        for Q in filt.cubes_at_level(k):
            cells = filt.cube_cells(Q)
            xi = q.blocks[cells[0]]
            comp = np.eye(d) - xi
            if np.abs(comp).max() <= 1e-14:
                continue
            mask = filt.concentric_mask(Q, 9)
            for cell in np.nonzero(mask)[0]:
                lost[cell].append(comp)
    blocks = np.empty((ncells, d, d), dtype=complex)
    eye = np.eye(d, dtype=complex)
    for cell in range(ncells):
        if not lost[cell]:
            blocks[cell] = eye
            continue
        join = proj_join([Op(c[None, :, :], cell_alg) for c in lost[cell]])
        blocks[cell] = eye - join.blocks[0]
    return Op(blocks, filt.algebra)


def apply_disc_to_matrix(T: DiscOp, f: Op) -> list[Op]:
    """Apply the scalar operator (tensored with id on M_d) to matrix-valued f."""
    vals = np.einsum("mij,jab->miab", T.mats, f.blocks)
    return [Op(vals[m], f.algebra) for m in range(T.M)]


def _matrix_level_op(filt: GridFiltration, x: Op, k: int) -> Op:
    return filt.expect(x, k)


def nc_pseudoloc_check(T: DiscOp, f: Op, s: int, filt: GridFiltration,
                       q_list: list[Op], identity_check: bool = False) -> dict:
    """Compressed-norm localization for matrix-valued f.

    Preconditions: T normalized; q_list[k] in the level-k subalgebra with
    q_k df_{k+s} q_k = 0 (certified here; violations raise).
    """
    _check_s(T, s)
    from .opcore import annihilation_check
    gamma = T.kernel.gamma if T.kernel else 1.0
    mart = Martingale(filt, f)
    levels = list(range(0, filt.K - s + 1))
    for k in levels:
        df = mart.diffs[k + s]
        if df.max_abs() > 1e-13 and not annihilation_check(
                q_list[k], df, tol=1e-9):
            raise ContractViolation(
                f"q_{k} does not annihilate df_{k + s}: containment uncertified")
    z = zeta_fs(filt, [q_list[k] for k in levels], levels)
    tf = apply_disc_to_matrix(T, f)
    comp = [z @ g @ z for g in tf]
    val = float(np.sqrt(sum(l2_norm(g) ** 2 for g in comp)))
    f2 = l2_norm(f)
    denom = s * 2.0 ** (-gamma * s / 2.0) * max(f2, 1e-300)
    out = {"compressed_norm": val, "ratio": val / denom,
           "zeta_trace": float(z.trace().real)}
    if identity_check:
        mats = phi_s(T, s).mats + psi_s(T, s).mats
        rhs_vals = np.einsum("mij,jab->miab", mats, f.blocks)
        resid = 0.0
        scale = max(max(g.max_abs() for g in tf), 1e-300)
        for m, g in enumerate(comp):
            rhs = z @ Op(rhs_vals[m], f.algebra) @ z
            resid = max(resid, (g - rhs).max_abs())
        out["identity_residual"] = resid / scale
    return out
