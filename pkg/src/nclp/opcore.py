"""Finite-dimensional operator calculus.

Every algebra handled here is a finite von Neumann algebra presented as
block-diagonal complex matrices: ``nblocks`` blocks of size ``d x d`` with a
trace ``tau(a) = sum_b w_b * tr(a_b)``.  A dense matrix algebra has a single
block with weight ``1/d`` (normalized trace); a grid of matrix values over a
measure space has one block per cell with weight ``measure(cell)/d``.

All operations are pure: operators are never mutated after construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, NumericError

# Tolerances, fixed once so every test is reproducible.
EIG_MERGE_TOL = 1e-9     # eigenvalues closer than this share one projection
ENDPOINT_TOL = 1e-9      # interval-endpoint snapping for spectral projections
MEET_NULL_TOL = 1e-8     # null-space eigenvalue cut in proj_meet
HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class Algebra:
    """Block-diagonal matrix algebra with trace weights summing to tau(1)=1."""

    nblocks: int
    d: int
    weights: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.nblocks < 1 or self.d < 1:
            raise ContractViolation("algebra dimensions must be >= 1")
        w = self.weights
        if w is None:
            w = np.full(self.nblocks, 1.0 / (self.nblocks * self.d))
        w = np.asarray(w, dtype=float)
        if w.shape != (self.nblocks,):
            raise ContractViolation("one trace weight per block required")
        if np.any(w <= 0):
            raise ContractViolation("trace weights must be positive")
        if abs(w.sum() * self.d - 1.0) > 1e-9:
            raise ContractViolation("trace weights must give tau(1) = 1")
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.nblocks * self.d

    def unit(self) -> "Op":
        blocks = np.broadcast_to(np.eye(self.d, dtype=complex),
                                 (self.nblocks, self.d, self.d)).copy()
        return Op(blocks, self)

    def zero(self) -> "Op":
        return Op(np.zeros((self.nblocks, self.d, self.d), dtype=complex), self)

    def from_blocks(self, blocks) -> "Op":
        return Op(np.asarray(blocks, dtype=complex), self)


def dense_algebra(d: int) -> Algebra:
    """Full matrix algebra M_d with the normalized trace."""
    return Algebra(1, d)


class Op:
    """An element of a block-diagonal algebra.

    ``blocks`` has shape (nblocks, d, d).  Arithmetic is blockwise; the
    objects are small value types, so we keep them immutable by convention.
    """

    __slots__ = ("blocks", "algebra")

    def __init__(self, blocks: np.ndarray, algebra: Algebra):
        blocks = np.asarray(blocks, dtype=complex)
        if blocks.shape != (algebra.nblocks, algebra.d, algebra.d):
            raise ContractViolation(
                f"block shape {blocks.shape} does not match algebra "
                f"({algebra.nblocks},{algebra.d},{algebra.d})")
        if not np.all(np.isfinite(blocks.real)) \
                or not np.all(np.isfinite(blocks.imag)):
            raise NumericError("operator entries must be finite")
        self.blocks = blocks
        self.algebra = algebra

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other: "Op") -> "Op":
        return Op(self.blocks + other.blocks, self.algebra)

    def __sub__(self, other: "Op") -> "Op":
        return Op(self.blocks - other.blocks, self.algebra)

    def __neg__(self) -> "Op":
        return Op(-self.blocks, self.algebra)

    def __mul__(self, c) -> "Op":
        return Op(self.blocks * c, self.algebra)

    __rmul__ = __mul__

    def __matmul__(self, other: "Op") -> "Op":
        return Op(self.blocks @ other.blocks, self.algebra)

    @property
    def H(self) -> "Op":
        return Op(self.blocks.conj().transpose(0, 2, 1), self.algebra)

    # -- scalars ----------------------------------------------------------
    def trace(self) -> complex:
        tr = np.einsum("bii->b", self.blocks)
        val = complex(np.dot(self.algebra.weights, tr))
        return val

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        scale = max(np.abs(self.blocks).max(), 1e-300)
        return np.abs(self.blocks - self.H.blocks).max() <= tol * scale + 1e-300

    def hermitize(self) -> "Op":
        return Op(0.5 * (self.blocks + self.H.blocks), self.algebra)

    def max_abs(self) -> float:
        return float(np.abs(self.blocks).max())

    def copy(self) -> "Op":
        return Op(self.blocks.copy(), self.algebra)


# ---------------------------------------------------------------------------
# spectral calculus
# ---------------------------------------------------------------------------

def _eigh(op: Op):
    """Blockwise Hermitian eigendecomposition (ascending eigenvalues)."""
    try:
        w, v = np.linalg.eigh(op.blocks)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    return w, v


def spectral_decompose(h: Op, merge_tol: float = EIG_MERGE_TOL):
    """Return the spectral resolution of a Hermitian operator.

    Gives a list of (eigenvalue, projection) pairs sorted ascending, with
    eigenvalues within ``merge_tol`` of each other merged into a single
    spectral projection.  The projections are mutually orthogonal and sum to
    the identity.
    """
    if not h.is_hermitian():
        raise ContractViolation("spectral_decompose requires a Hermitian operator")
    w, v = _eigh(h)
    flat = sorted((w[b, i], b, i) for b in range(h.algebra.nblocks)
                  for i in range(h.algebra.d))
    groups: list[list[tuple]] = []
    for item in flat:
        if groups and item[0] - groups[-1][-1][0] <= merge_tol:
            groups[-1].append(item)
        else:
            groups.append([item])
    out = []
    for group in groups:
        blocks = np.zeros((h.algebra.nblocks, h.algebra.d, h.algebra.d),
                          dtype=complex)
        vals = []
        for glam, gb, gi in group:
            vec = v[gb][:, gi]
            blocks[gb] += np.outer(vec, vec.conj())
            vals.append(glam)
        out.append((float(np.mean(vals)), Op(blocks, h.algebra)))
    return out


@dataclass(frozen=True)
class Interval:
    """Real interval with explicit endpoint conventions.

    None endpoints mean unbounded.  Eigenvalues within ENDPOINT_TOL of an
    endpoint are assigned according to the declared open/closed convention.
    """

    lo: float | None
    hi: float | None
    closed_lo: bool = True
    closed_hi: bool = True

    def contains(self, x: np.ndarray) -> np.ndarray:
        keep = np.ones(x.shape, dtype=bool)
        if self.lo is not None:
            if self.closed_lo:
                keep &= x >= self.lo - ENDPOINT_TOL
            else:
                keep &= x > self.lo + ENDPOINT_TOL
        if self.hi is not None:
            if self.closed_hi:
                keep &= x <= self.hi + ENDPOINT_TOL
            else:
                keep &= x < self.hi - ENDPOINT_TOL
        return keep


def spectral_projection(h: Op, interval: Interval) -> Op:
    """chi_interval(h) for Hermitian h (sum of eigenprojections inside)."""
    if not h.is_hermitian():
        raise ContractViolation("spectral_projection requires a Hermitian operator")
    w, v = _eigh(h)
    keep = interval.contains(w)  # (nblocks, d) boolean
    sel = np.where(keep[:, None, :], v, 0.0)
    blocks = sel @ sel.conj().transpose(0, 2, 1)
    return Op(blocks, h.algebra)


def abs_op(a: Op) -> Op:
    """|a| = (a* a)^{1/2}."""
    w, v = _eigh((a.H @ a).hermitize())
    w = np.clip(w, 0.0, None)
    blocks = (v * np.sqrt(w)[:, None, :]) @ v.conj().transpose(0, 2, 1)
    return Op(blocks, a.algebra)


def singular_values(a: Op):
    """Per-block singular values (nblocks, d), each carrying its block weight."""
    try:
        s = np.linalg.svd(a.blocks, compute_uv=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericError(f"SVD failed: {exc}") from exc
    return s


def tail_trace(f: Op, lam: float) -> float:
    """tau( chi_(lam, inf)(|f|) ), the distribution function of |f|."""
    if lam <= 0:
        raise ContractViolation("tail_trace requires lambda > 0")
    s = singular_values(f)
    counts = (s > lam + ENDPOINT_TOL).sum(axis=1)
    return float(np.dot(f.algebra.weights, counts))


def weak_l1(f: Op) -> float:
    """sup_{lam>0} lam * tau{|f| > lam}.

    The map lam -> lam*tau{|f|>lam} is piecewise linear between singular
    values, so the sup is attained just below one of them.
    """
    s = singular_values(f)
    vals = np.unique(s[s > 0])
    if vals.size == 0:
        return 0.0
    best = 0.0
    w = f.algebra.weights
    for lam in vals:
        meas = float(np.dot(w, (s >= lam - ENDPOINT_TOL).sum(axis=1)))
        best = max(best, lam * meas)
    return best


@dataclass(frozen=True)
class MuFunction:
    """Right-continuous nonincreasing step function on (0, tau(1))."""

    breakpoints: np.ndarray  # increasing cumulative weights, ends at tau(1)
    values: np.ndarray       # value on [break_{i-1}, break_i)

    def __call__(self, t: float) -> float:
        idx = np.searchsorted(self.breakpoints, t, side="right")
        if idx >= len(self.values):
            return 0.0
        return float(self.values[idx])

    def integral(self) -> float:
        widths = np.diff(np.concatenate([[0.0], self.breakpoints]))
        return float(np.dot(widths, self.values))

    def sup_t_mu(self) -> float:
        """sup_t t * mu_t, evaluated just below each breakpoint."""
        return float(max((self.breakpoints * self.values).max(initial=0.0), 0.0))


def mu_function(a: Op) -> MuFunction:
    """Generalized singular values mu_t(a) as a step function."""
    s = singular_values(a)
    w = a.algebra.weights
    pairs = sorted(((float(s[b, i]), float(w[b]))
                    for b in range(a.algebra.nblocks)
                    for i in range(a.algebra.d)), reverse=True)
    vals = np.array([p[0] for p in pairs])
    cum = np.cumsum([p[1] for p in pairs])
    return MuFunction(cum, vals)


def schatten_norm(a: Op, p: float) -> float:
    """||a||_p = tau(|a|^p)^{1/p}; p = inf gives the operator norm."""
    if p < 1:
        raise ContractViolation("schatten_norm requires p >= 1")
    s = singular_values(a)
    if np.isinf(p):
        return float(s.max(initial=0.0))
    w = a.algebra.weights
    return float(np.dot(w, (s ** p).sum(axis=1)) ** (1.0 / p))


def op_norm(a: Op) -> float:
    return schatten_norm(a, np.inf)


def l2_norm(a: Op) -> float:
    return schatten_norm(a, 2)


def l2_inner(a: Op, b: Op) -> complex:
    """tau(a* b)."""
    return (a.H @ b).trace()


# ---------------------------------------------------------------------------
# projection lattice
# ---------------------------------------------------------------------------

def is_projection(p: Op, tol: float = 1e-10) -> bool:
    scale = max(1.0, p.max_abs())
    herm = np.abs(p.blocks - p.H.blocks).max() <= tol * scale
    idem = np.abs((p @ p).blocks - p.blocks).max() <= tol * scale
    return bool(herm and idem)


def proj_meet(ps: list[Op]) -> Op:
    """Meet of projections: range = intersection of ranges.

    Computed from the null space of sum(1 - p_i) with the documented
    eigenvalue cut MEET_NULL_TOL.
    """
    if not ps:
        raise ContractViolation("proj_meet of an empty list")
    alg = ps[0].algebra
    for p in ps:
        if p.algebra.nblocks != alg.nblocks or p.algebra.d != alg.d:
            raise ContractViolation("projection dimension mismatch")
    acc = alg.zero()
    one = alg.unit()
    for p in ps:
        acc = acc + (one - p)
    acc = acc.hermitize()
    return spectral_projection(acc, Interval(None, MEET_NULL_TOL,
                                             closed_hi=True))


def proj_join(ps: list[Op]) -> Op:
    """Join of projections: 1 - meet(1 - p_i)."""
    one = ps[0].algebra.unit()
    return one - proj_meet([one - p for p in ps])


def annihilation_check(p: Op, f: Op, tol: float = 1e-10) -> bool:
    """True iff ||p f p||_inf <= tol * ||f||_inf (certifies supp* f <= 1-p)."""
    if p.algebra.dim != f.algebra.dim:
        raise ContractViolation("dimension mismatch")
    scale = max(op_norm(f), 1e-300)
    return op_norm(p @ f @ p) <= tol * scale


def positive_part_floor(a: Op) -> float:
    """Smallest eigenvalue of a Hermitian operator (positivity diagnostic)."""
    w, _ = _eigh(a.hermitize())
    return float(w.min())
