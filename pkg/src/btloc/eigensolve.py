"""Non-Hermitian eigensolvers.

* :func:`sparse_lu` wraps SuperLU (threshold pivoting, fill-reducing
  ordering) and adds iterative refinement.
* :func:`shift_invert_arnoldi` is a thick-restart (Krylov-Schur) Arnoldi
  iteration on ``(M - sigma)^{-1}``.
* :func:`dense_eig` is the dense LAPACK oracle used by the tests.
* Tridiagonal helpers compute eigenvectors whose entries span many orders
  of magnitude (stored as modulus logarithms) and fiber eigenpairs by
  banded inverse iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "SingularFactorError",
    "ArnoldiNoConvergence",
    "DenseEigError",
    "LUFactors",
    "EigenPair",
    "sparse_lu",
    "shift_invert_arnoldi",
    "dense_eig",
    "dense_eigvec",
    "twisted_eigenvector",
    "tridiagonal_inverse_iteration",
]


class SingularFactorError(ArithmeticError):
    """LU hit a (numerically) zero pivot."""


class ArnoldiNoConvergence(RuntimeError):
    """Arnoldi did not converge within the restart budget."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial or []


class DenseEigError(RuntimeError):
    """LAPACK failed to converge."""


# ------------------------------------------------------------------ sparse LU

@dataclass(frozen=True, eq=False)
class LUFactors:
    """Sparse LU factors with ``Pr @ M @ Pc = L @ U``.

    Attributes
    ----------
    perm_r, perm_c : ndarray
        SuperLU row and column permutations.
    L, U : scipy.sparse.csc_matrix
    nnz_matrix : int
        Nonzeros of the factored matrix.
    """

    perm_r: np.ndarray
    perm_c: np.ndarray
    L: sp.csc_matrix
    U: sp.csc_matrix
    nnz_matrix: int
    _superlu: object
    _matrix: sp.csc_matrix

    @property
    def shape(self):
        return self._matrix.shape

    @property
    def fill(self) -> int:
        """Entries of L + U beyond those of the original matrix."""
        n = self.shape[0]
        return int(self.L.nnz + self.U.nnz - n - self.nnz_matrix)

    @property
    def fill_ratio(self) -> float:
        n = self.shape[0]
        return (self.L.nnz + self.U.nnz - n) / max(self.nnz_matrix, 1)

    def row_permutation(self) -> sp.csc_matrix:
        n = self.shape[0]
        return sp.csc_matrix((np.ones(n), (self.perm_r, np.arange(n))), shape=(n, n))

    def col_permutation(self) -> sp.csc_matrix:
        n = self.shape[0]
        return sp.csc_matrix((np.ones(n), (np.arange(n), self.perm_c)), shape=(n, n))

    def reconstruction_error(self) -> float:
        """||Pr M Pc - L U||_F / ||M||_F."""
        lhs = self.row_permutation() @ self._matrix @ self.col_permutation()
        diff = lhs - self.L @ self.U
        return float(sp.linalg.norm(diff) / sp.linalg.norm(self._matrix))

    def solve(self, b, refine: int = 1):
        """Solve M x = b; ``refine`` steps of iterative refinement follow."""
        b = np.asarray(b, dtype=complex)
        x = self._superlu.solve(b)
        for _ in range(refine):
            r = b - self._matrix @ x
            x = x + self._superlu.solve(r)
        return x


def sparse_lu(m, pivot_threshold: float = 0.1, ordering: str = "MMD_AT_PLUS_A") -> LUFactors:
    """Factor a square sparse complex matrix.

    Parameters
    ----------
    m : sparse matrix
    pivot_threshold : float
        Threshold partial pivoting parameter (1 is full partial pivoting).
    ordering : str
        SuperLU column ordering; minimum degree on M^T + M by default,
        which suits the structurally symmetric matrices assembled here.

    Raises
    ------
    SingularFactorError
        If a pivot is exactly or numerically zero (|pivot| < 1e-300).
    """
    a = sp.csc_matrix(m, dtype=complex)
    if a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    a.sort_indices()
    try:
        lu = spla.splu(a, permc_spec=ordering, diag_pivot_thresh=pivot_threshold)
    except RuntimeError as exc:
        raise SingularFactorError(str(exc)) from exc
    piv = np.abs(lu.U.diagonal())
    if piv.size and piv.min() < 1e-300:
        raise SingularFactorError(f"pivot of magnitude {piv.min():.3g}")
    return LUFactors(lu.perm_r.copy(), lu.perm_c.copy(), lu.L.tocsc(), lu.U.tocsc(),
                     int(a.nnz), lu, a)


# ------------------------------------------------------------------- Arnoldi

@dataclass(eq=False)
class EigenPair:
    """Eigenvalue with eigenvector in mesh-weighted coordinates.

    ``vector`` has unit Euclidean norm.  When ``log_scale`` is set, the
    eigenvector of the original operator is ``vector * exp(log_scale)``
    (up to normalization); this representation reaches far beyond the
    range of double precision and is used for weighted norms.
    """

    value: complex
    vector: np.ndarray
    residual: float
    log_scale: Optional[np.ndarray] = None


def _one_norm(m) -> float:
    return float(abs(m).sum(axis=0).max())


def _orthogonalize(V, j, w, H):
    """Modified Gram-Schmidt against V[:, :j+1] with one reorthogonalization pass."""
    for _ in range(2):
        for i in range(j + 1):
            c = np.vdot(V[:, i], w)
            H[i, j] += c
            w -= c * V[:, i]
    return w


def shift_invert_arnoldi(m, shift: complex, k: int = 1, tol: float = 1e-10, *,
                         ncv: Optional[int] = None, max_restarts: int = 10,
                         seed: int = 0, v0=None) -> list:
    """Eigenpairs of a sparse matrix nearest to ``shift``.

    Arnoldi on ``(m - shift)^{-1}`` with modified Gram-Schmidt plus one
    reorthogonalization pass, thick (Krylov-Schur) restarts, and a final
    check of the true residuals.

    Parameters
    ----------
    m : sparse matrix (n, n)
    shift : complex
    k : int
        Number of eigenpairs wanted.
    tol : float
        Bound on ``||m v - lambda v||`` for unit ``v``; at least 1e-12.
        It is raised to ``64 eps ||m||_1`` when that is larger, since no
        backward stable method gets below it.
    ncv : int, optional
        Subspace dimension, default ``max(20, 4k)`` (capped at n).
    max_restarts : int
    seed : int
        Seed of the pseudo-random start vector.
    v0 : array, optional
        Start vector (for instance a discretized quasimode).

    Returns
    -------
    list of EigenPair
        Sorted by distance to the shift.

    Raises
    ------
    SingularFactorError
        ``shift`` is an eigenvalue to working precision; perturb it.
    ArnoldiNoConvergence
    """
    a = sp.csc_matrix(m, dtype=complex)
    n = a.shape[0]
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    if tol < 1e-12:
        raise ValueError("tol must be at least 1e-12")
    shift = complex(shift)
    shifted = (a - shift * sp.identity(n, format="csc")).tocsc()
    lu = sparse_lu(shifted)
    op_norm = _one_norm(shifted)
    tol = max(tol, 64.0 * np.finfo(float).eps * _one_norm(a))
    ncv = min(n, max(20, 4 * k) if ncv is None else ncv)
    ncv = max(ncv, k)
    keep = min(ncv - 1, k + max(1, (ncv - k) // 2)) if ncv > k else k

    rng = np.random.default_rng(seed)
    if v0 is None:
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    else:
        v = np.array(v0, dtype=complex).ravel()
        if v.size != n or not np.any(v):
            raise ValueError("v0 must be a nonzero vector of length n")
    V = np.zeros((n, ncv + 1), dtype=complex)
    H = np.zeros((ncv + 1, ncv), dtype=complex)
    V[:, 0] = v / np.linalg.norm(v)
    p = 0
    best = []
    for restart in range(max_restarts + 1):
        mdim = ncv
        invariant = False
        j = p
        while j < ncv:
            w = lu.solve(V[:, j], refine=0)
            w = _orthogonalize(V, j, w, H)
            beta = np.linalg.norm(w)
            scale = np.linalg.norm(H[: j + 1, j])
            if beta <= 1e-13 * max(scale, 1e-300):
                H[j + 1, j] = 0.0
                if j + 1 >= k or j + 1 == n:
                    mdim = j + 1
                    invariant = True
                    break
                # invariant subspace too small: continue with a fresh direction
                w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
                w = _orthogonalize(V, j, w, np.zeros_like(H))
                V[:, j + 1] = w / np.linalg.norm(w)
                j += 1
                continue
            H[j + 1, j] = beta
            V[:, j + 1] = w / beta
            j += 1

        B = H[:mdim, :mdim]
        brow = H[mdim, :mdim]
        theta, S = np.linalg.eig(B)
        S = S / np.linalg.norm(S, axis=0)
        order = np.argsort(-np.abs(theta), kind="stable")
        want = order[:k]
        est = np.abs(brow @ S[:, want]) * op_norm / np.maximum(np.abs(theta[want]), 1e-300)
        if invariant or np.all(est <= tol):
            pairs = []
            for i in want:
                x = V[:, :mdim] @ S[:, i]
                x /= np.linalg.norm(x)
                lam = shift + 1.0 / theta[i]
                res = float(np.linalg.norm(a @ x - lam * x))
                pairs.append(EigenPair(complex(lam), x, res))
            pairs.sort(key=lambda e: abs(e.value - shift))
            best = pairs
            if all(e.residual <= tol for e in pairs):
                return pairs
            if invariant or restart >= 2:
                # Ritz estimates are met but true residuals are not: round-off
                # from a shift very close to one eigenvalue pollutes the others.
                pairs = [e if e.residual <= tol else _polish(a, e) for e in pairs]
                best = pairs
                if all(e.residual <= tol for e in pairs):
                    return pairs
        if restart == max_restarts or invariant:
            break
        # thick restart: keep the Schur vectors of the wanted Ritz values
        thr = np.abs(theta[order[keep - 1]]) * (1.0 - 1e-10)
        T, Z, sdim = sla.schur(B, output="complex", sort=lambda x: abs(x) >= thr)
        p = int(min(max(sdim, 1), ncv - 1))
        Vnew = V[:, :mdim] @ Z[:, :p]
        resid = V[:, mdim].copy()
        bnew = brow @ Z[:, :p]
        V[:] = 0.0
        H[:] = 0.0
        V[:, :p] = Vnew
        V[:, p] = resid
        H[:p, :p] = T[:p, :p]
        H[p, :p] = bnew
    raise ArnoldiNoConvergence(
        f"no convergence to tol={tol:g} after {max_restarts} restarts", partial=best)


def _polish(a, pair, iterations=3):
    """Inverse iteration at the Ritz value itself."""
    n = a.shape[0]
    sigma = pair.value
    eye = sp.identity(n, format="csc")
    try:
        lu = sparse_lu(a - sigma * eye)
    except SingularFactorError:
        sigma = sigma * (1 + 1e-10) + 1e-14
        lu = sparse_lu(a - sigma * eye)
    x = pair.vector
    best = pair
    for _ in range(iterations):
        x = lu.solve(x, refine=1)
        x = x / np.linalg.norm(x)
        ax = a @ x
        lam = complex(np.vdot(x, ax))
        res = float(np.linalg.norm(ax - lam * x))
        if res < best.residual:
            best = EigenPair(lam, x.copy(), res)
    return best


# --------------------------------------------------------------------- dense

def dense_eig(m, max_n: int = 2000) -> np.ndarray:
    """All eigenvalues of a small matrix by the LAPACK QR algorithm.

    Returned sorted by modulus, then argument.  Sizes above ``max_n``
    (default 2000) are refused; callers may raise the limit explicitly,
    at O(n^3) cost.
    """
    a = m.toarray() if sp.issparse(m) else np.asarray(m)
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if a.shape[0] > max_n:
        raise ValueError(f"dense_eig is limited to n <= {max_n}")
    try:
        w = sla.eigvals(a, overwrite_a=False, check_finite=True)
    except sla.LinAlgError as exc:
        raise DenseEigError(str(exc)) from exc
    order = np.lexsort((np.angle(w), np.abs(w)))
    return w[order]


def dense_eigvec(m, value: complex, iterations: int = 3) -> np.ndarray:
    """Unit eigenvector for a known eigenvalue, by inverse iteration."""
    a = m.toarray() if sp.issparse(m) else np.asarray(m, dtype=complex)
    n = a.shape[0]
    norm = max(np.abs(a).sum(axis=0).max(), 1.0)
    sigma = value + 1e-12 * norm
    lu = sla.lu_factor(a - sigma * np.eye(n), check_finite=False)
    x = np.random.default_rng(0).standard_normal(n) + 0j
    for _ in range(iterations):
        x = sla.lu_solve(lu, x)
        x /= np.linalg.norm(x)
    return x


# --------------------------------------------------------------- tridiagonal

def twisted_eigenvector(diag, off, value: complex) -> EigenPair:
    """Eigenvector of a complex symmetric tridiagonal matrix, in log form.

    Ratios ``f_i / f_{i+1}`` are propagated from the left end and
    ``f_i / f_{i-1}`` from the right end; the two sweeps are joined at the
    index where the twisted pivot is smallest.  Moduli are accumulated as
    logarithms, so exponentially small tails keep full relative accuracy.

    Parameters
    ----------
    diag : array (n,)
    off : array (n-1,)
        Sub- and super-diagonal.
    value : complex
        Accurate eigenvalue.

    Returns
    -------
    EigenPair
        ``vector`` holds the phases (scaled to unit norm) and ``log_scale``
        the logarithms of the moduli.
    """
    a = np.asarray(diag, dtype=complex) - value
    o = np.asarray(off, dtype=complex)
    n = a.size
    left = np.empty(n, dtype=complex)  # f_i / f_{i+1}
    right = np.empty(n, dtype=complex)  # f_i / f_{i-1}
    left[0] = -o[0] / a[0]
    for i in range(1, n - 1):
        left[i] = -o[i] / (a[i] + o[i - 1] * left[i - 1])
    right[n - 1] = -o[n - 2] / a[n - 1]
    for i in range(n - 2, 0, -1):
        right[i] = -o[i - 1] / (a[i] + o[i] * right[i + 1])
    gamma = a.copy()
    gamma[1:] += o * left[:-1]
    gamma[:-1] += o * right[1:]
    r = int(np.argmin(np.abs(gamma)))

    logmod = np.zeros(n)
    phase = np.ones(n, dtype=complex)
    for i in range(r - 1, -1, -1):
        logmod[i] = logmod[i + 1] + np.log(abs(left[i]))
        phase[i] = phase[i + 1] * left[i] / abs(left[i])
    for i in range(r + 1, n):
        logmod[i] = logmod[i - 1] + np.log(abs(right[i]))
        phase[i] = phase[i - 1] * right[i] / abs(right[i])
    logmod -= logmod.max()
    f = phase * np.exp(logmod)
    f /= np.linalg.norm(f)
    mf = np.asarray(diag) * f
    mf[1:] += o * f[:-1]
    mf[:-1] += o * f[1:]
    res = float(np.linalg.norm(mf - value * f))
    return EigenPair(complex(value), phase / np.sqrt(n), res, logmod)


def tridiagonal_inverse_iteration(diag, off, shift: complex, iterations: int = 4,
                                  v0=None):
    """Eigenpair of a complex symmetric tridiagonal matrix near ``shift``.

    Banded inverse iteration followed by the bilinear Rayleigh quotient
    ``v^T M v / v^T v`` (the right one for complex symmetric matrices).

    Returns
    -------
    (value, vector)
        ``vector`` has unit Euclidean norm.
    """
    d = np.asarray(diag, dtype=complex)
    o = np.asarray(off, dtype=complex)
    n = d.size
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = o
    ab[1] = d - shift
    ab[2, :-1] = o
    x = np.ones(n, dtype=complex) if v0 is None else np.asarray(v0, dtype=complex).copy()
    for _ in range(iterations):
        x = sla.solve_banded((1, 1), ab, x, check_finite=False)
        x /= np.linalg.norm(x)
    mx = d * x
    mx[1:] += o * x[:-1]
    mx[:-1] += o * x[1:]
    value = complex((x @ mx) / (x @ x))
    return value, x
