"""Symmetric positive-definite preconditioners and the geometry they induce.

A preconditioner ``M`` defines the norm ``||v||_M = sqrt(v^T M v)`` in which
the solvers' proximal subproblems measure distance.  Three kinds are
supported: identity, diagonal (positive entries), and dense SPD.  Dense
matrices are factorized once at construction; every later solve reuses the
factorization, since the preconditioner stays fixed for a whole run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "Preconditioner",
    "MetricConditioning",
    "EigenConvergenceError",
    "eigen_bounds",
    "metric_conditioning",
]

# Power-iteration budget and tolerances: Rayleigh-quotient stagnation plus a
# residual certificate ||Mv - lam*v|| <= CERT * lam * ||v||.
_POWER_MAXIT = 1000
_POWER_RTOL = 1e-8
_POWER_CERT = 1e-6

# Strong-convexity floor: generalized Rayleigh quotients below this are
# reported as "not strongly convex under this metric".
_SIGMA_FLOOR = 1e-14


class EigenConvergenceError(RuntimeError):
    """Power iteration exhausted its budget without a certified eigenpair.

    Carries the last Rayleigh quotient seen in ``last_estimate``.
    """

    def __init__(self, message: str, last_estimate: float):
        super().__init__(message)
        self.last_estimate = last_estimate


def _seeded_unit_vector(d: int, seed: int = 0) -> np.ndarray:
    v = np.random.default_rng(seed).standard_normal(d)
    return v / np.linalg.norm(v)


def _certified_extreme(iterate, rayleigh, d, *, maxit=_POWER_MAXIT,
                       rtol=_POWER_RTOL, cert=_POWER_CERT, seed=0):
    """Power-type iteration with a residual certificate.

    ``iterate(v)`` drives the iteration (the operator itself for the largest
    eigenvalue, its inverse for the smallest); ``rayleigh(v)`` applies the
    forward operator, from which the Rayleigh quotient and the residual
    certificate are formed.  The start vector is a deterministic seeded unit
    vector so results are reproducible.

    With ``cert=None`` the residual certificate is waived and the iteration
    stops on Rayleigh-quotient stagnation alone, returning the last estimate
    instead of raising.  That mode suits conditioning estimates on operators
    whose spectrum may be too packed for an eigenvector to be certified (the
    value error is then bounded by the spectral spread, which is small in
    exactly that situation).
    """
    v = _seeded_unit_vector(d, seed)
    lam_prev = None
    lam = 0.0
    for _ in range(maxit):
        fv = rayleigh(v)
        lam = float(v @ fv)
        if lam_prev is not None and abs(lam - lam_prev) <= rtol * abs(lam):
            if cert is None:
                return lam, v
            resid = float(np.linalg.norm(fv - lam * v))
            if resid <= cert * abs(lam):
                return lam, v
        lam_prev = lam
        w = iterate(v)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            # Operator annihilates the iterate: eigenvalue 0 along v.
            return 0.0, v
        v = w / nw
    if cert is None:
        return lam, v
    raise EigenConvergenceError(
        f"eigenvalue iteration did not certify within {maxit} iterations "
        f"(last Rayleigh quotient {lam:.6e})", lam)


def _shift_refine(mat, lam_est, v, outward, *, maxit=100,
                  cert=_POWER_CERT) -> float:
    """Shift-and-invert refinement after a stalled extreme-eigenpair search.

    A stalled Rayleigh quotient is already within a fraction of the
    eigen-gap of the true extreme eigenvalue, so iterating with
    ``(M - sigma I)^{-1}`` for a shift just outside it isolates the extreme
    eigenvector in a handful of steps even when the plain iteration's
    convergence ratio is hopeless.  The returned value still has to pass the
    residual certificate.
    """
    sigma = lam_est * (1.001 if outward > 0 else 0.999)
    lu = scipy.linalg.lu_factor(mat - sigma * np.eye(mat.shape[0]))
    lam = lam_est
    for _ in range(maxit):
        w = scipy.linalg.lu_solve(lu, v)
        v = w / np.linalg.norm(w)
        fv = mat @ v
        lam = float(v @ fv)
        if np.linalg.norm(fv - lam * v) <= cert * abs(lam):
            return lam
    raise EigenConvergenceError(
        f"shifted eigenvalue refinement did not certify within {maxit} "
        f"iterations (last Rayleigh quotient {lam:.6e})", lam)


def _dense_bounds(mat: np.ndarray, chol_lower: np.ndarray) -> tuple[float, float]:
    d = mat.shape[0]
    apply_m = lambda v: mat @ v
    solve_m = lambda v: scipy.linalg.cho_solve((chol_lower, True), v)
    try:
        lam_max, _ = _certified_extreme(apply_m, apply_m, d, seed=0)
    except EigenConvergenceError as exc:
        v = _seeded_unit_vector(d, 0)
        lam_max = _shift_refine(mat, exc.last_estimate, v, outward=+1)
    try:
        lam_min, _ = _certified_extreme(solve_m, apply_m, d, seed=1)
    except EigenConvergenceError as exc:
        v = _seeded_unit_vector(d, 1)
        lam_min = _shift_refine(mat, exc.last_estimate, v, outward=-1)
    if lam_max < lam_min <= lam_max * (1 + 1e-9):
        # degenerate spectrum: two Rayleigh quotients a few ulp apart
        lam_min = lam_max
    return lam_min, lam_max


def eigen_bounds(m_raw) -> tuple[float, float]:
    """Extreme eigenvalues of a diagonal (1-D input) or dense SPD matrix.

    Diagonal input gives the exact min/max of its entries.  Dense input is
    handled by certified power iteration for the largest eigenvalue and
    inverse power iteration (through a Cholesky factorization) for the
    smallest; both eigenpairs must satisfy the residual certificate
    ``||Mv - lam*v|| <= 1e-6 * lam * ||v||``.
    """
    arr = np.asarray(m_raw, dtype=float)
    if arr.ndim == 1:
        if arr.size == 0:
            raise ValueError("empty diagonal")
        if np.any(arr <= 0):
            raise ValueError("diagonal entries must be positive")
        return float(arr.min()), float(arr.max())
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a vector or square matrix, got shape {arr.shape}")
    sym = 0.5 * (arr + arr.T)
    try:
        low = scipy.linalg.cholesky(sym, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise ValueError("matrix is not numerically positive definite") from exc
    return _dense_bounds(sym, low)


class Preconditioner:
    """A fixed SPD matrix with cached spectral bounds and solve machinery.

    Construct through :meth:`identity`, :meth:`diagonal` or :meth:`dense`.
    Instances are immutable after construction and safe to share across
    threads.
    """

    __slots__ = ("kind", "dim", "entries", "mat", "lambda_min", "lambda_max",
                 "cond", "_chol_lower")

    def __init__(self, kind, dim, entries, mat, lambda_min, lambda_max, chol_lower):
        self.kind = kind
        self.dim = dim
        self.entries = entries
        self.mat = mat
        self.lambda_min = float(lambda_min)
        self.lambda_max = float(lambda_max)
        if not (self.lambda_min > 0 and self.lambda_max >= self.lambda_min):
            raise ValueError(
                f"spectral bounds do not certify positive definiteness: "
                f"[{self.lambda_min}, {self.lambda_max}]")
        self.cond = self.lambda_max / self.lambda_min
        self._chol_lower = chol_lower

    @classmethod
    def identity(cls, dim: int) -> "Preconditioner":
        if dim < 1:
            raise ValueError("dimension must be positive")
        return cls("identity", int(dim), None, None, 1.0, 1.0, None)

    @classmethod
    def diagonal(cls, entries) -> "Preconditioner":
        e = np.asarray(entries, dtype=float).copy()
        if e.ndim != 1 or e.size == 0:
            raise ValueError("diagonal entries must be a nonempty vector")
        lam_min, lam_max = eigen_bounds(e)
        e.setflags(write=False)
        return cls("diagonal", e.size, e, None, lam_min, lam_max, None)

    @classmethod
    def dense(cls, mat) -> "Preconditioner":
        m = np.asarray(mat, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"dense preconditioner must be square, got {m.shape}")
        sym = 0.5 * (m + m.T)
        try:
            low = scipy.linalg.cholesky(sym, lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise ValueError(
                "dense preconditioner is not numerically positive definite; "
                "add a ridge term or use a diagonal-shift preconditioner") from exc
        lam_min, lam_max = _dense_bounds(sym, low)
        sym.setflags(write=False)
        return cls("dense", sym.shape[0], None, sym, lam_min, lam_max, low)

    def _check_dim(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise ValueError(f"vector of shape {v.shape} does not match dimension {self.dim}")
        return v

    def apply(self, v) -> np.ndarray:
        """Matrix-vector product ``M v``."""
        v = self._check_dim(v)
        if self.kind == "identity":
            return v.copy()
        if self.kind == "diagonal":
            return self.entries * v
        return self.mat @ v

    def solve(self, v) -> np.ndarray:
        """Solve ``M x = v`` using the cached factorization."""
        v = self._check_dim(v)
        if self.kind == "identity":
            return v.copy()
        if self.kind == "diagonal":
            return v / self.entries
        return scipy.linalg.cho_solve((self._chol_lower, True), v)

    def m_norm(self, v) -> float:
        """Metric norm ``sqrt(v^T M v)`` (clamped at zero against roundoff)."""
        v = self._check_dim(v)
        return float(np.sqrt(max(float(v @ self.apply(v)), 0.0)))

    def inner(self, u, v) -> float:
        """Metric inner product ``u^T M v``."""
        u = self._check_dim(u)
        return float(u @ self.apply(v))

    def diagonal_entries(self) -> np.ndarray:
        """Diagonal of M, defined for identity and diagonal kinds only."""
        if self.kind == "identity":
            return np.ones(self.dim)
        if self.kind == "diagonal":
            return self.entries
        raise ValueError("dense preconditioner has no separable diagonal form")

    def whiten_columns(self, cols: np.ndarray) -> np.ndarray:
        """Apply ``M^{-1/2}``-equivalent whitening to the columns of ``cols``.

        For the dense kind this uses the Cholesky factor L (M = L L^T), so the
        result is ``L^{-1} cols``; the whitened operator ``L^{-1} H L^{-T}``
        shares its spectrum with ``M^{-1/2} H M^{-1/2}``.
        """
        if self.kind == "identity":
            return cols
        if self.kind == "diagonal":
            return cols / np.sqrt(self.entries)[:, None]
        return scipy.linalg.solve_triangular(self._chol_lower, cols, lower=True)

    def unwhiten_rows(self, rows: np.ndarray) -> np.ndarray:
        """Transpose counterpart of :meth:`whiten_columns` (``L^{-T} rows``)."""
        if self.kind == "identity":
            return rows
        if self.kind == "diagonal":
            return rows / np.sqrt(self.entries)[:, None]
        return scipy.linalg.solve_triangular(self._chol_lower, rows, lower=True,
                                             trans="T")

    def __repr__(self):
        return (f"Preconditioner(kind={self.kind!r}, dim={self.dim}, "
                f"lambda_min={self.lambda_min:.6g}, lambda_max={self.lambda_max:.6g}, "
                f"cond={self.cond:.6g})")


@dataclass(frozen=True)
class MetricConditioning:
    """Extreme generalized Rayleigh quotients of a curvature operator under M."""

    smoothness: float           # largest eigenvalue of the whitened operator
    strong_convexity: float     # smallest eigenvalue of the whitened operator
    cond: float                 # ratio, inf when not strongly convex
    strongly_convex: bool

    def __iter__(self):
        # allow tuple-style unpacking: L, sigma, kappa = metric_conditioning(...)
        return iter((self.smoothness, self.strong_convexity, self.cond))


def _materialize_whitened(h_apply, precond: Preconditioner) -> np.ndarray:
    """Form the whitened curvature matrix ``M^(-1/2) H M^(-1/2)`` column by column."""
    d = precond.dim
    if callable(h_apply):
        apply_h = h_apply
    else:
        h_mat = np.asarray(h_apply, dtype=float)
        if h_mat.shape != (d, d):
            raise ValueError(f"operator matrix shape {h_mat.shape} does not match dim {d}")
        apply_h = lambda v: h_mat @ v
    basis = np.eye(d)
    half = precond.unwhiten_rows(basis)          # columns M^{-1/2} e_j
    imgs = np.column_stack([apply_h(half[:, j]) for j in range(d)])
    w = precond.whiten_columns(imgs)
    return 0.5 * (w + w.T)


def metric_conditioning(h_apply, precond: Preconditioner) -> MetricConditioning:
    """Smoothness and strong-convexity constants of a quadratic under the M-norm.

    ``h_apply`` is a symmetric positive-semidefinite operator given as a dense
    matrix or a callable ``v -> H v``.  The extreme eigenvalues of the
    whitened operator are located by certified power iteration (largest) and
    inverse power iteration (smallest).  A smallest eigenvalue below 1e-14 is
    flagged as not strongly convex under this metric.
    """
    w = _materialize_whitened(h_apply, precond)
    d = precond.dim
    apply_w = lambda v: w @ v
    smooth, _ = _certified_extreme(apply_w, apply_w, d, maxit=5000, rtol=1e-12,
                                   cert=None, seed=0)
    try:
        low = scipy.linalg.cholesky(w, lower=True)
    except scipy.linalg.LinAlgError:
        return MetricConditioning(smooth, 0.0, float("inf"), False)
    solve_w = lambda v: scipy.linalg.cho_solve((low, True), v)
    sigma, _ = _certified_extreme(solve_w, apply_w, d, maxit=5000, rtol=1e-12,
                                  cert=None, seed=1)
    if sigma < _SIGMA_FLOOR:
        return MetricConditioning(smooth, sigma, float("inf"), False)
    return MetricConditioning(smooth, sigma, smooth / sigma, True)
