"""Finite-sum objectives F(x) = (1/n) sum_i f_i(x) + psi(x).

Three smooth parts are provided: least squares (lasso when paired with the
l1 regularizer), logistic loss, and a synthetic quadratic sum whose
individual components may be nonconvex while their average stays strongly
convex.  Any ridge term lambda2*||x||^2 is folded into every component f_i,
so the nonsmooth part stays a plain l1 norm with an exact prox.

Feature matrices may be dense ndarrays or scipy.sparse matrices (stored as
CSR).  Objectives are immutable after construction; the gradient oracles are
safe to call concurrently.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.sparse as sp

from .metric import Preconditioner

__all__ = [
    "Regularizer",
    "LeastSquares",
    "Logistic",
    "NonconvexQuadSum",
    "objective_value",
    "build_preconditioner",
    "gen_sum_of_nonconvex",
    "gen_ill_conditioned_least_squares",
    "gen_logistic",
]


class Regularizer:
    """The nonsmooth part psi: either zero or ``lambda1 * ||x||_1``."""

    __slots__ = ("kind", "lambda1")

    def __init__(self, kind: str, lambda1: float = 0.0):
        if kind not in ("zero", "l1"):
            raise ValueError(f"unknown regularizer kind {kind!r}")
        if kind == "l1" and not lambda1 > 0:
            raise ValueError("l1 weight must be positive")
        self.kind = kind
        self.lambda1 = float(lambda1)

    @classmethod
    def zero(cls) -> "Regularizer":
        return cls("zero")

    @classmethod
    def l1(cls, lambda1: float) -> "Regularizer":
        return cls("l1", lambda1)

    def value(self, x) -> float:
        if self.kind == "zero":
            return 0.0
        return self.lambda1 * float(np.abs(x).sum())

    def prox(self, x, t: float) -> np.ndarray:
        """Proximal mapping of ``t * psi``: soft-thresholding for the l1 kind."""
        if t <= 0:
            raise ValueError("prox step size must be positive")
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return x.copy()
        thresh = t * self.lambda1
        return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)

    def subgradient_project(self, q: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Pointwise projection of q onto the subdifferential of psi at x."""
        if self.kind == "zero":
            return np.zeros_like(q)
        s = self.lambda1 * np.sign(x)
        at_zero = x == 0.0
        s[at_zero] = np.clip(q[at_zero], -self.lambda1, self.lambda1)
        return s

    def __repr__(self):
        if self.kind == "zero":
            return "Regularizer.zero()"
        return f"Regularizer.l1({self.lambda1:g})"


def _as_features(a):
    """Normalize a feature matrix to dense ndarray or CSR, returning (A, sparse?)."""
    if sp.issparse(a):
        return a.tocsr(), True
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ValueError("feature matrix must be two-dimensional")
    return arr, False


class _FiniteSum:
    """Shared shape bookkeeping for the finite-sum objectives."""

    n: int
    d: int

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"point of shape {x.shape} does not match dimension {self.d}")
        return x

    def _check_index(self, i: int) -> int:
        i = int(i)
        if not 0 <= i < self.n:
            raise IndexError(f"component index {i} out of range [0, {self.n})")
        return i


class LeastSquares(_FiniteSum):
    """f_i(x) = 0.5*(a_i^T x - b_i)^2 + lambda2*||x||^2."""

    def __init__(self, a, b, lambda2: float = 0.0):
        self.A, self._sparse = _as_features(a)
        self.b = np.asarray(b, dtype=float).copy()
        self.n, self.d = self.A.shape
        if self.n < 1 or self.d < 1:
            raise ValueError("need at least one row and one column")
        if self.b.shape != (self.n,):
            raise ValueError(f"label vector shape {self.b.shape} does not match n={self.n}")
        if lambda2 < 0:
            raise ValueError("ridge weight must be nonnegative")
        self.lambda2 = float(lambda2)

    def _row_dot(self, i, x):
        if self._sparse:
            s, e = self.A.indptr[i], self.A.indptr[i + 1]
            cols = self.A.indices[s:e]
            vals = self.A.data[s:e]
            return cols, vals, float(vals @ x[cols])
        row = self.A[i]
        return None, row, float(row @ x)

    def component_gradient(self, i, x) -> np.ndarray:
        x = self._check_x(x)
        i = self._check_index(i)
        cols, vals, ax = self._row_dot(i, x)
        r = ax - self.b[i]
        if self._sparse:
            g = (2.0 * self.lambda2) * x if self.lambda2 else np.zeros(self.d)
            g[cols] += vals * r
            return g
        g = vals * r
        if self.lambda2:
            g += (2.0 * self.lambda2) * x
        return g

    def full_gradient(self, x) -> np.ndarray:
        x = self._check_x(x)
        resid = self.A @ x - self.b
        g = (self.A.T @ resid) / self.n
        if self.lambda2:
            g += (2.0 * self.lambda2) * x
        return np.asarray(g)

    def smooth_value(self, x) -> float:
        x = self._check_x(x)
        resid = self.A @ x - self.b
        val = 0.5 * float(resid @ resid) / self.n
        if self.lambda2:
            val += self.lambda2 * float(x @ x)
        return val

    def gram(self) -> np.ndarray:
        """The data Gram matrix ``(1/n) A^T A`` as a dense array."""
        g = (self.A.T @ self.A) / self.n
        return np.asarray(g.todense()) if sp.issparse(g) else np.asarray(g)

    def gram_diagonal(self) -> np.ndarray:
        if self._sparse:
            sq = self.A.multiply(self.A).sum(axis=0)
            return np.asarray(sq).ravel() / self.n
        return np.einsum("ij,ij->j", self.A, self.A) / self.n

    def hessian_matvec(self, v) -> np.ndarray:
        """Hessian of the smooth part applied to v (exact for this kind)."""
        out = np.asarray(self.A.T @ (self.A @ v)) / self.n
        if self.lambda2:
            out += (2.0 * self.lambda2) * v
        return out

    def hessian_matrix(self) -> np.ndarray:
        return self.gram() + (2.0 * self.lambda2) * np.eye(self.d)


class Logistic(_FiniteSum):
    """f_i(x) = log(1 + exp(-b_i * a_i^T x)) + lambda2*||x||^2.

    Gradients use the numerically stable sigmoid and the objective uses
    ``log(1+exp(z))`` evaluated as ``max(z,0) + log1p(exp(-|z|))`` so nothing
    overflows for margins up to several hundred.
    """

    def __init__(self, a, b, lambda2: float = 0.0):
        self.A, self._sparse = _as_features(a)
        self.b = np.asarray(b, dtype=float).copy()
        self.n, self.d = self.A.shape
        if self.b.shape != (self.n,):
            raise ValueError(f"label vector shape {self.b.shape} does not match n={self.n}")
        if lambda2 < 0:
            raise ValueError("ridge weight must be nonnegative")
        self.lambda2 = float(lambda2)
        if not np.all(np.abs(self.b) == 1.0):
            warnings.warn("logistic labels outside {-1,+1} are used verbatim",
                          stacklevel=2)

    @staticmethod
    def _sigmoid(z):
        # stable logistic function, elementwise
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out

    def component_gradient(self, i, x) -> np.ndarray:
        x = self._check_x(x)
        i = self._check_index(i)
        bi = self.b[i]
        if self._sparse:
            s, e = self.A.indptr[i], self.A.indptr[i + 1]
            cols = self.A.indices[s:e]
            vals = self.A.data[s:e]
            z = bi * float(vals @ x[cols])
            coef = -bi * float(self._sigmoid(np.array([-z]))[0])
            g = (2.0 * self.lambda2) * x if self.lambda2 else np.zeros(self.d)
            g[cols] += coef * vals
            return g
        row = self.A[i]
        z = bi * float(row @ x)
        coef = -bi * float(self._sigmoid(np.array([-z]))[0])
        g = coef * row
        if self.lambda2:
            g = g + (2.0 * self.lambda2) * x
        return g

    def full_gradient(self, x) -> np.ndarray:
        x = self._check_x(x)
        z = self.b * np.asarray(self.A @ x)
        coef = -self.b * self._sigmoid(-z)
        g = np.asarray(self.A.T @ coef) / self.n
        if self.lambda2:
            g += (2.0 * self.lambda2) * x
        return g

    def smooth_value(self, x) -> float:
        x = self._check_x(x)
        z = self.b * np.asarray(self.A @ x)
        val = float(np.logaddexp(0.0, -z).mean())
        if self.lambda2:
            val += self.lambda2 * float(x @ x)
        return val

    def scaled_gram(self) -> np.ndarray:
        """``(1/4n) B^T B`` with ``B = diag(b) A``, the curvature upper bound."""
        if self._sparse:
            b_mat = sp.diags(self.b) @ self.A
            g = (b_mat.T @ b_mat) / (4.0 * self.n)
            return np.asarray(g.todense())
        b_mat = self.b[:, None] * self.A
        return (b_mat.T @ b_mat) / (4.0 * self.n)

    def scaled_gram_diagonal(self) -> np.ndarray:
        if self._sparse:
            b_mat = sp.diags(self.b) @ self.A
            sq = b_mat.multiply(b_mat).sum(axis=0)
            return np.asarray(sq).ravel() / (4.0 * self.n)
        b_mat = self.b[:, None] * self.A
        return np.einsum("ij,ij->j", b_mat, b_mat) / (4.0 * self.n)

    def hessian_matvec(self, v) -> np.ndarray:
        """Curvature upper bound (1/4n) B^T B + 2*lambda2*I applied to v."""
        out = np.asarray(self.A.T @ (self.b * self.b * np.asarray(self.A @ v)))
        out /= 4.0 * self.n
        if self.lambda2:
            out += (2.0 * self.lambda2) * v
        return out

    def hessian_matrix(self) -> np.ndarray:
        return self.scaled_gram() + (2.0 * self.lambda2) * np.eye(self.d)


class NonconvexQuadSum(_FiniteSum):
    """f_i(x) = 0.5*x^T (c_i c_i^T + s_i I) x + bvec^T x with sum_i s_i = 0.

    The per-component curvature shifts ``s_i`` (each +-100) cancel in the
    average, so the sum is as well-conditioned as the Gram of the c_i while
    half the components are individually nonconvex.
    """

    def __init__(self, c, d_sign, bvec):
        self.C = np.asarray(c, dtype=float).copy()
        if self.C.ndim != 2:
            raise ValueError("component matrix must be two-dimensional")
        self.n, self.d = self.C.shape
        self.d_sign = np.asarray(d_sign, dtype=float).copy()
        self.bvec = np.asarray(bvec, dtype=float).copy()
        if self.d_sign.shape != (self.n,):
            raise ValueError("curvature-shift vector must have one entry per component")
        if self.bvec.shape != (self.d,):
            raise ValueError("linear term must have dimension d")
        if abs(self.d_sign.sum()) > 1e-9 * max(1.0, np.abs(self.d_sign).max()):
            raise ValueError("curvature shifts must cancel (sum to zero)")
        self._mean_shift = float(self.d_sign.sum()) / self.n

    def component_gradient(self, i, x) -> np.ndarray:
        x = self._check_x(x)
        i = self._check_index(i)
        c = self.C[i]
        return c * float(c @ x) + self.d_sign[i] * x + self.bvec

    def full_gradient(self, x) -> np.ndarray:
        x = self._check_x(x)
        g = self.C.T @ (self.C @ x) / self.n
        if self._mean_shift:
            g += self._mean_shift * x
        return g + self.bvec

    def smooth_value(self, x) -> float:
        x = self._check_x(x)
        cx = self.C @ x
        val = 0.5 * (float(cx @ cx) + self.d_sign.sum() * float(x @ x)) / self.n
        return val + float(self.bvec @ x)

    def gram(self) -> np.ndarray:
        return self.C.T @ self.C / self.n

    def gram_diagonal(self) -> np.ndarray:
        return np.einsum("ij,ij->j", self.C, self.C) / self.n

    def hessian_matvec(self, v) -> np.ndarray:
        out = self.C.T @ (self.C @ v) / self.n
        if self._mean_shift:
            out += self._mean_shift * v
        return out

    def hessian_matrix(self) -> np.ndarray:
        h = self.gram()
        if self._mean_shift:
            h = h + self._mean_shift * np.eye(self.d)
        return h


def objective_value(prob, reg: Regularizer, x) -> float:
    """Composite objective F(x) = smooth part + psi(x)."""
    return prob.smooth_value(x) + reg.value(np.asarray(x, dtype=float))


def build_preconditioner(prob, kind: str, alpha: float | None = None) -> Preconditioner:
    """Data-derived preconditioners.

    ``kind="full"`` is the dense curvature matrix of the smooth part's data
    term ((1/n) A^T A for least squares, (1/4n) B^T B for logistic, (1/n)
    C^T C for the quadratic sum).  ``kind="diag_shift"`` keeps only its
    diagonal and adds ``alpha * I`` (alpha > 0), which makes the solver
    subproblems exactly solvable coordinatewise.
    """
    if kind == "full":
        if isinstance(prob, LeastSquares):
            mat = prob.gram()
        elif isinstance(prob, Logistic):
            mat = prob.scaled_gram()
        elif isinstance(prob, NonconvexQuadSum):
            mat = prob.gram()
        else:
            raise TypeError(f"unsupported problem type {type(prob).__name__}")
        return Preconditioner.dense(mat)
    if kind == "diag_shift":
        if alpha is None or alpha <= 0:
            raise ValueError("diag_shift requires a positive alpha")
        if isinstance(prob, LeastSquares):
            diag = prob.gram_diagonal()
        elif isinstance(prob, Logistic):
            diag = prob.scaled_gram_diagonal()
        elif isinstance(prob, NonconvexQuadSum):
            diag = prob.gram_diagonal()
        else:
            raise TypeError(f"unsupported problem type {type(prob).__name__}")
        return Preconditioner.diagonal(diag + alpha)
    raise ValueError(f"unknown preconditioner kind {kind!r} (use 'full' or 'diag_shift')")


def gen_sum_of_nonconvex(n: int = 2000, d: int = 100, seed: int = 0) -> NonconvexQuadSum:
    """Synthetic sum-of-nonconvex instance.

    Draws n unit-norm rows a_i, spikes the first d of them with 5*i at
    coordinate i (1-based), assigns curvature shifts -100 to the first half
    of the components and +100 to the rest, and draws the linear term from
    the same seeded stream (rows first, then the linear term).
    """
    if n % 2 != 0:
        raise ValueError("component count n must be even")
    if n < 2 * d:
        raise ValueError("need n >= 2*d so the spiked rows fit in the first half")
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((n, d))
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    c[np.arange(d), np.arange(d)] += 5.0 * np.arange(1, d + 1)
    d_sign = np.full(n, 100.0)
    d_sign[: n // 2] = -100.0
    bvec = rng.standard_normal(d)
    return NonconvexQuadSum(c, d_sign, bvec)


def gen_ill_conditioned_least_squares(n: int, d: int, seed: int,
                                      gram_cond: float = 1e4,
                                      lambda2: float = 0.0,
                                      noise: float = 0.01) -> LeastSquares:
    """Seeded dense least-squares instance with a prescribed Gram condition number.

    The design matrix has log-spaced singular values so that
    cond(A^T A) = gram_cond, scaled so the largest eigenvalue of (1/n) A^T A
    is one.  Labels come from a planted coefficient vector plus Gaussian
    noise.
    """
    if gram_cond < 1:
        raise ValueError("gram condition number must be >= 1")
    rng = np.random.default_rng(seed)
    u, _ = np.linalg.qr(rng.standard_normal((n, d)))
    v, _ = np.linalg.qr(rng.standard_normal((d, d)))
    sing = np.sqrt(n) * np.logspace(0.0, -0.5 * np.log10(gram_cond), d)
    a = (u * sing) @ v.T
    x_true = rng.standard_normal(d)
    b = a @ x_true + noise * rng.standard_normal(n)
    return LeastSquares(a, b, lambda2)


def gen_logistic(n: int, d: int, seed: int, lambda2: float = 0.0) -> Logistic:
    """Seeded binary classification instance with labels in {-1, +1}."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, d)) / np.sqrt(d)
    x_true = rng.standard_normal(d)
    margin = a @ x_true + 0.1 * rng.standard_normal(n)
    b = np.where(margin >= 0, 1.0, -1.0)
    return Logistic(a, b, lambda2)
