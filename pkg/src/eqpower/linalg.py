"""Dense structured matrices: symmetric Toeplitz covariances, their circulant
equivalents, and the norms used to compare matrix sequences.

Everything is stored densely. Target sizes are n <= ~4096, where O(n^3)
Cholesky work is acceptable; the only structured shortcut is computing
circulant eigenvalues with an FFT.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import NonPositiveEigenvalueError, PositiveDefinitenessError

__all__ = [
    "ToeplitzCov",
    "CirculantEquiv",
    "build_toeplitz",
    "build_circulant_equiv",
    "circulant_coefficients",
    "circulant_eigenvalues",
    "circulant_matrix",
    "cholesky",
    "strong_norm",
    "weak_norm",
    "rotate",
    "rotate_vector",
    "spd_solve",
    "spd_inverse",
]

# relative bound on the imaginary part of circulant DFT eigenvalues
IMAG_TOL = 1e-10


def _vector(seq, name="seq"):
    v = np.asarray(seq, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    return v


def cholesky(A):
    """Lower Cholesky factor (scipy ``cho_factor`` tuple) or PositiveDefinitenessError."""
    try:
        return scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise PositiveDefinitenessError(
            f"matrix of size {len(A)} is not positive definite: {exc}"
        ) from None


@dataclass(frozen=True, eq=False)
class ToeplitzCov:
    """Symmetric Toeplitz matrix ``T[i, j] = seq[|i - j|]``, validated SPD."""

    seq: np.ndarray

    @property
    def n(self) -> int:
        return self.seq.size

    @cached_property
    def dense(self) -> np.ndarray:
        return scipy.linalg.toeplitz(self.seq)

    @cached_property
    def factor(self):
        return cholesky(self.dense)

    def solve(self, B):
        return scipy.linalg.cho_solve(self.factor, B, check_finite=False)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.dense)


@dataclass(frozen=True, eq=False)
class CirculantEquiv:
    """Symmetric circulant ``C[i, j] = c[(j - i) mod n]``, validated SPD."""

    c: np.ndarray

    @property
    def n(self) -> int:
        return self.c.size

    @cached_property
    def dense(self) -> np.ndarray:
        return circulant_matrix(self.c)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return _dft_eigenvalues(self.c)


def build_toeplitz(seq) -> ToeplitzCov:
    """Build ``R_n`` from the ACF sequence; raises PositiveDefinitenessError."""
    seq = _vector(seq)
    if seq[0] <= 0:
        raise ValueError(f"seq[0] must be positive, got {seq[0]}")
    T = ToeplitzCov(seq)
    T.factor  # validates
    return T


def circulant_coefficients(seq) -> np.ndarray:
    """First row of the circulant equivalent of the Toeplitz matrix of ``seq``.

    ``c[k] = (1 - k/n) seq[k] + (k/n) seq[n - k]``, a linear blend of the lag
    ``k`` and lag ``n - k`` correlations, which makes ``c[k] == c[n - k]``.
    """
    r = _vector(seq)
    n = r.size
    k = np.arange(1, n)
    c = r.copy()
    c[1:] = r[1:] + k / n * (r[n - k] - r[1:])
    # enforce exact symmetry; the two halves differ only by roundoff
    c[1:] = 0.5 * (c[1:] + c[1:][::-1])
    return c


def _dft_eigenvalues(c):
    lam = np.fft.fft(c)
    scale = max(np.max(np.abs(c)), np.finfo(float).tiny)
    worst = np.max(np.abs(lam.imag))
    if worst > IMAG_TOL * scale:
        raise ValueError(
            f"circulant first row is not symmetric: |Im(eig)| = {worst:.3g}"
        )
    return lam.real.copy()


def build_circulant_equiv(seq) -> CirculantEquiv:
    """Build ``C_n`` from the ACF sequence; raises NonPositiveEigenvalueError."""
    C = CirculantEquiv(circulant_coefficients(seq))
    lam = C.eigenvalues
    i = int(np.argmin(lam))
    if lam[i] <= 0:
        raise NonPositiveEigenvalueError(lam[i], i, C.n)
    return C


def circulant_eigenvalues(C) -> np.ndarray:
    """Eigenvalues of a symmetric circulant, as the DFT of its first row.

    ``C`` may be a :class:`CirculantEquiv` or a first-row vector.
    """
    if isinstance(C, CirculantEquiv):
        return C.eigenvalues.copy()
    return _dft_eigenvalues(_vector(C, "c"))


def circulant_matrix(c) -> np.ndarray:
    """Dense matrix with ``C[i, j] = c[(j - i) mod n]``."""
    c = np.asarray(c, dtype=float)
    n = c.size
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return c[idx]


def _dense(A):
    if isinstance(A, (ToeplitzCov, CirculantEquiv)):
        return A.dense
    return np.asarray(A, dtype=float)


def strong_norm(A) -> float:
    """Operator 2-norm. For symmetric input this is ``max |eigenvalue|``."""
    A = _dense(A)
    if A.size == 0:
        return 0.0
    if np.array_equal(A, A.T):
        return float(np.max(np.abs(np.linalg.eigvalsh(A))))
    return float(np.linalg.norm(A, 2))


def weak_norm(A) -> float:
    """Hilbert-Schmidt norm scaled by ``1/sqrt(n)``: ``sqrt(trace(A^T A) / n)``."""
    A = _dense(A)
    n = A.shape[0]
    return float(np.sqrt(np.sum(A * A) / n))


def rotate(A, i: int) -> np.ndarray:
    """Similarity transform ``S_i A S_i^T`` by the cyclic permutation ``S_i``.

    Rows move up by ``i`` and columns move left by ``i`` (cyclically), so
    ``rotate(diag(d), i) == diag(roll(d, -i))`` and circulants are fixed.
    """
    A = _dense(A)
    n = A.shape[0]
    if int(i) != i or not 0 <= i < n:
        raise ValueError(f"rotation degree must be in [0, {n}), got {i!r}")
    return np.roll(A, (-int(i), -int(i)), axis=(0, 1))


def rotate_vector(p, i: int) -> np.ndarray:
    """``(p[i], ..., p[n-1], p[0], ..., p[i-1])``: the diagonal of a rotated diag."""
    p = np.asarray(p, dtype=float)
    n = p.size
    if int(i) != i or not 0 <= i < n:
        raise ValueError(f"rotation degree must be in [0, {n}), got {i!r}")
    return np.roll(p, -int(i))


def spd_solve(A, B) -> np.ndarray:
    """``A^{-1} B`` through a Cholesky factorization of symmetric PD ``A``."""
    if isinstance(A, ToeplitzCov):
        return A.solve(np.asarray(B, dtype=float))
    factor = cholesky(_dense(A))
    return scipy.linalg.cho_solve(factor, np.asarray(B, dtype=float), check_finite=False)


def spd_inverse(A) -> np.ndarray:
    A = _dense(A)
    X = spd_solve(A, np.eye(A.shape[0]))
    return 0.5 * (X + X.T)
