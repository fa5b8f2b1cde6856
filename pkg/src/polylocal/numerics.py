"""Dense complex linear-algebra kernel.

Everything here works on plain ``numpy`` arrays: matrices are 2-D arrays,
vectors 1-D arrays.  Nothing is cached and nothing is mutated in place, so the
functions are safe to call from several threads at once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_DROP_TOL = 1e-9
FROZEN_TOL = 1e-12


def as_matrix(A) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def _real_if_possible(A: np.ndarray) -> np.ndarray:
    # real SVD is about twice as fast; exact zero imaginary parts are common
    if np.iscomplexobj(A) and not np.any(A.imag):
        return A.real
    return A


def operator_norm(A) -> float:
    """Largest singular value of ``A``."""
    A = as_matrix(A)
    if A.size == 0:
        raise ValueError("operator_norm of an empty matrix")
    return float(np.linalg.norm(_real_if_possible(A), 2))


def is_unitary(A, tol: float = 1e-10) -> tuple[bool, float]:
    """Return ``(ok, residual)`` with residual = ||A^dagger A - I||_2."""
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"is_unitary needs a square matrix, got {A.shape}")
    residual = operator_norm(A.conj().T @ A - np.eye(A.shape[0]))
    return residual <= tol, residual


def gram_schmidt(candidates, frozen_prefix: int = 0, drop_tol: float = DEFAULT_DROP_TOL):
    """Orthonormalize ``candidates`` in the given order.

    The first ``frozen_prefix`` vectors must already be orthonormal and are
    copied to the output untouched.  Every later vector is orthogonalized
    against everything retained so far (modified Gram-Schmidt, applied twice);
    if what is left has norm below ``drop_tol`` the vector is dropped.

    Returns
    -------
    frame : ndarray, shape (r, d)
        Retained orthonormal vectors as rows, frozen prefix first.
    dropped : list of int
        Indices (into ``candidates``) of the dropped vectors.
    """
    if drop_tol <= 0:
        raise ValueError("drop_tol must be positive")
    vecs = np.array(candidates, dtype=complex, ndmin=2)
    if vecs.size and not np.all(np.isfinite(vecs)):
        raise ValueError("candidates have non-finite entries")
    m = vecs.shape[0]
    if not 0 <= frozen_prefix <= m:
        raise ValueError(f"frozen_prefix={frozen_prefix} outside 0..{m}")

    frozen = vecs[:frozen_prefix]
    if frozen_prefix:
        gram = frozen @ frozen.conj().T
        offending = float(np.max(np.abs(gram - np.eye(frozen_prefix))))
        if offending > FROZEN_TOL:
            raise ValueError(
                f"frozen prefix is not orthonormal: max |<q_i,q_j> - delta_ij| = {offending:.3e}"
            )

    frame = [row.copy() for row in frozen]
    dropped = []
    for idx in range(frozen_prefix, m):
        v = vecs[idx].copy()
        for _ in range(2):
            for q in frame:
                v -= np.vdot(q, v) * q
        nrm = np.linalg.norm(v)
        if nrm < drop_tol:
            dropped.append(idx)
            continue
        frame.append(v / nrm)

    d = vecs.shape[1]
    return (np.array(frame) if frame else np.zeros((0, d), dtype=complex)), dropped


@dataclass(frozen=True)
class TwoLevel:
    """A unitary acting as ``u`` on span(e_i, e_j), identity elsewhere (i < j)."""

    i: int
    j: int
    u: np.ndarray

    def dense(self, dim: int) -> np.ndarray:
        out = np.eye(dim, dtype=complex)
        idx = [self.i, self.j]
        out[np.ix_(idx, idx)] = self.u
        return out


def two_level_decompose(U, tol: float = 1e-10) -> list[TwoLevel]:
    """Factor a unitary into two-level unitaries.

    Factors are returned in application order: ``U = F[-1] @ ... @ F[0]``.
    Givens rotations clear the subdiagonal column by column; leftover
    diagonal phases become the first applied factors.  Adjacent factors on the
    same index pair are merged, so a 2x2 input yields a single factor and the
    identity yields none.
    """
    U = as_matrix(U).astype(complex)
    ok, res = is_unitary(U, tol)
    if not ok:
        raise ValueError(f"two_level_decompose needs a unitary input (residual {res:.3e})")
    d = U.shape[0]
    if d == 1:
        return [] if abs(U[0, 0] - 1) <= tol else [TwoLevel(0, 0, U.copy())]

    A = U.copy()
    rotations = []  # G_1, G_2, ... with G_m ... G_1 U = diag
    for j in range(d - 1):
        for i in range(j + 1, d):
            b = A[i, j]
            if b == 0:
                continue
            a = A[j, j]
            r = np.hypot(abs(a), abs(b))
            g = np.array([[np.conj(a), np.conj(b)], [-b, a]]) / r
            A[[j, i], :] = g @ A[[j, i], :]
            A[i, j] = 0.0
            rotations.append(TwoLevel(j, i, g))

    # A is now diagonal; a phase sits wherever a column needed no rotation
    factors = []
    for j in range(d):
        phase = A[j, j]
        if abs(phase - 1) <= 1e-15:
            continue
        if j < d - 1:
            factors.append(TwoLevel(j, j + 1, np.diag([phase, 1.0]).astype(complex)))
        else:
            factors.append(TwoLevel(d - 2, d - 1, np.diag([1.0, phase]).astype(complex)))
    for g in reversed(rotations):
        factors.append(TwoLevel(g.i, g.j, g.u.conj().T))
    return _merge_same_pair(factors)


def _merge_same_pair(factors: list[TwoLevel]) -> list[TwoLevel]:
    merged: list[TwoLevel] = []
    for f in factors:
        if merged and (merged[-1].i, merged[-1].j) == (f.i, f.j):
            prev = merged.pop()
            f = TwoLevel(f.i, f.j, f.u @ prev.u)
        merged.append(f)
    return [f for f in merged if not np.allclose(f.u, np.eye(2), atol=1e-15, rtol=0)]


def compose_two_level(factors, dim: int) -> np.ndarray:
    """Multiply factors back together in application order."""
    out = np.eye(dim, dtype=complex)
    for f in factors:
        out = f.dense(dim) @ out
    return out
