"""Block factorization of a periodic band unitary.

Given M_N from a stencil, :func:`truncate` replaces a slab of rows around
every cut ``mK`` so that the result Mbar_N is block diagonal with identical
K x K blocks.  The residual factor Mbarbar_N = Mbar_N^dagger M_N differs from
the identity only on windows centred on the cuts, so it is block diagonal
after a cyclic shift by K/2.  Hence

    M_N = (Mbar (x) id) . P . (Mbarbar (x) id) . P^-1,

where P adds K/2 mod N.  Structural claims are checked numerically on every
call; exact-zero claims at 1e-12, accumulated-arithmetic claims at 1e-9.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .banded import (
    BandStencil,
    StencilError,
    band_width,
    check_admissible,
    is_power_of_two,
    materialize,
    net_shift,
)
from .numerics import gram_schmidt, is_unitary, operator_norm

ZERO_TOL = 1e-12
ARITH_TOL = 1e-9


class PlanError(ValueError):
    """No admissible block size for this stencil and N."""


class TruncationError(ValueError):
    """A structural postcondition of the construction failed."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class TruncationPlan:
    N: int
    K: int
    b: int
    k: int
    L_I: int

    @property
    def cuts(self) -> list[int]:
        return list(range(0, self.N, self.K))

    @property
    def shift(self) -> int:
        return self.K // 2

    def I(self, m: int) -> np.ndarray:
        c = m * self.K
        h = self.L_I // 2
        return np.arange(c - h, c + h) % self.N

    def J(self, m: int) -> np.ndarray:
        c = m * self.K
        h = self.L_I // 2 + self.b
        return np.arange(c - h, c + h) % self.N


@dataclass
class TruncationResult:
    Mbar_block: np.ndarray
    Mbarbar_block: np.ndarray
    shift: int
    plan: TruncationPlan
    diagnostics: dict = field(default_factory=dict)


def make_plan(N: int, b: int, k: int = 1, K_override: int | None = None) -> TruncationPlan:
    L_I = 2 * b + 2
    J_len = L_I + 2 * b
    if K_override is not None:
        K = int(K_override)
        if not is_power_of_two(K) or K % k or K < 2 * k:
            raise PlanError(f"K={K} must be a power-of-two multiple 2^j k (j >= 1) of k={k}")
        if N % K or N // K < 2:
            raise PlanError(f"K={K} must divide N={N} with at least two blocks")
        # J must fit in half a block; the local window J +- 2b must fit in one
        if 2 * J_len > K:
            raise PlanError(f"K={K} too small for b={b}: need |J| = {J_len} <= K/2")
        return TruncationPlan(N, K, b, k, L_I)

    K = 2 * k
    while K < 8 * (b + 1):
        K *= 2
    if N % K or N // K < 2:
        raise PlanError(f"no admissible block size at N={N}: b={b} needs K={K}, so N >= {2 * K}")
    return TruncationPlan(N, K, b, k, L_I)


def plan(s: BandStencil, N: int, K_override: int | None = None) -> TruncationPlan:
    try:
        check_admissible(s, N)
    except StencilError as exc:
        raise PlanError(str(exc)) from exc
    shift = round(net_shift(s))
    if shift:
        raise PlanError(
            f"{s.name} moves weight {shift:+d} columns across every cut; "
            f"block truncation needs reanchor(s, {shift}) first"
        )
    return make_plan(N, s.b, s.k, K_override)


def _center_out(lo: int, hi: int, c: int) -> list[int]:
    """Indices of [lo, hi) ordered c-1, c, c-2, c+1, ... (unwrapped)."""
    left = list(range(c - 1, lo - 1, -1))
    right = list(range(c, hi))
    order = []
    for t in range(max(len(left), len(right))):
        if t < len(left):
            order.append(left[t])
        if t < len(right):
            order.append(right[t])
    return order


def _truncate_cut(M: np.ndarray, p: TruncationPlan, m: int):
    """Gram-Schmidt replacement rows for the slab around cut m*K.

    Works in the window [c - K/2, c + K/2), which holds J and the support of
    every retained row touching J.  Returns (slot rows, window cols, rows,
    per-cut diagnostics).
    """
    N, K, b = p.N, p.K, p.b
    c = m * K
    h = p.L_I // 2
    win = np.arange(c - K // 2, c + K // 2)   # unwrapped
    wcols = win % N
    I_lo, I_hi = c - h, c + h
    J_lo, J_hi = I_lo - b, I_hi + b

    frozen_idx = [i for i in range(J_lo - b + 1, J_hi + b - 1) if not I_lo <= i < I_hi]
    frozen = M[np.ix_(np.array(frozen_idx) % N, wcols)]
    leak = np.abs(1.0 - np.linalg.norm(frozen, axis=1))
    if leak.size and leak.max() > ZERO_TOL:
        raise TruncationError(f"cut {m}: retained rows leave the local window; band b={b} too small")

    cand_idx = _center_out(J_lo, J_hi, c)
    cands = np.zeros((len(cand_idx), K), dtype=complex)
    cands[np.arange(len(cand_idx)), np.array(cand_idx) - win[0]] = 1.0

    frame, dropped = gram_schmidt(np.vstack([frozen, cands]), frozen_prefix=len(frozen_idx))
    new = frame[len(frozen_idx):]
    if len(new) != p.L_I:
        raise TruncationError(
            f"cut {m}: Gram-Schmidt kept {len(new)} vectors, expected L_I={p.L_I}",
            {"dropped": len(dropped)},
        )

    # each new vector lies in span(e_j, j in J); clear the roundoff outside J
    in_J = (win >= J_lo) & (win < J_hi)
    outside = float(np.max(np.abs(new[:, ~in_J]))) if (~in_J).any() else 0.0
    if outside > ARITH_TOL:
        raise TruncationError(f"cut {m}: frame leaks {outside:.2e} outside J")
    new[:, ~in_J] = 0.0

    left_cols = win < c
    left_mass = np.linalg.norm(new[:, left_cols], axis=1)
    right_mass = np.linalg.norm(new[:, ~left_cols], axis=1)
    if np.any(np.minimum(left_mass, right_mass) > ZERO_TOL):
        raise TruncationError(f"cut {m}: a frame vector straddles the cut")
    weights = np.abs(new) ** 2
    centroid = weights @ (win - c) / weights.sum(axis=1)
    is_left = left_mass > right_mass
    left = [v for _, v in sorted(zip(centroid[is_left], new[is_left]), key=lambda t: t[0])]
    right = [v for _, v in sorted(zip(centroid[~is_left], new[~is_left]), key=lambda t: t[0])]
    if len(left) != h or len(right) != h:
        raise TruncationError(
            f"cut {m}: {len(left)} frame vectors left of the cut and {len(right)} right, "
            f"slots are {h}/{h}; the stencil carries a net shift",
        )
    slots = np.arange(I_lo, I_hi) % N
    return slots, wcols, np.array(left + right), {"dropped": len(dropped), "outside_J": outside}


def _blocks(M: np.ndarray, K: int) -> list[np.ndarray]:
    return [M[a:a + K, a:a + K] for a in range(0, M.shape[0], K)]


def _block_diag_residual(M: np.ndarray, K: int) -> float:
    mask = np.ones(M.shape, dtype=bool)
    for a in range(0, M.shape[0], K):
        mask[a:a + K, a:a + K] = False
    return float(np.max(np.abs(M[mask]))) if mask.any() else 0.0


def pure_rows(Mbar: np.ndarray, p: TruncationPlan, m: int = 0, tol: float = ZERO_TOL) -> int:
    """Number of slab rows around cut m that are exactly standard basis vectors."""
    count = 0
    for i in p.I(m):
        a = np.abs(Mbar[i])
        j = int(np.argmax(a))
        if abs(a[j] - 1) <= tol and np.max(np.delete(a, j)) <= tol:
            count += 1
    return count


def truncate_matrix(M: np.ndarray, p: TruncationPlan) -> tuple[np.ndarray, np.ndarray, dict]:
    """Truncation of a dense M_N; returns (Mbar_full, Mbar_block, diagnostics)."""
    N, K = p.N, p.K
    if M.shape != (N, N):
        raise ValueError(f"matrix is {M.shape}, plan expects N={N}")
    Mbar = M.astype(complex, copy=True)
    cut_diag = []
    for m in range(N // K):
        slots, wcols, rows, info = _truncate_cut(M, p, m)
        Mbar[slots, :] = 0.0
        Mbar[np.ix_(slots, wcols)] = rows
        cut_diag.append(info)

    blocks = _blocks(Mbar, K)
    block_residual = _block_diag_residual(Mbar, K)
    if block_residual == 0.0:
        unitarity = max(is_unitary(B)[1] for B in blocks)
    else:
        unitarity = is_unitary(Mbar)[1]
    diag = {
        "K": K,
        "L_I": p.L_I,
        "unitarity_residual": unitarity,
        "block_residual": block_residual,
        "block_equality_residual": max(float(np.max(np.abs(B - blocks[0]))) for B in blocks),
        "band_width": band_width(Mbar),
        "pure_rows": [pure_rows(Mbar, p, m) for m in range(N // K)],
        "dropped": [d["dropped"] for d in cut_diag],
        "outside_J": max(d["outside_J"] for d in cut_diag),
    }
    failures = []
    if unitarity > ARITH_TOL:
        failures.append(f"unitarity residual {unitarity:.2e}")
    if block_residual > ZERO_TOL:
        failures.append(f"cross-block entry {block_residual:.2e}")
    if diag["block_equality_residual"] > ZERO_TOL:
        failures.append(f"blocks differ by {diag['block_equality_residual']:.2e}")
    if diag["band_width"] > 2 * p.b:
        failures.append(f"band width {diag['band_width']} exceeds 2b={2 * p.b}")
    if any(d != 2 * p.b for d in diag["dropped"]):
        failures.append(f"dropped counts {diag['dropped']} differ from 2b={2 * p.b}")
    if failures:
        raise TruncationError("truncation postconditions failed: " + "; ".join(failures)
                              + " (try a larger K)", diag)
    return Mbar, blocks[0].copy(), diag


def truncate(s: BandStencil, p: TruncationPlan) -> tuple[np.ndarray, np.ndarray]:
    """(Mbar_full, Mbar_block) for the stencil at the plan's size."""
    Mbar, block, _ = truncate_matrix(materialize(s, p.N), p)
    return Mbar, block


def residual_factor(M_N: np.ndarray, Mbar_full: np.ndarray, p: TruncationPlan):
    """(Mbarbar_block, shift) from Mbarbar_N = Mbar_full^dagger M_N.

    Mbarbar_N must equal the identity outside the J windows and be block
    diagonal once conjugated by the cyclic shift x -> x + K/2.
    """
    R = Mbar_full.conj().T @ M_N
    N, K, shift = p.N, p.K, p.shift
    in_J = np.zeros(N, dtype=bool)
    for m in range(N // K):
        in_J[p.J(m)] = True
    off = np.abs(R[~in_J] - np.eye(N)[~in_J])
    if off.size and off.max() > ZERO_TOL:
        r, cidx = np.unravel_index(np.argmax(off), off.shape)
        raise TruncationError(
            f"Mbarbar row {np.flatnonzero(~in_J)[r]} differs from identity by {off.max():.2e} at column {cidx}"
        )
    perm = (np.arange(N) + shift) % N
    S = R[np.ix_(perm, perm)]
    mask = np.ones((N, N), dtype=bool)
    for a in range(0, N, K):
        mask[a:a + K, a:a + K] = False
    if mask.any():
        cross = np.abs(np.where(mask, S, 0))
        if cross.max() > ZERO_TOL:
            i, j = np.unravel_index(np.argmax(cross), cross.shape)
            raise TruncationError(
                f"shifted Mbarbar not block diagonal: |entry| {cross.max():.2e} at "
                f"({(i + shift) % N}, {(j + shift) % N})"
            )
    return S[:K, :K].copy(), shift


def block_repeat(block: np.ndarray, N: int) -> np.ndarray:
    """block (x) id as an N x N matrix: copies of block down the diagonal."""
    return np.kron(np.eye(N // block.shape[0]), block)


def reconstruct(Mbar_block: np.ndarray, Mbarbar_block: np.ndarray, N: int, shift: int) -> np.ndarray:
    """(Mbar (x) id) . P . (Mbarbar (x) id) . P^-1 with P: e_x -> e_{x+shift}."""
    Bbb = block_repeat(Mbarbar_block, N)
    conj = np.roll(Bbb, (shift, shift), axis=(0, 1))   # P B P^-1
    return block_repeat(Mbar_block, N) @ conj


def truncation_blocks(s: BandStencil, p: TruncationPlan) -> TruncationResult:
    """Blocks computed on the smallest cycle N = 2K that holds two cuts.

    The blocks only see a window of width K around each cut, so they are the
    same for every N that admits the plan's K.
    """
    local = make_plan(2 * p.K, p.b, p.k, p.K)
    M = materialize(s, local.N, strict=False)
    Mbar, block, diag = truncate_matrix(M, local)
    bb_block, shift = residual_factor(M, Mbar, local)
    ok, res = is_unitary(bb_block, ARITH_TOL)
    diag = dict(diag, mbarbar_unitarity_residual=res,
                mbarbar_band_width=band_width(Mbar.conj().T @ M))
    if not ok:
        raise TruncationError(f"Mbarbar block not unitary ({res:.2e})", diag)
    return TruncationResult(block, bb_block, shift, p, diag)


def factorization_check(s: BandStencil, N: int, K_override: int | None = None) -> float:
    """||M_N - (Mbar (x) id) P (Mbarbar (x) id) P^-1||_2 for the full-size construction."""
    return factorization_report(s, N, K_override)["factorization_residual"]


def factorization_report(s: BandStencil, N: int, K_override: int | None = None) -> dict:
    p = plan(s, N, K_override)
    M = materialize(s, N)
    Mbar, block, diag = truncate_matrix(M, p)
    bb_block, shift = residual_factor(M, Mbar, p)
    residual = operator_norm(M - reconstruct(block, bb_block, N, shift))
    return {
        "stencil": s.name,
        "N": N,
        "K": p.K,
        "L_I": p.L_I,
        "b": p.b,
        "unitarity_residual": diag["unitarity_residual"],
        "band_width": diag["band_width"],
        "block_residual": diag["block_residual"],
        "pure_rows_per_cut": diag["pure_rows"][0],
        "mbarbar_band_width": band_width(Mbar.conj().T @ M),
        "factorization_residual": residual,
    }


def verify_lemma_containment(M_N: np.ndarray, I, J, b: int) -> tuple[float, float]:
    """Distances behind W_I in V_J and V_I in W_J.

    res_WV is the largest distance from e_i (i in I) to the span of the rows
    of M_N indexed by J; res_VW the largest distance from a row i in I to the
    coordinate subspace W_J.
    """
    N = M_N.shape[0]
    I = np.unique(np.asarray(list(I), dtype=int) % N)
    J = np.unique(np.asarray(list(J), dtype=int) % N)
    if I.size == 0:
        return 0.0, 0.0
    in_J = np.zeros(N, dtype=bool)
    in_J[J] = True
    for d in range(-(b - 1), b):
        missing = ~in_J[(I + d) % N]
        if missing.any():
            raise ValueError(
                f"J does not contain the {b}-neighbourhood of I (index {(I[missing][0] + d) % N} missing)"
            )
    Q, _ = np.linalg.qr(M_N[J, :].T)
    E = np.eye(N, dtype=complex)[:, I]
    res_wv = float(np.max(np.linalg.norm(E - Q @ (Q.conj().T @ E), axis=0)))
    res_vw = float(np.max(np.linalg.norm(M_N[np.ix_(I, ~in_J)], axis=1))) if (~in_J).any() else 0.0
    return res_wv, res_vw
