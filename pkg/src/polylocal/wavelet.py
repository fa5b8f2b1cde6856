"""Classical pyramid algorithm and cascade iteration.

Coefficient layout, shared with :func:`polylocal.compiler.compile_pyramid`::

    [ scaling block | details, coarsest level | ... | details, finest level ]

The finest details are the odd outputs of M_N and fill the top half.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .banded import BandStencil, StencilError, check_admissible, is_power_of_two, materialize


def default_min_size(s: BandStencil) -> int:
    """Smallest terminal size: a power of two >= max(2, k, b)."""
    size = 2
    while size < max(s.k, s.b):
        size *= 2
    return size


def level_sizes(N: int, min_size: int) -> list[int]:
    """Active sizes N, N/2, ... down to min_size."""
    sizes = []
    n = N
    while n >= min_size:
        sizes.append(n)
        n //= 2
    return sizes


def check_min_size(s: BandStencil, N: int, min_size: int) -> None:
    if not is_power_of_two(min_size) or min_size < 2:
        raise StencilError(f"min_size={min_size} must be a power of two >= 2")
    if min_size < s.k or min_size < s.b:
        raise StencilError(
            f"min_size={min_size} too small for {s.name}: rows wrap onto themselves below max(k, b) = {max(s.k, s.b)}"
        )
    if min_size > N:
        raise StencilError(f"min_size={min_size} exceeds N={N}")
    materialize(s, min_size, strict=False)  # terminal filter must stay unitary


def dwt_pyramid(x, s: BandStencil, min_size: int | None = None) -> np.ndarray:
    x = np.asarray(x)
    N = x.shape[0]
    check_admissible(s, N, require_margin=False)
    min_size = default_min_size(s) if min_size is None else min_size
    check_min_size(s, N, min_size)
    cur = x.astype(complex)
    details = []
    for n in level_sizes(N, min_size):
        y = materialize(s, n, strict=False) @ cur
        details.append(y[1::2])
        cur = y[0::2]
    return np.concatenate([cur] + details[::-1])


def idwt_pyramid(coeffs, s: BandStencil, min_size: int | None = None) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=complex)
    N = coeffs.shape[0]
    check_admissible(s, N, require_margin=False)
    min_size = default_min_size(s) if min_size is None else min_size
    check_min_size(s, N, min_size)
    sizes = level_sizes(N, min_size)
    cur = coeffs[: sizes[-1] // 2]
    for n in reversed(sizes):
        y = np.empty(n, dtype=complex)
        y[0::2] = cur
        y[1::2] = coeffs[n // 2: n]
        cur = materialize(s, n, strict=False).conj().T @ y
    return cur


@dataclass
class CascadeResult:
    x: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    c: np.ndarray           # refinement coefficients, sum 2
    psi_coeffs: np.ndarray  # (-1)^k c_{1-k} for k = 2-L .. 1


def refinement_coefficients(s: BandStencil) -> np.ndarray:
    """Smoothing-row taps in offset order, rescaled to sum to 2."""
    if s.k != 2:
        raise StencilError("cascade needs a two-channel (k=2) filter")
    row = s.rows[0]
    lo, hi = row[0][0], row[-1][0]
    taps = np.zeros(hi - lo + 1, dtype=complex)
    for o, v in row:
        taps[o - lo] = v
    total = taps.sum()
    if abs(total) < 1e-12:
        raise StencilError("smoothing row sums to zero; no refinement normalization")
    c = taps * (2 / total)
    return c.real if not np.any(c.imag) else c


def cascade(s: BandStencil, iterations: int, grid_per_unit: int) -> CascadeResult:
    """Iterate phi <- sum_n c_n phi(2x - n) from the unit box on a fixed dyadic grid.

    The grid runs over [lo, L) with lo = -ceil(L/2) for L taps, which holds
    the support [0, L-1] of phi and [1 - L/2, L/2] of psi.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    g = grid_per_unit
    if g < 1 or g % 2:
        raise ValueError("grid_per_unit must be a positive even number")
    c = refinement_coefficients(s)
    L = c.size
    lo = -math.ceil(L / 2)
    size = (L - lo) * g
    x = lo + np.arange(size) / g

    def refine(f, coeffs, first):
        out = np.zeros(size, dtype=np.result_type(f, coeffs))
        m = np.arange(size)
        for n, cn in zip(range(first, first + coeffs.size), coeffs):
            src = 2 * m + (lo - n) * g
            ok = (src >= 0) & (src < size)
            out[ok] += cn * f[src[ok]]
        return out

    phi = ((x >= 0) & (x < 1)).astype(float)
    for _ in range(iterations):
        phi = refine(phi, c, 0)
    k = np.arange(2 - L, 2)
    psi_coeffs = (-1.0) ** k * c[1 - k]
    psi = refine(phi, psi_coeffs, 2 - L)
    return CascadeResult(x, phi, psi, c, psi_coeffs)
