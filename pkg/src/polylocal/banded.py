"""Cyclic, k-periodic, band-diagonal unitaries described by generator rows.

A :class:`BandStencil` holds ``k`` generator rows.  Row ``i`` of the N x N
matrix is generator row ``i mod k`` laid down with its offset-0 entry on the
diagonal, so ``M[i, (i + o) mod N] = rows[i mod k][o]``.  The whole family
{M_N} is therefore fixed by the stencil and looks locally identical for
every admissible N.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import is_unitary, operator_norm

UNITARY_TOL = 1e-10


class StencilError(ValueError):
    """Stencil or size fails one of the family hypotheses."""


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def log2_exact(n: int) -> int:
    if not is_power_of_two(n):
        raise StencilError(f"N power of two: {n} is not a power of two")
    return n.bit_length() - 1


@dataclass(frozen=True)
class BandStencil:
    name: str
    k: int
    rows: tuple  # k tuples of (offset, complex) pairs, sorted by offset

    def __post_init__(self):
        if not is_power_of_two(self.k):
            raise StencilError(f"period k={self.k} must be a power of two")
        if len(self.rows) != self.k:
            raise StencilError(f"expected {self.k} generator rows, got {len(self.rows)}")
        clean = []
        for r, row in enumerate(self.rows):
            entries = dict()
            for o, v in (row.items() if isinstance(row, dict) else row):
                o, v = int(o), complex(v)
                if not np.isfinite(v):
                    raise StencilError(f"row {r}: non-finite entry at offset {o}")
                entries[o] = entries.get(o, 0) + v
            if not entries:
                raise StencilError(f"row {r} is empty")
            clean.append(tuple(sorted(entries.items())))
        object.__setattr__(self, "rows", tuple(clean))

    @property
    def offsets_min(self) -> int:
        return min(o for row in self.rows for o, _ in row)

    @property
    def offsets_max(self) -> int:
        return max(o for row in self.rows for o, _ in row)

    @property
    def b(self) -> int:
        """Band parameter: entries only where |i - j| < b (cyclically)."""
        return 1 + max(abs(o) for row in self.rows for o, _ in row)

    def row(self, r: int) -> dict:
        return dict(self.rows[r % self.k])

    def is_real(self) -> bool:
        return all(v.imag == 0 for row in self.rows for _, v in row)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "k": self.k,
            "rows": [
                [{"offset": o, "re": v.real, "im": v.imag} for o, v in row]
                for row in self.rows
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BandStencil":
        try:
            k = int(data["k"])
            raw = data["rows"]
            if raw and all(isinstance(e, dict) for e in raw):
                # flat form: one entry list, generator row picked by an optional "row" field
                grouped = [[] for _ in range(k)]
                for e in raw:
                    grouped[int(e.get("row", 0))].append(e)
                raw = grouped
            rows = [
                [(e["offset"], complex(e["re"], e.get("im", 0.0))) for e in row]
                for row in raw
            ]
            return cls(name=str(data.get("name", "stencil")), k=k, rows=tuple(rows))
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            if isinstance(exc, StencilError):
                raise
            raise StencilError(f"malformed stencil document: {exc!r}") from exc

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "BandStencil":
        return cls.from_dict(json.loads(text))


def identity_stencil() -> BandStencil:
    return BandStencil("identity", 1, (((0, 1.0),),))


def haar_stencil() -> BandStencil:
    s = 1 / math.sqrt(2)
    return BandStencil("haar", 2, (((0, s), (1, s)), ((-1, s), (0, -s))))


def daub4_coefficients() -> np.ndarray:
    """C0..C3 of the four-tap Daubechies filter, (1+sqrt3, 3+sqrt3, 3-sqrt3, 1-sqrt3)/(4 sqrt2)."""
    r3 = math.sqrt(3.0)
    return np.array([1 + r3, 3 + r3, 3 - r3, 1 - r3]) / (4 * math.sqrt(2.0))


def daub4_stencil() -> BandStencil:
    """Daub4 with the smoothing row on offsets -1..2 and the detail row on -2..1.

    Both rows of a pair cover the same four columns 2m-1..2m+2, which keeps the
    net shift of the filter at zero (see :func:`net_shift`).
    """
    c0, c1, c2, c3 = daub4_coefficients()
    smooth = ((-1, c0), (0, c1), (1, c2), (2, c3))
    detail = ((-2, c3), (-1, -c2), (0, c1), (1, -c0))
    return BandStencil("daub4", 2, (smooth, detail))


def random_qmf_stencil(layers: int, seed: int) -> BandStencil:
    """Period-2 unitary stencil from alternating layers of 2x2 rotations.

    Layer 0 rotates pairs (2m, 2m+1), layer 1 pairs (2m+1, 2m+2), and so on;
    each layer uses one angle drawn from ``seed``.
    """
    if layers < 1:
        raise StencilError("layers must be >= 1")
    rng = np.random.default_rng(seed)
    angles = rng.uniform(0.0, 2 * np.pi, size=layers)
    size = 8 * layers + 8
    M = np.eye(size)
    for layer, theta in enumerate(angles):
        c, s = math.cos(theta), math.sin(theta)
        L = np.zeros((size, size))
        for p in range(layer % 2, size + layer % 2, 2):
            i, j = p % size, (p + 1) % size
            L[i, i], L[i, j], L[j, i], L[j, j] = c, -s, s, c
        M = L @ M
    reach = 2 * layers
    rows = []
    # read generator rows from the middle of the cycle, far from any wrap
    for r in (size // 2, size // 2 + 1):
        rows.append(tuple(
            (o, M[r, (r + o) % size]) for o in range(-reach, reach + 1)
            if abs(M[r, (r + o) % size]) > 1e-15
        ))
    return BandStencil(f"qmf{layers}s{seed}", 2, tuple(rows))


def net_shift(s: BandStencil) -> float:
    """Average column displacement (1/k) sum_r sum_o o |row_r[o]|^2.

    For a unitary stencil this is an integer: the flow of the filter across
    any cut.  A block-diagonal factorization with blocks aligned to the cut
    exists only when it is zero.
    """
    return sum(o * abs(v) ** 2 for row in s.rows for o, v in row) / s.k


def reanchor(s: BandStencil, shift: int) -> BandStencil:
    """Move every generator row ``shift`` columns left (offset o -> o - shift)."""
    rows = tuple(tuple((o - shift, v) for o, v in row) for row in s.rows)
    return BandStencil(f"{s.name}@{shift:+d}", s.k, rows)


def tile(s: BandStencil, N: int) -> np.ndarray:
    """Lay the generator rows around an N-cycle without any checks but k | N."""
    if N % s.k:
        raise StencilError(f"k|N: period {s.k} does not divide N={N}")
    M = np.zeros((N, N), dtype=complex)
    for r, row in enumerate(s.rows):
        idx = np.arange(r, N, s.k)
        for o, v in row:
            M[idx, (idx + o) % N] += v
    return M


def check_admissible(s: BandStencil, N: int, require_margin: bool = True) -> None:
    if not is_power_of_two(N):
        raise StencilError(f"N power of two: {N} is not a power of two")
    if N % s.k:
        raise StencilError(f"k|N: period {s.k} does not divide N={N}")
    if require_margin and not 4 * s.b < N:
        raise StencilError(f"4b<N: 4*{s.b} = {4 * s.b} is not below N={N}")


def banded_unitarity_bound(M: np.ndarray, b: int) -> float:
    """Upper bound sqrt(||R||_1 ||R||_inf) on ||M^H M - I||_2 for a b-banded M.

    Works on the 4b - 3 cyclic diagonals of R only, so it costs O(N b^2).
    """
    N = M.shape[0]
    if 4 * b - 3 >= N:
        return is_unitary(M)[1]
    i = np.arange(N)
    width = 2 * b - 2
    R = np.zeros((2 * width + 1, N), dtype=complex)  # R[d + width, i] = (M^H M - I)[i, i + d]
    for d in range(-width, width + 1):
        for e in range(-(b - 1), b):
            r = (i + e) % N
            R[d + width] += M[r, i].conj() * M[r, (i + d) % N]
    R[width] -= 1
    A = np.abs(R)
    col_sums = sum(np.roll(A[d + width], d) for d in range(-width, width + 1))
    return float(np.sqrt(A.sum(axis=0).max() * col_sums.max()))


def materialize(s: BandStencil, N: int, strict: bool = True) -> np.ndarray:
    """Dense N x N matrix of the family member M_N.

    With ``strict=False`` the band margin 4b < N is not demanded; small sizes
    are still rejected if wrapping destroys unitarity.
    """
    check_admissible(s, N, require_margin=strict)
    M = tile(s, N)
    if banded_unitarity_bound(M, s.b) <= UNITARY_TOL:
        return M
    ok, res = is_unitary(M, UNITARY_TOL)
    if not ok:
        raise StencilError(f"tiled {s.name} at N={N} is not unitary (residual {res:.3e})")
    return M


def band_width(M: np.ndarray, tol: float = 1e-12) -> int:
    """Smallest w with M[i, j] == 0 (to tol) whenever cyclic |i - j| >= w."""
    N = M.shape[0]
    i, j = np.nonzero(np.abs(M) > tol)
    if i.size == 0:
        return 0
    d = np.abs(i - j)
    return int(np.max(np.minimum(d, N - d))) + 1


def periodicity_residual(M: np.ndarray, period: int) -> float:
    """max |M[i, j] - M[i + period, j + period]| with indices mod N."""
    shifted = np.roll(M, (-period, -period), axis=(0, 1))
    return float(np.max(np.abs(M - shifted)))


def validate(s: BandStencil, N: int) -> dict:
    """Check the family hypotheses at size N; failures are reported, not raised."""
    checks = {
        "N power of two": is_power_of_two(N),
        "k|N": N % s.k == 0,
        "4b<N": 4 * s.b < N,
    }
    out = {
        "stencil": s.name,
        "N": N,
        "k": s.k,
        "b": s.b,
        "net_shift": net_shift(s),
        "unitarity_residual": None,
        "measured_band_width": None,
        "periodicity_residual": None,
    }
    if checks["k|N"] and N >= 1:
        M = tile(s, N)
        out["unitarity_residual"] = operator_norm(M.conj().T @ M - np.eye(N))
        out["measured_band_width"] = band_width(M)
        out["periodicity_residual"] = periodicity_residual(M, s.k)
        checks["unitary"] = out["unitarity_residual"] <= UNITARY_TOL
        checks["periodic"] = out["periodicity_residual"] == 0.0
    out["checks"] = checks
    out["failed"] = [name for name, ok in checks.items() if not ok]
    out["ok"] = not out["failed"]
    return out


BUILTINS = {
    "identity": identity_stencil,
    "haar": haar_stencil,
    "daub4": daub4_stencil,
}


def load_stencil(spec: str) -> BandStencil:
    """Resolve a builtin name, ``qmf:LAYERS:SEED``, or a path to a stencil JSON file."""
    if spec in BUILTINS:
        return BUILTINS[spec]()
    if spec.startswith("qmf:"):
        try:
            _, layers, seed = spec.split(":")
            return random_qmf_stencil(int(layers), int(seed))
        except ValueError as exc:
            raise StencilError(f"expected qmf:LAYERS:SEED, got {spec!r}") from exc
    path = Path(spec)
    if not path.exists():
        raise StencilError(f"unknown stencil {spec!r}: not a builtin and no such file")
    return BandStencil.from_json(path.read_text())
