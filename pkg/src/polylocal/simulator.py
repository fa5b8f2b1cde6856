"""Dense statevector simulation, sampling, oracles and phase coding.

States are plain complex arrays of length 2^n (or 2^n x B for a batch of B
states stored as columns).  Index bit q is qubit q.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, Gate

MAX_QUBITS = 20
NORM_TOL = 1e-10


class CapacityError(ValueError):
    pass


def n_qubits_of(psi: np.ndarray) -> int:
    dim = psi.shape[0]
    n = dim.bit_length() - 1
    if dim != 1 << n:
        raise ValueError(f"state dimension {dim} is not a power of two")
    if n > MAX_QUBITS:
        raise CapacityError(f"{n} qubits exceeds the dense simulation cap of {MAX_QUBITS}")
    return n


def basis_state(n: int, x: int) -> np.ndarray:
    if n > MAX_QUBITS:
        raise CapacityError(f"{n} qubits exceeds the dense simulation cap of {MAX_QUBITS}")
    psi = np.zeros(2 ** n, dtype=complex)
    psi[x] = 1.0
    return psi


def random_state(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return psi / np.linalg.norm(psi)


def _apply_gate(t: np.ndarray, g: Gate, n: int) -> None:
    """Apply g in place to a tensor of shape [2]*n + [B]."""
    def axis(q):
        return n - 1 - q

    idx = [slice(None)] * (n + 1)
    for q, pol in g.controls:
        idx[axis(q)] = pol
    idx = tuple(idx)
    control_axes = sorted(axis(q) for q, _ in g.controls)

    def pos(q):
        a = axis(q)
        return a - sum(1 for c in control_axes if c < a)

    sub = t[idx]
    if g.kind in ("X", "MCX"):
        new = np.flip(sub, axis=pos(g.targets[0]))
    elif g.kind == "SWAP":
        new = np.swapaxes(sub, pos(g.targets[0]), pos(g.targets[1]))
    else:
        nt = len(g.targets)
        U = g.matrix.reshape([2] * (2 * nt))
        # matrix axes run from the top target bit down to targets[0]
        sub_axes = [pos(q) for q in reversed(g.targets)]
        new = np.tensordot(U, sub, axes=(list(range(nt, 2 * nt)), sub_axes))
        new = np.moveaxis(new, list(range(nt)), sub_axes)
    t[idx] = new.copy() if g.kind != "BLOCK" else new


def apply_circuit(psi: np.ndarray, c: Circuit) -> np.ndarray:
    """Run the gates of c, in order, on a state or a batch of column states."""
    psi = np.asarray(psi, dtype=complex)
    n = n_qubits_of(psi)
    if n != c.n_qubits:
        raise ValueError(f"state has {n} qubits, circuit {c.n_qubits}")
    batch = psi.ndim == 2
    B = psi.shape[1] if batch else 1
    t = psi.reshape([2] * n + [B]).copy()
    for g in c.gates:
        _apply_gate(t, g, n)
    out = t.reshape(2 ** n, B)
    return out if batch else out[:, 0]


def circuit_unitary(c: Circuit) -> np.ndarray:
    return apply_circuit(np.eye(2 ** c.n_qubits, dtype=complex), c)


def apply_matrix(psi: np.ndarray, U: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi)
    if U.shape[1] != psi.shape[0]:
        raise ValueError(f"matrix is {U.shape}, state has dimension {psi.shape[0]}")
    return U @ psi


@dataclass
class Histogram:
    counts: dict
    shots: int
    seed: int

    def probabilities(self, dim: int) -> np.ndarray:
        p = np.zeros(dim)
        for k, v in self.counts.items():
            p[k] = v / self.shots
        return p

    def to_csv(self) -> str:
        lines = ["outcome,count"] + [f"{k},{v}" for k, v in sorted(self.counts.items())]
        return "\n".join(lines) + "\n"


def sample_measure(psi: np.ndarray, shots: int, seed: int = 0) -> Histogram:
    """Draw computational-basis outcomes with probability |amplitude|^2.

    Uses a Philox counter-based generator and inverse-CDF lookup, so a given
    (state, shots, seed) always yields the same histogram.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = np.abs(np.asarray(psi)) ** 2
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    rng = np.random.Generator(np.random.Philox(seed))
    outcomes = np.searchsorted(cdf, rng.random(shots), side="right")
    outcomes = np.minimum(outcomes, p.size - 1)
    values, counts = np.unique(outcomes, return_counts=True)
    return Histogram({int(v): int(n) for v, n in zip(values, counts)}, shots, seed)


def total_variation(hist: Histogram, psi: np.ndarray) -> float:
    p = np.abs(np.asarray(psi)) ** 2
    return 0.5 * float(np.sum(np.abs(hist.probabilities(p.size) - p / p.sum())))


@dataclass(frozen=True)
class FunctionSpec:
    """A cheaply computable map on indices 0..N-1.

    kind is one of ``affine`` (params a, c, mod), ``bitreverse`` (params n),
    ``table`` (integer values) or ``real_table`` (real values).
    """

    kind: str
    params: tuple = ()
    values_: tuple = field(default=(), repr=False)

    @classmethod
    def affine(cls, a: int, c: int, mod: int) -> "FunctionSpec":
        return cls("affine", (a, c, mod))

    @classmethod
    def bitreverse(cls, n: int) -> "FunctionSpec":
        return cls("bitreverse", (n,))

    @classmethod
    def table(cls, values, d: int | None = None) -> "FunctionSpec":
        values = tuple(int(v) for v in values)
        d = max(values) + 1 if d is None else d
        if any(not 0 <= v < d for v in values):
            raise ValueError(f"table entries must lie in 0..{d - 1}")
        return cls("table", (d,), values)

    @classmethod
    def real_table(cls, values) -> "FunctionSpec":
        return cls("real_table", (), tuple(float(v) for v in values))

    @property
    def N(self) -> int:
        if self.kind == "affine":
            return self.params[2]
        if self.kind == "bitreverse":
            return 2 ** self.params[0]
        return len(self.values_)

    @property
    def d(self) -> int:
        if self.kind == "table":
            return self.params[0]
        if self.kind == "real_table":
            raise ValueError("real_table has no integer target size")
        return self.N

    def evaluate(self, t):
        """f at an index or an integer array of indices."""
        t = np.asarray(t)
        if self.kind == "affine":
            a, c, mod = self.params
            return (a * t + c) % mod
        if self.kind == "bitreverse":
            n = self.params[0]
            out = np.zeros_like(t)
            for bit in range(n):
                out |= ((t >> bit) & 1) << (n - 1 - bit)
            return out
        if self.kind == "table":
            return np.array(self.values_, dtype=int)[t]
        if self.kind == "real_table":
            return np.array(self.values_, dtype=float)[t]
        raise ValueError(f"unknown function kind {self.kind!r}")

    def values(self) -> np.ndarray:
        return self.evaluate(np.arange(self.N))

    def __call__(self, t: int):
        return self.evaluate(t).item()

    def is_bijection(self) -> bool:
        if self.kind == "real_table":
            return False
        v = self.values()
        return self.d == self.N and np.array_equal(np.sort(v), np.arange(self.N))


def prepare_function_state(f: FunctionSpec) -> np.ndarray:
    """Normalized sum_t |t>|f(t)>, t on the low qubits, f(t) on the high ones."""
    N = f.N
    n_t = n_qubits_of(np.empty(N))
    n_f = max(0, math.ceil(math.log2(f.d))) if f.d > 1 else 0
    if n_t + n_f > MAX_QUBITS:
        raise CapacityError(f"{n_t + n_f} qubits exceeds the dense simulation cap")
    psi = np.zeros(2 ** (n_t + n_f), dtype=complex)
    psi[np.arange(N) + N * f.values()] = 1 / math.sqrt(N)
    return psi


class LocallyPolyOracle:
    """Permutation oracle with entries O[i, j] = [f(i) == j].

    Each entry costs one evaluation of f; applying it sends amplitude
    psi[f(i)] to position i.  ``calls`` counts applications.
    """

    def __init__(self, f: FunctionSpec):
        if not f.is_bijection():
            raise ValueError("locally-poly oracle needs a bijection")
        self.f = f
        self.calls = 0

    def entry(self, i: int, j: int) -> int:
        return int(self.f(i) == j)

    def __call__(self, psi: np.ndarray) -> np.ndarray:
        psi = np.asarray(psi)
        if psi.shape[0] != self.f.N:
            raise ValueError(f"state has dimension {psi.shape[0]}, oracle {self.f.N}")
        self.calls += 1
        return psi[self.f.values()]


def apply_locally_poly_oracle(psi: np.ndarray, f: FunctionSpec) -> np.ndarray:
    return LocallyPolyOracle(f)(psi)


def invert_bijection_demo(f: FunctionSpec, y: int, seed: int = 0, oracle: LocallyPolyOracle | None = None) -> int:
    """Find x with f(x) = y: prepare |y>, apply the oracle once, measure."""
    oracle = oracle or LocallyPolyOracle(f)
    n = n_qubits_of(np.empty(f.N))
    out = oracle(basis_state(n, y))
    hist = sample_measure(out, 1, seed)
    (x,) = hist.counts
    return x


def phase_register(D: int) -> np.ndarray:
    """(w^0, w^1, ..., w^(D-1)) / sqrt(D) with w = exp(2 pi i / D)."""
    if D < 2:
        raise ValueError("phase register needs D >= 2")
    return np.exp(2j * np.pi * np.arange(D) / D) / math.sqrt(D)


@dataclass
class ContinuousResult:
    amplitudes: np.ndarray
    codes: np.ndarray          # x(t) = round(D h(t) / 2 pi)
    phase_fidelity: float      # <phase state| rho_R |phase state> after the additions


def continuous_transform(h, T, D: int, d: int | None = None) -> ContinuousResult:
    """Phase-coded transform of a bounded real function h on 0..N-1.

    The register R starts in the phase superposition; subtracting x(t) from it
    under control of |t> multiplies branch t by w^x(t) and leaves R unchanged.
    T (a Circuit on the t register or an N x N matrix) then acts on the first
    register.  Amplitudes are normalized: the uniform input carries 1/sqrt(N).
    """
    hv = h.values() if isinstance(h, FunctionSpec) else np.asarray(h, dtype=float)
    N = hv.size
    n_t = n_qubits_of(np.empty(N))
    n_r = n_qubits_of(np.empty(D))
    if n_t + n_r > MAX_QUBITS:
        raise CapacityError(f"{n_t + n_r} qubits exceeds the dense simulation cap")
    top = 2 * np.pi * (d if d is not None else D - 1) / D
    if np.any(hv < 0) or np.any(hv > top + 1e-12):
        raise ValueError(f"h must take values in [0, {top:.6g}]")
    codes = np.rint(D * hv / (2 * np.pi)).astype(int)

    phase = phase_register(D)
    state = np.outer(phase, np.full(N, 1 / math.sqrt(N), dtype=complex))  # [j, t]
    # controlled |t, j> -> |t, j - x(t) mod D>
    j = np.arange(D)[:, None]
    state = state[(j + codes[None, :]) % D, np.arange(N)[None, :]]

    rho = state @ state.conj().T
    fidelity = float(np.real(phase.conj() @ rho @ phase))

    if isinstance(T, Circuit):
        joint = state.reshape(-1)  # index t + N j
        joint = apply_circuit(joint, T.widen(n_t + n_r))
        state = joint.reshape(D, N)
    else:
        state = state @ np.asarray(T).T
    first = phase.conj() @ state
    return ContinuousResult(first, codes, fidelity)


def quasi_isometry_distortion(d: int, D: int) -> float:
    """Distortion of delta -> exp(2 pi i delta / D) on 1..d after the best rescaling.

    With ratios r = |x1 - x2| / |g(x1) - g(x2)| over all pairs, the best
    scale is sqrt(r_min r_max) and the distortion sqrt(r_max / r_min) - 1.
    """
    if not 2 <= d < D:
        raise ValueError("need 2 <= d < D")
    delta = np.arange(1, d)
    chord = np.abs(1 - np.exp(2j * np.pi * delta / D))
    ratio = delta / chord
    return float(math.sqrt(ratio.max() / ratio.min()) - 1)
