"""Ancilla-free gate IR.

Qubit 0 is the least significant bit of a basis-state index.  A BLOCK gate on
targets (t0, t1, ...) acts on the block index sum_k bit(t_k) 2^k.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .numerics import is_unitary, two_level_decompose

KINDS = ("X", "SWAP", "MCX", "BLOCK")
_N_TARGETS = {"X": 1, "SWAP": 2, "MCX": 1}


class CircuitError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Gate:
    kind: str
    targets: tuple
    controls: tuple = ()  # (qubit, polarity) pairs
    matrix: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(q) for q in self.targets))
        object.__setattr__(self, "controls", tuple((int(q), int(p)) for q, p in self.controls))
        if self.kind not in KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        want = _N_TARGETS.get(self.kind)
        if want is not None and len(self.targets) != want:
            raise CircuitError(f"{self.kind} takes {want} target(s), got {len(self.targets)}")
        if not self.targets:
            raise CircuitError("gate needs at least one target")
        if self.kind == "X" and self.controls:
            raise CircuitError("X takes no controls; use MCX")
        qubits = list(self.targets) + [q for q, _ in self.controls]
        if min(qubits) < 0:
            raise CircuitError("negative qubit index")
        if len(set(qubits)) != len(qubits):
            raise CircuitError(f"targets and controls overlap: {qubits}")
        if any(p not in (0, 1) for _, p in self.controls):
            raise CircuitError("control polarity must be 0 or 1")
        if self.kind == "BLOCK":
            if self.matrix is None:
                raise CircuitError("BLOCK needs a matrix")
            U = np.asarray(self.matrix, dtype=complex)
            dim = 2 ** len(self.targets)
            if U.shape != (dim, dim):
                raise CircuitError(f"BLOCK on {len(self.targets)} qubits needs a {dim}x{dim} matrix")
            ok, res = is_unitary(U, 1e-10)
            if not ok:
                raise CircuitError(f"BLOCK matrix is not unitary (residual {res:.2e})")
            U.setflags(write=False)
            object.__setattr__(self, "matrix", U)
        elif self.matrix is not None:
            raise CircuitError(f"{self.kind} carries no matrix")

    @property
    def qubits(self) -> tuple:
        return self.targets + tuple(q for q, _ in self.controls)

    def with_controls(self, extra) -> "Gate":
        extra = tuple(extra)
        if not extra:
            return self
        kind = "MCX" if self.kind == "X" else self.kind
        return Gate(kind, self.targets, self.controls + extra, self.matrix)

    def inverse(self) -> "Gate":
        if self.kind == "BLOCK":
            return Gate("BLOCK", self.targets, self.controls, self.matrix.conj().T)
        return self

    def __eq__(self, other):
        if not isinstance(other, Gate):
            return NotImplemented
        same = (self.kind, self.targets, self.controls) == (other.kind, other.targets, other.controls)
        if not same or self.kind != "BLOCK":
            return same
        return np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash((self.kind, self.targets, self.controls))

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "targets": list(self.targets),
            "controls": [{"q": q, "pol": p} for q, p in self.controls],
        }
        if self.kind == "BLOCK":
            d["matrix"] = [[float(z.real), float(z.imag)] for z in self.matrix.ravel()]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Gate":
        matrix = None
        if "matrix" in d:
            flat = np.asarray(d["matrix"], dtype=float)
            if flat.ndim != 2 or flat.shape[1] != 2:
                raise CircuitError("matrix must be a list of [re, im] pairs")
            z = flat[:, 0] + 1j * flat[:, 1]
            dim = int(round(np.sqrt(z.size)))
            if dim * dim != z.size:
                raise CircuitError(f"matrix has {z.size} entries, not a square count")
            matrix = z.reshape(dim, dim)
        controls = [(c["q"], c["pol"]) for c in d.get("controls", [])]
        return cls(d["kind"], tuple(d["targets"]), tuple(controls), matrix)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.n_qubits < 0:
            raise CircuitError("negative width")
        for pos, g in enumerate(self.gates):
            if max(g.qubits) >= self.n_qubits:
                raise CircuitError(f"gates[{pos}] touches qubit {max(g.qubits)} of a {self.n_qubits}-qubit circuit")

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(max(self.n_qubits, other.n_qubits), self.gates + other.gates)

    def __len__(self):
        return len(self.gates)

    def inverse(self) -> "Circuit":
        return Circuit(self.n_qubits, tuple(g.inverse() for g in reversed(self.gates)))

    def with_controls(self, extra, n_qubits: int | None = None) -> "Circuit":
        extra = tuple(extra)
        width = n_qubits if n_qubits is not None else self.n_qubits
        return Circuit(width, tuple(g.with_controls(extra) for g in self.gates))

    def widen(self, n_qubits: int) -> "Circuit":
        return Circuit(n_qubits, self.gates)

    def to_dict(self) -> dict:
        return {"n_qubits": self.n_qubits, "gates": [g.to_dict() for g in self.gates]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def serialize(c: Circuit, **kw) -> str:
    return c.to_json(**kw)


def deserialize(text: str) -> Circuit:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CircuitError(f"malformed circuit JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict) or "n_qubits" not in data or "gates" not in data:
        raise CircuitError("circuit JSON needs 'n_qubits' and 'gates'")
    gates = []
    for pos, gd in enumerate(data["gates"]):
        try:
            gates.append(Gate.from_dict(gd))
        except (CircuitError, KeyError, TypeError, ValueError) as exc:
            raise CircuitError(f"gates[{pos}]: {exc}") from exc
    return Circuit(int(data["n_qubits"]), tuple(gates))


def synth_add_power_of_two(n: int, m: int, qubits=None) -> Circuit:
    """|x> -> |x + 2^m mod 2^n> with X and MCX only, no ancilla.

    Bit t (t = n-1 down to m+1) flips when bits m..t-1 are all one; X on bit m
    comes last.  ``qubits`` maps bit positions to physical qubits.
    """
    if not 0 <= m <= n:
        raise CircuitError(f"exponent m={m} outside 0..{n}")
    q = list(range(n)) if qubits is None else list(qubits)
    if len(q) != n:
        raise CircuitError(f"need {n} qubits, got {len(q)}")
    width = max(q) + 1 if q else 0
    if m == n:
        return Circuit(width)
    gates = [Gate("MCX", (q[t],), tuple((q[j], 1) for j in range(m, t))) for t in range(n - 1, m, -1)]
    gates.append(Gate("X", (q[m],)))
    return Circuit(width, tuple(gates))


def synth_add_constant(n: int, a: int, qubits=None) -> Circuit:
    """|x> -> |x + a mod 2^n> as a product of power-of-two adders."""
    a %= 2 ** n
    out = Circuit(n if qubits is None else max(qubits) + 1)
    for m in range(n):
        if a >> m & 1:
            out = out + synth_add_power_of_two(n, m, qubits)
    return out


def shuffle_circuit(active, n_qubits: int | None = None) -> Circuit:
    """Perfect shuffle i -> (i mod 2) 2^(a-1) + floor(i/2) on the active lines.

    Realized as a rotation of qubit lines: adjacent SWAPs (a0,a1), (a1,a2), ...
    move bit 0 to the top and every other bit down one place.
    """
    active = list(active)
    if not active:
        raise CircuitError("shuffle needs at least one active qubit")
    width = n_qubits if n_qubits is not None else max(active) + 1
    gates = [Gate("SWAP", (active[i], active[i + 1])) for i in range(len(active) - 1)]
    return Circuit(width, tuple(gates))


def _mcx_cost(c: int) -> int:
    return 1 if c <= 1 else 2 * c - 1


@lru_cache(maxsize=256)
def _two_level_count(key: bytes, dim: int) -> int:
    U = np.frombuffer(key, dtype=complex).reshape(dim, dim)
    return len(two_level_decompose(U))


def block_factor_count(matrix: np.ndarray) -> int:
    U = np.ascontiguousarray(matrix, dtype=complex)
    return _two_level_count(U.tobytes(), U.shape[0])


def gate_count(c: Circuit) -> dict:
    """Per-kind gate counts plus an elementary total.

    Charging: X and CX cost 1, an MCX with c >= 2 controls 2c - 1, SWAP 3
    (a controlled SWAP is two CX around one MCX with one more control), a BLOCK
    with c controls its two-level factor count times 2c + 1.  Control
    polarity is free: the X pairs that realize a zero control cancel between
    consecutive gates sharing it.
    """
    counts = {k: 0 for k in KINDS}
    elementary = 0
    for g in c.gates:
        counts[g.kind] += 1
        nc = len(g.controls)
        if g.kind in ("X", "MCX"):
            cost = _mcx_cost(nc)
        elif g.kind == "SWAP":
            cost = 3 if nc == 0 else 2 + _mcx_cost(nc + 1)
        else:
            cost = block_factor_count(g.matrix) * (2 * nc + 1)
        elementary += cost
    counts["elementary"] = elementary
    counts["total_gates"] = len(c.gates)
    return counts
