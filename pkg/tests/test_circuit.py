import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polylocal.circuit import (Circuit, CircuitError, Gate, deserialize, gate_count, serialize, shuffle_circuit,
                               synth_add_constant, synth_add_power_of_two)
from polylocal.simulator import apply_circuit, basis_state, circuit_unitary, random_state


def permutation_of(c):
    U = circuit_unitary(c)
    return [int(np.argmax(np.abs(U[:, x]))) for x in range(U.shape[1])]


def test_qubit_zero_is_least_significant():
    out = apply_circuit(basis_state(3, 0), Circuit(3, (Gate("X", (0,)),)))
    assert np.array_equal(out, basis_state(3, 1))


def test_add_two_mod_eight():
    c = synth_add_power_of_two(3, 1)
    assert permutation_of(c) == [2, 3, 4, 5, 6, 7, 0, 1]
    assert {g.kind for g in c.gates} <= {"X", "MCX"}


def test_add_full_width_is_empty():
    assert len(synth_add_power_of_two(4, 4)) == 0
    with pytest.raises(CircuitError):
        synth_add_power_of_two(3, 4)


def test_add_sixteen_mod_1024():
    c = synth_add_power_of_two(10, 4)
    x = np.arange(1024)
    assert permutation_of(c) == list((x + 16) % 1024)


def test_add_gate_sequence():
    c = synth_add_power_of_two(4, 1)
    assert [(g.kind, g.targets, g.controls) for g in c.gates] == [
        ("MCX", (3,), ((1, 1), (2, 1))),
        ("MCX", (2,), ((1, 1),)),
        ("X", (1,), ()),
    ]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(-300, 300))
def test_add_constant(n, a):
    x = np.arange(2 ** n)
    assert permutation_of(synth_add_constant(n, a)) == list((x + a) % 2 ** n)


def test_adder_on_mapped_qubits():
    c = synth_add_power_of_two(2, 0, qubits=[1, 3]).widen(4)
    for x in range(16):
        hi = ((x >> 1) & 1) | ((x >> 3) & 1) << 1
        hi = (hi + 1) % 4
        want = (x & 0b0101) | (hi & 1) << 1 | (hi >> 1) << 3
        assert permutation_of(c)[x] == want


def test_shuffle_examples():
    assert len(shuffle_circuit([0])) == 0
    assert permutation_of(shuffle_circuit([0, 1])) == [0, 2, 1, 3]
    for a in range(1, 6):
        c = shuffle_circuit(range(a))
        i = np.arange(2 ** a)
        want = (i % 2) * 2 ** (a - 1) + i // 2
        assert permutation_of(c) == list(want)
        U = circuit_unitary(c + c.inverse())
        assert np.array_equal(U, np.eye(2 ** a))


def test_gate_count_examples():
    counts = gate_count(Circuit(3))
    assert all(v == 0 for v in counts.values())
    counts = gate_count(synth_add_power_of_two(3, 1))
    assert counts["MCX"] == 1 and counts["X"] == 1 and counts["elementary"] == 2


def test_gate_count_charging():
    mcx3 = Gate("MCX", (0,), ((1, 1), (2, 1), (3, 0)))
    assert gate_count(Circuit(4, (mcx3,)))["elementary"] == 5
    assert gate_count(Circuit(2, (Gate("SWAP", (0, 1)),)))["elementary"] == 3
    assert gate_count(Circuit(3, (Gate("SWAP", (0, 1), ((2, 1),)),)))["elementary"] == 2 + 3
    H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    assert gate_count(Circuit(3, (Gate("BLOCK", (0,), ((1, 1), (2, 0)), H),)))["elementary"] == 5


def test_adder_count_is_quadratic():
    for n in range(2, 14):
        assert gate_count(synth_add_power_of_two(n, 0))["elementary"] == (n - 1) ** 2 + 1


def test_gate_validation():
    with pytest.raises(CircuitError, match="overlap"):
        Gate("MCX", (1,), ((1, 1),))
    with pytest.raises(CircuitError, match="not unitary"):
        Gate("BLOCK", (0,), (), np.array([[1, 1], [0, 1]]))
    with pytest.raises(CircuitError):
        Gate("X", (0,), ((1, 1),))
    with pytest.raises(CircuitError):
        Gate("MCX", (0,), ((1, 2),))
    with pytest.raises(CircuitError, match="gates\\[0\\]"):
        Circuit(2, (Gate("X", (2,)),))


def test_serialize_round_trip():
    c = synth_add_power_of_two(3, 1)
    assert deserialize(serialize(c)) == c
    U = np.linalg.qr(np.random.default_rng(1).normal(size=(4, 4)) + 0j)[0] * 1j
    c = Circuit(3, (Gate("BLOCK", (0, 2), ((1, 0),), U), Gate("SWAP", (0, 1))))
    back = deserialize(serialize(c))
    assert back == c


def test_deserialize_reports_position():
    good = Circuit(2, (Gate("X", (0,)), Gate("MCX", (1,), ((0, 1),)))).to_dict()
    good["gates"][1]["targets"] = [0]
    import json
    with pytest.raises(CircuitError, match="gates\\[1\\].*overlap"):
        deserialize(json.dumps(good))
    good["gates"][1] = {"kind": "BLOCK", "targets": [0], "controls": [], "matrix": [[1, 0], [1, 0], [0, 0], [1, 0]]}
    with pytest.raises(CircuitError, match="gates\\[1\\].*not unitary"):
        deserialize(json.dumps(good))
    with pytest.raises(CircuitError, match="line 1 column"):
        deserialize('{"n_qubits": 2, "gates": [')


def random_circuit(n, length, seed):
    rng = np.random.default_rng(seed)
    gates = []
    for _ in range(length):
        kind = rng.choice(["X", "SWAP", "MCX", "BLOCK"])
        qs = [int(q) for q in rng.permutation(n)]
        if kind == "X":
            gates.append(Gate("X", (qs[0],)))
        elif kind == "SWAP":
            ctl = ((qs[2], int(rng.integers(2))),) if n > 2 and rng.random() < 0.5 else ()
            gates.append(Gate("SWAP", (qs[0], qs[1]), ctl))
        elif kind == "MCX":
            nc = int(rng.integers(1, n))
            gates.append(Gate("MCX", (qs[0],), tuple((q, int(rng.integers(2))) for q in qs[1:1 + nc])))
        else:
            t = int(rng.integers(1, min(3, n) + 1))
            Z = rng.normal(size=(2 ** t, 2 ** t)) + 1j * rng.normal(size=(2 ** t, 2 ** t))
            nc = int(rng.integers(0, n - t + 1))
            gates.append(Gate("BLOCK", tuple(qs[:t]), tuple((q, int(rng.integers(2))) for q in qs[t:t + nc]),
                              np.linalg.qr(Z)[0]))
    return Circuit(n, tuple(gates))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10_000))
def test_circuits_are_reversible(n, seed):
    c = random_circuit(n, 12, seed)
    psi = random_state(n, seed)
    back = apply_circuit(apply_circuit(psi, c), c.inverse())
    assert np.max(np.abs(back - psi)) <= 1e-12
