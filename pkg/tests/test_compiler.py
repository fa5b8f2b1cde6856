import math

import numpy as np
import pytest

from polylocal.banded import StencilError, daub4_stencil, haar_stencil, identity_stencil, materialize, random_qmf_stencil, reanchor, tile
from polylocal.circuit import Circuit, CircuitError, Gate, gate_count, shuffle_circuit
from polylocal.compiler import compile_banded, compile_pyramid, lower_blocks
from polylocal.simulator import apply_circuit, circuit_unitary, random_state
from polylocal.truncation import plan
from polylocal.wavelet import dwt_pyramid


def batch(n, count=20, seed=0):
    return np.stack([random_state(n, seed + i) for i in range(count)], axis=1)


def worst_error(c, M, n):
    psi = batch(n)
    return np.max(np.linalg.norm(apply_circuit(psi, c) - M @ psi, axis=0))


def test_identity_compiles_to_identity():
    c = compile_banded(identity_stencil(), 32)
    assert np.max(np.abs(circuit_unitary(c) - np.eye(32))) <= 1e-12


@pytest.mark.parametrize("s,N,tol", [(haar_stencil(), 64, 1e-10), (daub4_stencil(), 128, 1e-9)])
def test_banded_examples(s, N, tol):
    assert worst_error(compile_banded(s, N), materialize(s, N), int(math.log2(N))) <= tol


def test_banded_gate_layout():
    s = daub4_stencil()
    c = compile_banded(s, 128)
    p = plan(s, 128)
    blocks = [i for i, g in enumerate(c.gates) if g.kind == "BLOCK"]
    assert len(blocks) == 2 and blocks[-1] == len(c.gates) - 1
    assert c.gates[blocks[0]].targets == tuple(range(int(math.log2(p.K))))
    assert c.n_qubits == 7


def test_banded_with_net_shift():
    s = reanchor(daub4_stencil(), -1)
    assert worst_error(compile_banded(s, 128), tile(s, 128), 7) <= 1e-9


def test_banded_with_extra_controls():
    s = haar_stencil()
    c = compile_banded(s, 64, extra_controls=((6, 1),))
    M = np.zeros((128, 128), dtype=complex)
    M[:64, :64] = np.eye(64)
    M[64:, 64:] = materialize(s, 64)
    assert np.max(np.abs(circuit_unitary(c) - M)) <= 1e-10
    with pytest.raises(CircuitError):
        compile_banded(s, 64, extra_controls=((3, 1),))


def test_pyramid_haar_constant():
    c = compile_pyramid(haar_stencil(), 8, 2)
    out = apply_circuit(np.ones(8) / math.sqrt(8), c)
    np.testing.assert_allclose(out, np.eye(8)[0], atol=1e-12)
    assert c.n_qubits == 3


def test_pyramid_daub4_256():
    s = daub4_stencil()
    c = compile_pyramid(s, 256, 4)
    psi = batch(8, 8)
    ref = np.stack([dwt_pyramid(v, s, 4) for v in psi.T], axis=1)
    assert np.max(np.abs(apply_circuit(psi, c) - ref)) <= 1e-9


def test_single_level_pyramid_is_banded_plus_shuffle():
    s = haar_stencil()
    single = compile_pyramid(s, 64, 64)
    direct = compile_banded(s, 64) + shuffle_circuit(range(6))
    assert np.max(np.abs(circuit_unitary(single) - circuit_unitary(direct))) <= 1e-12


def test_pyramid_min_size_rejections():
    with pytest.raises(StencilError):
        compile_pyramid(daub4_stencil(), 64, 2)
    with pytest.raises(StencilError):
        compile_pyramid(haar_stencil(), 64, 3)


def test_pyramid_falls_back_to_direct_blocks():
    c = compile_pyramid(daub4_stencil(), 16)
    assert c.n_qubits == 4
    assert any(g.kind == "BLOCK" and len(g.targets) == 4 for g in c.gates)


def test_lower_single_2x2_block_unchanged():
    H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    c = Circuit(2, (Gate("BLOCK", (1,), ((0, 1),), H),))
    low = lower_blocks(c)
    assert gate_count(low)["total_gates"] == gate_count(c)["total_gates"]


def test_lower_removes_identity_block():
    c = Circuit(3, (Gate("BLOCK", (0, 1), (), np.eye(4)), Gate("BLOCK", (2,), (), np.eye(2))))
    assert len(lower_blocks(c)) == 0


def test_lower_compiled_haar():
    c = compile_banded(haar_stencil(), 64)
    low = lower_blocks(c)
    assert all(g.kind != "BLOCK" or len(g.targets) == 1 for g in low.gates)
    psi = batch(6)
    assert np.max(np.linalg.norm(apply_circuit(psi, c) - apply_circuit(psi, low), axis=0)) <= 1e-9


def test_lower_random_block_with_controls():
    rng = np.random.default_rng(5)
    U = np.linalg.qr(rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8)))[0]
    c = Circuit(5, (Gate("BLOCK", (4, 0, 2), ((1, 0), (3, 1)), U),))
    assert np.max(np.abs(circuit_unitary(c) - circuit_unitary(lower_blocks(c)))) <= 1e-10
