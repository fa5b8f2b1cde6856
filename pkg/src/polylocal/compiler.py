"""Circuit compilation for banded filters and the pyramid transform."""
from __future__ import annotations

import numpy as np

from .banded import BandStencil, StencilError, log2_exact, materialize, net_shift, reanchor
from .circuit import Circuit, CircuitError, Gate, shuffle_circuit, synth_add_constant, synth_add_power_of_two
from .numerics import two_level_decompose
from .truncation import PlanError, plan, truncation_blocks
from .wavelet import check_min_size, default_min_size, level_sizes


def _check_controls(extra_controls, n: int) -> tuple:
    extra = tuple((int(q), int(p)) for q, p in extra_controls)
    clash = [q for q, _ in extra if q < n]
    if clash:
        raise CircuitError(f"extra controls {clash} overlap the {n} data qubits")
    return extra


def compile_banded(s: BandStencil, N: int, extra_controls=(), n_qubits: int | None = None,
                   K_override: int | None = None) -> Circuit:
    """Circuit for M_N as (Mbar (x) id) P (Mbarbar (x) id) P^-1.

    Gates in application order: the inverse +K/2 adder, the Mbarbar block on
    the low log2 K qubits, the adder, the Mbar block.  A stencil whose rows
    carry a nonzero net shift is first re-anchored and the leftover cyclic
    shift is emitted as a constant adder in front.
    """
    n = log2_exact(N)
    extra = _check_controls(extra_controls, n)
    width = n_qubits if n_qubits is not None else max([n] + [q + 1 for q, _ in extra])
    data = list(range(n))

    pre = Circuit(width)
    sigma = round(net_shift(s))
    if sigma:
        s = reanchor(s, sigma)
        pre = synth_add_constant(n, -sigma, data).widen(width)

    p = plan(s, N, K_override)
    blocks = truncation_blocks(s, p)
    low = tuple(range(log2_exact(p.K)))
    adder = synth_add_power_of_two(n, log2_exact(p.shift), data).widen(width)
    gates = (
        pre.gates
        + adder.inverse().gates
        + (Gate("BLOCK", low, (), blocks.Mbarbar_block),)
        + adder.gates
        + (Gate("BLOCK", low, (), blocks.Mbar_block),)
    )
    return Circuit(width, tuple(g.with_controls(extra) for g in gates))


def _level_filter(s: BandStencil, size: int, controls: tuple, width: int) -> Circuit:
    try:
        return compile_banded(s, size, controls, width)
    except (PlanError, StencilError):
        U = materialize(s, size, strict=False)
        return Circuit(width, (Gate("BLOCK", tuple(range(log2_exact(size))), controls, U),))


def compile_pyramid(s: BandStencil, N: int, min_size: int | None = None) -> Circuit:
    """Ancilla-free pyramid transform on log2 N qubits.

    Level j acts on the low n - j qubits, zero-controlled on the high j: the
    filter for size N / 2^j followed by a shuffle sending even outputs to the
    lower half.  Output layout matches :func:`polylocal.wavelet.dwt_pyramid`.
    """
    n = log2_exact(N)
    min_size = default_min_size(s) if min_size is None else min_size
    check_min_size(s, N, min_size)
    c = Circuit(n)
    for j, size in enumerate(level_sizes(N, min_size)):
        a = n - j
        controls = tuple((q, 0) for q in range(a, n))
        c = c + _level_filter(s, size, controls, n)
        c = c + shuffle_circuit(range(a), n).with_controls(controls)
    return c


def _gray_path(i: int, j: int) -> list[int]:
    path, cur = [i], i
    diff = i ^ j
    bit = 0
    while diff:
        if diff & 1:
            cur ^= 1 << bit
            path.append(cur)
        diff >>= 1
        bit += 1
    return path


def _lower_two_level(targets: tuple, controls: tuple, i: int, j: int, u: np.ndarray) -> list[Gate]:
    """Gray-code realization of a two-level factor on basis states i, j."""
    t = len(targets)
    path = _gray_path(i, j)

    def others(state: int, flip: int) -> tuple:
        return tuple((targets[q], state >> q & 1) for q in range(t) if q != flip)

    chain = []
    for a, b in zip(path[:-2], path[1:-1]):
        flip = (a ^ b).bit_length() - 1
        chain.append(Gate("MCX", (targets[flip],), others(a, flip) + controls))
    last, end = path[-2], path[-1]
    flip = (last ^ end).bit_length() - 1
    # state i now sits at `last`; order the 2x2 block by the value of the flip bit
    if last >> flip & 1:
        u = u[::-1, ::-1]
    core = Gate("BLOCK", (targets[flip],), others(last, flip) + controls, np.ascontiguousarray(u))
    return chain + [core] + chain[::-1]


def lower_blocks(c: Circuit) -> Circuit:
    """Replace every BLOCK by controlled one-qubit BLOCKs and MCX permutations."""
    out = []
    for g in c.gates:
        if g.kind != "BLOCK" or len(g.targets) == 1:
            if g.kind == "BLOCK" and np.allclose(g.matrix, np.eye(2), atol=1e-14):
                continue
            out.append(g)
            continue
        for f in two_level_decompose(g.matrix):
            out.extend(_lower_two_level(g.targets, g.controls, f.i, f.j, f.u))
    return Circuit(c.n_qubits, tuple(out))
