"""Measurements behind the acceptance criteria, shared by the test suite and the CLI report.

Every function is deterministic in its arguments; nothing here reads the clock
or the host, so a report re-run with the same config is byte-identical.
"""
from __future__ import annotations

import math

import numpy as np

from .banded import (BandStencil, daub4_stencil, haar_stencil, identity_stencil, materialize,
                     periodicity_residual, random_qmf_stencil, tile)
from .circuit import gate_count, synth_add_power_of_two
from .compiler import compile_banded, compile_pyramid
from .simulator import (FunctionSpec, LocallyPolyOracle, apply_circuit, circuit_unitary,
                        continuous_transform, invert_bijection_demo, phase_register,
                        quasi_isometry_distortion, random_state, sample_measure, total_variation)
from .truncation import PlanError, factorization_report, plan, pure_rows, truncate_matrix, verify_lemma_containment
from .wavelet import dwt_pyramid, level_sizes

N_MAX = 1024


def default_stencils(qmf_layers=(2,), qmf_seeds=range(1, 6)) -> list[BandStencil]:
    out = [identity_stencil(), haar_stencil(), daub4_stencil()]
    out += [random_qmf_stencil(L, seed) for L in qmf_layers for seed in qmf_seeds]
    return out


def planned_sizes(s: BandStencil, n_max: int = N_MAX) -> list[int]:
    """Powers of two up to n_max where the truncation plan exists."""
    out = []
    N = 2
    while N <= n_max:
        try:
            plan(s, N)
            out.append(N)
        except PlanError:
            pass
        N *= 2
    return out


def loglog_slope(ns, values) -> float:
    return float(np.polyfit(np.log(ns), np.log(values), 1)[0])


def factorization(stencils, n_max: int = N_MAX) -> list[dict]:
    rows = []
    for s in stencils:
        for N in planned_sizes(s, n_max):
            r = factorization_report(s, N)
            rows.append({"stencil": s.name, "N": N, "K": r["K"], "residual": r["factorization_residual"]})
    return rows


def truncation_structure(stencils, N: int = 256) -> list[dict]:
    rows = []
    for s in stencils:
        p = plan(s, N)
        M = materialize(s, N)
        Mbar, _, diag = truncate_matrix(M, p)
        counts = [pure_rows(Mbar, p, m) for m in range(len(p.cuts))]
        rows.append({
            "stencil": s.name,
            "N": N,
            "b": p.b,
            "L_I": p.L_I,
            "unitarity_residual": diag["unitarity_residual"],
            "band_width": diag["band_width"],
            "periodicity_residual": periodicity_residual(Mbar, p.K),
            "untouched_rows": sorted(set(counts)),
            "expected_untouched_rows": p.L_I - 2 * p.b,
        })
    return rows


def lemma_containment(stencils, N: int = 256, trials: int = 20, seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    rows = []
    for s in stencils:
        M = materialize(s, N)
        b = s.b
        worst = [0.0, 0.0]
        for _ in range(trials):
            length = int(rng.integers(1, N // 4))
            start = int(rng.integers(0, N))
            I = (start + np.arange(length)) % N
            J = (start - (b - 1) + np.arange(length + 2 * (b - 1))) % N
            wv, vw = verify_lemma_containment(M, I, J, b)
            worst = [max(worst[0], wv), max(worst[1], vw)]
        rows.append({"stencil": s.name, "N": N, "res_WV": worst[0], "res_VW": worst[1]})
    return rows


def adder_exhaustive(n_max: int = 10) -> float:
    """Largest deviation of the simulated adder from x -> x + 2^m over all n, m, x."""
    worst = 0.0
    for n in range(1, n_max + 1):
        x = np.arange(2 ** n)
        for m in range(n + 1):
            U = circuit_unitary(synth_add_power_of_two(n, m))
            want = np.zeros_like(U)
            want[(x + 2 ** m) % 2 ** n, x] = 1
            worst = max(worst, float(np.max(np.abs(U - want))))
    return worst


def adder_counts(ns=range(4, 13)) -> dict:
    ns = list(ns)
    counts = [gate_count(synth_add_power_of_two(n, 0))["elementary"] for n in ns]
    return {"n": ns, "elementary": counts, "slope": loglog_slope(ns, counts)}


def compiler_soundness(stencils, n_max: int = N_MAX, states: int = 20, seed: int = 0) -> list[dict]:
    rows = []
    for s in stencils:
        for N in planned_sizes(s, n_max):
            n = int(math.log2(N))
            psi = np.stack([random_state(n, seed + i) for i in range(states)], axis=1)
            out = apply_circuit(psi, compile_banded(s, N))
            err = float(np.max(np.linalg.norm(out - tile(s, N) @ psi, axis=0)))
            rows.append({"stencil": s.name, "N": N, "error": err})
    return rows


def pyramid_soundness(stencils, n_max: int = 256) -> list[dict]:
    rows = []
    for s in stencils:
        N = 2
        while N <= n_max:
            if N >= max(s.k, s.b, 2) and N % s.k == 0:
                try:
                    materialize(s, N, strict=False)
                except ValueError:
                    N *= 2
                    continue
                c = compile_pyramid(s, N)
                U = circuit_unitary(c)
                ref = np.stack([dwt_pyramid(e, s) for e in np.eye(N)], axis=1)
                rows.append({"stencil": s.name, "N": N, "error": float(np.max(np.abs(U - ref))),
                             "n_qubits": c.n_qubits, "log2N": int(math.log2(N))})
            N *= 2
    return rows


def moment_conditions(N: int = 128, min_size: int = 4, margin: int = 4) -> dict:
    s = daub4_stencil()
    sizes = level_sizes(N, min_size)
    const = dwt_pyramid(np.ones(N), s, min_size)
    ramp = dwt_pyramid(np.arange(N, dtype=float), s, min_size)
    const_worst, ramp_worst = 0.0, 0.0
    for n in sizes:
        dc, dr = const[n // 2: n], ramp[n // 2: n]
        pos = np.arange(dr.size)
        interior = np.minimum(pos, dr.size - 1 - pos) >= margin
        const_worst = max(const_worst, float(np.max(np.abs(dc))))
        if interior.any():
            ramp_worst = max(ramp_worst, float(np.max(np.abs(dr[interior]))))
    return {"N": N, "constant_detail_max": const_worst, "ramp_interior_detail_max": ramp_worst}


def sampling_tvd(N: int = 64, shots: int = 100_000, seed: int = 0) -> dict:
    s = daub4_stencil()
    n = int(math.log2(N))
    psi = apply_circuit(random_state(n, seed), compile_pyramid(s, N))
    hist = sample_measure(psi, shots, seed)
    return {"N": N, "shots": shots, "seed": seed, "tvd": total_variation(hist, psi)}


def direct_phase_formula(h: np.ndarray, D: int, transform) -> np.ndarray:
    """sum_x w^x T(f_x) with f_x the indicator of {t : x(t) = x}, over sqrt N."""
    N = h.size
    codes = np.rint(D * h / (2 * np.pi)).astype(int)
    w = np.exp(2j * np.pi / D)
    out = np.zeros(N, dtype=complex)
    for x in np.unique(codes):
        out += w ** x * transform((codes == x).astype(complex))
    return out / math.sqrt(N)


def continuous_transform_check(N: int = 64, D: int = 256, trials: int = 5, d: int = 8, seed: int = 0) -> dict:
    s = daub4_stencil()
    circuit = compile_pyramid(s, N)
    rng = np.random.default_rng(seed)
    top = 2 * np.pi * (D - 1) / D
    err, fid = 0.0, 1.0
    for _ in range(trials):
        h = rng.uniform(0, top, N)
        res = continuous_transform(h, circuit, D)
        ref = direct_phase_formula(h, D, lambda v: dwt_pyramid(v, s))
        err = max(err, float(np.max(np.abs(res.amplitudes - ref))))
        fid = min(fid, res.phase_fidelity)
    scale = {str(DD): quasi_isometry_distortion(d, DD) / (d / DD) ** 2 for DD in (64, 128, 256)}
    ratios = list(scale.values())
    return {
        "N": N, "D": D, "trials": trials, "seed": seed,
        "formula_error": err,
        "phase_fidelity_min": fid,
        "distortion_over_d2_D2": scale,
        "distortion_spread": max(ratios) / min(ratios),
        "phase_register_norm": float(np.linalg.norm(phase_register(D))),
    }


def oracle_inversion(n: int = 10, functions: int = 100, ys: int = 50, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    N = 2 ** n
    wrong, calls_off = 0, 0
    targets = rng.choice(N, size=ys, replace=False)
    for _ in range(functions):
        a = int(rng.integers(0, N // 2)) * 2 + 1
        c = int(rng.integers(0, N))
        f = FunctionSpec.affine(a, c, N)
        oracle = LocallyPolyOracle(f)
        for y in targets:
            before = oracle.calls
            x = invert_bijection_demo(f, int(y), seed, oracle)
            wrong += f(x) != y
            calls_off += oracle.calls - before != 1
    return {"n": n, "functions": functions, "ys": ys, "seed": seed, "wrong": int(wrong), "bad_call_counts": int(calls_off)}


def pyramid_counts(ns=range(6, 13)) -> dict:
    ns = list(ns)
    counts = [gate_count(compile_pyramid(daub4_stencil(), 2 ** n))["elementary"] for n in ns]
    return {"n": ns, "elementary": counts, "slope": loglog_slope(ns, counts)}


def build_report(config: dict | None = None) -> dict:
    cfg = dict(config or {})
    seed = int(cfg.get("seed", 0))
    n_max = int(cfg.get("n_max", N_MAX))
    shots = int(cfg.get("shots", 100_000))
    stencils = default_stencils()

    def worst(rows, key):
        return max(r[key] for r in rows)

    fac = factorization(stencils, n_max)
    trunc = truncation_structure(stencils)
    lemma = lemma_containment(stencils, seed=seed)
    adder = adder_counts()
    comp = compiler_soundness(stencils + [random_qmf_stencil(3, seed + 1)], n_max, seed=seed)
    pyr = pyramid_soundness([haar_stencil(), daub4_stencil(), random_qmf_stencil(2, 1)])
    moments = moment_conditions()
    samp = sampling_tvd(shots=shots, seed=seed)
    cont = continuous_transform_check(seed=seed)
    inv = oracle_inversion(seed=seed)
    pc = pyramid_counts()
    return {
        "config": {"seed": seed, "n_max": n_max, "shots": shots},
        "stencils": [s.name for s in stencils],
        "criteria": {
            "1_factorization": {"max_residual": worst(fac, "residual"), "threshold": 1e-9, "rows": fac},
            "2_truncation": {"rows": trunc},
            "3_lemma": {"max_res_WV": worst(lemma, "res_WV"), "max_res_VW": worst(lemma, "res_VW"), "rows": lemma},
            "4_adder": {"exhaustive_max_error": adder_exhaustive(), "counts": adder, "slope_threshold": 2.2},
            "5_compiler": {"max_error": worst(comp, "error"), "rows": comp},
            "6_pyramid": {"max_error": worst(pyr, "error"), "rows": pyr},
            "7_moments": moments,
            "8_sampling": samp,
            "9_continuous": cont,
            "10_inversion": inv,
            "11_gate_scaling": dict(pc, slope_threshold=3.0),
        },
    }
