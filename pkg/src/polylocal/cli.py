"""Command-line front end.

Exit codes: 0 success, 2 validation failure, 1 internal error, 64 usage error.
CSV outputs echo the seed on stderr; JSON outputs carry it as a field.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .banded import StencilError, load_stencil, validate
from .circuit import CircuitError, deserialize, gate_count
from .compiler import compile_banded, compile_pyramid, lower_blocks
from .simulator import CapacityError, FunctionSpec, LocallyPolyOracle, apply_circuit, invert_bijection_demo, random_state, sample_measure
from .truncation import PlanError, TruncationError, factorization_report
from .wavelet import cascade, dwt_pyramid

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_INTERNAL, EXIT_INVALID, EXIT_USAGE = 0, 1, 2, 64
VALIDATION_ERRORS = (StencilError, PlanError, TruncationError, CircuitError, CapacityError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# flag defaults, applied after the config file so that explicit flags win
DEFAULTS = {"seed": 0, "mode": "banded", "lower": False, "iterations": 10, "grid": 64,
            "function": "phi"}


def _common(p):
    p.add_argument("--config", help="TOML file with flag values; flags win")
    p.add_argument("--out", help="write primary output here instead of stdout")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polylocal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check a stencil against the family hypotheses at size N")
    _common(p)
    p.add_argument("--stencil")
    p.add_argument("--n", type=int)

    p = sub.add_parser("factor", help="four-term factorization diagnostics")
    _common(p)
    p.add_argument("--stencil")
    p.add_argument("--n", type=int)
    p.add_argument("--k-override", type=int)

    p = sub.add_parser("compile", help="emit circuit JSON")
    _common(p)
    p.add_argument("--stencil")
    p.add_argument("--n", type=int)
    p.add_argument("--mode", choices=("banded", "pyramid"))
    p.add_argument("--min-size", type=int)
    p.add_argument("--k-override", type=int)
    p.add_argument("--lower", action="store_true", default=None)

    p = sub.add_parser("simulate", help="run a circuit on a state, dump index,re,im")
    _common(p)
    p.add_argument("--circuit", help="circuit JSON file (otherwise compiled from --stencil)")
    p.add_argument("--stencil")
    p.add_argument("--n", type=int)
    p.add_argument("--mode", choices=("banded", "pyramid"))
    p.add_argument("--min-size", type=int)
    p.add_argument("--input", help="CSV state (one value or re,im per line); default seeded random state")

    p = sub.add_parser("dwt", help="classical pyramid coefficients")
    _common(p)
    p.add_argument("--stencil")
    p.add_argument("--input", help="CSV signal; default seeded random signal of length --n")
    p.add_argument("--n", type=int)
    p.add_argument("--min-size", type=int)

    p = sub.add_parser("sample", help="measurement histogram of a compiled transform")
    _common(p)
    p.add_argument("--stencil")
    p.add_argument("--n", type=int)
    p.add_argument("--mode", choices=("banded", "pyramid"))
    p.add_argument("--min-size", type=int)
    p.add_argument("--shots", type=int)
    p.add_argument("--input")

    p = sub.add_parser("invert-oracle", help="invert an affine bijection with one oracle call")
    _common(p)
    p.add_argument("--n", type=int, help="number of qubits")
    p.add_argument("--a", type=int, help="odd multiplier")
    p.add_argument("--c", type=int, help="offset")
    p.add_argument("--y", type=int, help="target value; default seeded random")

    p = sub.add_parser("cascade", help="sampled scaling function or wavelet")
    _common(p)
    p.add_argument("--stencil")
    p.add_argument("--iterations", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--function", choices=("phi", "psi"))

    p = sub.add_parser("report", help="JSON report of every acceptance measurement")
    _common(p)
    p.add_argument("--n-max", type=int)
    p.add_argument("--shots", type=int)
    return parser


def _settings(args) -> dict:
    cfg = {}
    if args.config:
        with open(args.config, "rb") as fh:
            cfg = {k.replace("-", "_"): v for k, v in tomllib.load(fh).items()}
    out = dict(DEFAULTS)
    out.update(cfg)
    out.update({k: v for k, v in vars(args).items() if v is not None})
    return out


def _need(opts, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if opts.get(n) is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")


def _emit(text: str, opts) -> None:
    if opts.get("out"):
        Path(opts["out"]).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _read_vector(path: str) -> np.ndarray:
    vals = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p for p in line.split(",") if p.strip()]
        try:
            nums = [float(p) for p in parts]
        except ValueError:
            continue  # header row
        vals.append(complex(nums[-2], nums[-1]) if len(nums) >= 2 else nums[0])
    return np.asarray(vals, dtype=complex)


def _vector_csv(v: np.ndarray) -> str:
    lines = ["index,re,im"] + [f"{i},{float(z.real)!r},{float(z.imag)!r}" for i, z in enumerate(np.asarray(v, dtype=complex))]
    return "\n".join(lines) + "\n"


def _build_circuit(opts):
    if opts.get("circuit"):
        return deserialize(Path(opts["circuit"]).read_text())
    _need(opts, "stencil", "n")
    s = load_stencil(opts["stencil"])
    if opts["mode"] == "pyramid":
        return compile_pyramid(s, opts["n"], opts.get("min_size"))
    return compile_banded(s, opts["n"], K_override=opts.get("k_override"))


def _input_state(opts, n: int) -> np.ndarray:
    if opts.get("input"):
        psi = _read_vector(opts["input"])
        if psi.size != 2 ** n:
            raise StencilError(f"input has {psi.size} entries, circuit needs {2 ** n}")
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise StencilError("input state is zero")
        return psi / norm
    return random_state(n, opts["seed"])


def cmd_validate(opts):
    _need(opts, "stencil", "n")
    out = validate(load_stencil(opts["stencil"]), opts["n"])
    _emit(_json(out), opts)
    return EXIT_OK if out["ok"] else EXIT_INVALID


def cmd_factor(opts):
    _need(opts, "stencil", "n")
    out = factorization_report(load_stencil(opts["stencil"]), opts["n"], opts.get("k_override"))
    _emit(_json(out), opts)
    return EXIT_OK


def cmd_compile(opts):
    _need(opts, "stencil", "n")
    c = _build_circuit(dict(opts, circuit=None))
    if opts["lower"]:
        c = lower_blocks(c)
    _emit(c.to_json() + "\n", opts)
    counts = gate_count(c)
    print(f"gates={counts['total_gates']} elementary={counts['elementary']}", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(opts):
    c = _build_circuit(opts)
    psi = apply_circuit(_input_state(opts, c.n_qubits), c)
    _emit(_vector_csv(psi), opts)
    print(f"seed={opts['seed']}", file=sys.stderr)
    return EXIT_OK


def cmd_dwt(opts):
    _need(opts, "stencil")
    if opts.get("input"):
        x = _read_vector(opts["input"])
    else:
        _need(opts, "n")
        x = np.random.default_rng(opts["seed"]).normal(size=opts["n"]).astype(complex)
    y = dwt_pyramid(x, load_stencil(opts["stencil"]), opts.get("min_size"))
    _emit(_vector_csv(y), opts)
    print(f"seed={opts['seed']}", file=sys.stderr)
    return EXIT_OK


def cmd_sample(opts):
    c = _build_circuit(opts)
    psi = apply_circuit(_input_state(opts, c.n_qubits), c)
    shots = opts.get("shots") or 1000
    hist = sample_measure(psi, shots, opts["seed"])
    _emit(hist.to_csv(), opts)
    print(f"seed={opts['seed']} shots={shots}", file=sys.stderr)
    return EXIT_OK


def cmd_invert_oracle(opts):
    _need(opts, "n", "a")
    N = 2 ** opts["n"]
    a, c = opts["a"], opts.get("c") or 0
    if math.gcd(a, N) != 1:
        raise StencilError(f"a={a} is not invertible mod {N}")
    f = FunctionSpec.affine(a, c, N)
    y = opts.get("y")
    if y is None:
        y = int(np.random.default_rng(opts["seed"]).integers(0, N))
    oracle = LocallyPolyOracle(f)
    x = invert_bijection_demo(f, y, opts["seed"], oracle)
    _emit(_json({"n": opts["n"], "a": a, "c": c, "y": y, "x": x, "f_x": f(x),
                 "oracle_calls": oracle.calls, "seed": opts["seed"]}), opts)
    return EXIT_OK


def cmd_cascade(opts):
    _need(opts, "stencil")
    r = cascade(load_stencil(opts["stencil"]), opts["iterations"], opts["grid"])
    values = r.phi if opts["function"] == "phi" else r.psi
    lines = [f"x,{opts['function']}"] + [f"{float(x)!r},{float(np.real(v))!r}" for x, v in zip(r.x, values)]
    _emit("\n".join(lines) + "\n", opts)
    return EXIT_OK


def cmd_report(opts):
    from .report import build_report

    keys = ("seed", "n_max", "shots")
    cfg = {k: opts[k] for k in keys if opts.get(k) is not None}
    _emit(_json(build_report(cfg)), opts)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "factor": cmd_factor,
    "compile": cmd_compile,
    "simulate": cmd_simulate,
    "dwt": cmd_dwt,
    "sample": cmd_sample,
    "invert-oracle": cmd_invert_oracle,
    "cascade": cmd_cascade,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = _settings(args)
        return COMMANDS[args.command](opts)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"polylocal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (*VALIDATION_ERRORS, ValueError, OSError) as exc:
        print(f"polylocal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        print(f"polylocal: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
