"""``fermigrad`` command-line entry point.

Commands: ``energy``, ``grad``, ``vqe``, ``adapt``, ``excited``, ``spectrum``.
Every command writes a JSON run record (to ``--out`` or stdout); commands
with tabular output also write CSV (``--csv``; ``grad`` prints it to stdout
when no path is given).

Exit codes: 0 success, 2 parse/config error, 3 non-finite value,
4 convergence not reached.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import exact, optimize
from .autodiff import Expectation, GradientScheme, finite_difference, grad
from .fermion import Excitation
from .io import ConfigError, DimensionError, ProblemFile, load_config, load_problem, record_json, rows_to_csv
from .pauli import PauliParseError
from .simulator import (
    Circuit,
    CircuitParseError,
    FermionicExcitation,
    SimulationError,
    UnassignedParameterError,
    overlap_squared,
    parse_gate,
)

log = logging.getLogger("fermigrad")

EXIT_OK, EXIT_INPUT, EXIT_NONFINITE, EXIT_NOT_CONVERGED = 0, 2, 3, 4

SCHEMES = GradientScheme.KINDS


# helpers --------------------------------------------------------------------

def _parse_params(items: Sequence[str]) -> dict[str, float]:
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise ConfigError(f"--param expects name=value, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"--param {name}: {value!r} is not a number") from None
    return out


def _gates(lines: Sequence[str] | str, n_qubits: int) -> Circuit:
    if isinstance(lines, str):
        return Circuit.from_text(lines, n_qubits)
    return Circuit(tuple(parse_gate(str(line), i) for i, line in enumerate(lines, start=1)), n_qubits)


def _scheme(args, config: dict[str, Any], multiple: bool = False):
    raw = args.scheme or config.get("scheme") or ("exact4,real2" if multiple else "real2")
    alpha = args.alpha or str(config.get("alpha", "+"))
    names = [s.strip() for s in str(raw).split(",") if s.strip()]
    for n in names:
        if n not in SCHEMES:
            raise ConfigError(f"unknown scheme {n!r}; expected one of {', '.join(SCHEMES)}")
    if alpha not in ("+", "-"):
        raise ConfigError(f"--alpha must be + or -, got {alpha!r}")
    if not multiple and len(names) != 1:
        raise ConfigError("this command takes a single scheme")
    schemes = [GradientScheme.parse(n, alpha) for n in names]
    return schemes if multiple else schemes[0]


def _occupied(problem: ProblemFile, config: dict[str, Any], key: str = "reference") -> list[int]:
    occ = config.get(key, problem.hf_occupied)
    if occ is None:
        raise ConfigError("no reference occupation: set 'reference' in the config or hf_occupied in the problem")
    return [int(q) for q in occ]


def default_excitation(occupied: Sequence[int], n_qubits: int) -> Excitation:
    """Paired double moving the highest occupied spatial orbital into the lowest virtual one."""
    occ_spatial = sorted({q // 2 for q in occupied})
    virt = [j for j in range(n_qubits // 2) if j not in occ_spatial]
    if not occ_spatial or not virt:
        raise ConfigError("cannot build a default ansatz: no occupied or no virtual orbitals")
    h, l = occ_spatial[-1], virt[0]
    return Excitation(((2 * h, 2 * l), (2 * h + 1, 2 * l + 1)))


def default_cis_pair(occupied: Sequence[int], n_qubits: int):
    e = default_excitation(occupied, n_qubits)
    (h_up, l_up), (h_dn, l_dn) = e.pairs
    return ((h_up, l_up), (h_dn, l_dn))


def _ansatz(config: dict[str, Any], problem: ProblemFile, occupied: Sequence[int]) -> Circuit:
    n = problem.n_qubits
    if "ansatz" in config:
        return _gates(config["ansatz"], n)
    if "circuit" in config:
        return Circuit.from_text(Path(config["circuit"]).read_text(), n)
    return Circuit((FermionicExcitation(default_excitation(occupied, n), "theta"),), n)


def _reference(config: dict[str, Any], problem: ProblemFile) -> Circuit:
    occ = _occupied(problem, config)
    pair = config.get("cis_pair")
    if pair is not None:
        try:
            (a, b), (c, d) = pair
            pair = ((int(a), int(b)), (int(c), int(d)))
        except (TypeError, ValueError):
            raise ConfigError(f"cis_pair must be [[i_up, a_up], [i_down, a_down]], got {pair!r}") from None
    try:
        return optimize.prepare_reference(occ, problem.n_qubits, pair)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _initial(config: dict[str, Any], params: Sequence[str], seed: int) -> dict[str, float]:
    init = config.get("initial", 0.0)
    if init == "random":
        rng = np.random.default_rng(seed)
        return {p: float(rng.uniform(-0.1, 0.1)) for p in params}
    if isinstance(init, dict):
        return {p: float(init.get(p, 0.0)) for p in params}
    try:
        return {p: float(init) for p in params}
    except (TypeError, ValueError):
        raise ConfigError(f"initial must be a number, a mapping or 'random', got {init!r}") from None


def _minimize_opts(config: dict[str, Any], threads: int | None) -> dict[str, Any]:
    opts: dict[str, Any] = {"threads": threads}
    for key, cast in (("method", str), ("tol", float), ("max_iters", int), ("step", float), ("line_search", bool)):
        if key in config:
            opts[key] = cast(config[key])
    return opts


def _pool(config: dict[str, Any], n_qubits: int, default_doubles: str = "paired") -> optimize.OperatorPool:
    pool_cfg = config.get("pool", {}) or {}
    if not isinstance(pool_cfg, dict):
        raise ConfigError("pool must be a mapping")
    try:
        if "operators" in pool_cfg:
            cands = []
            for entry in pool_cfg["operators"]:
                group = entry if entry and isinstance(entry[0], list) else [entry]
                cands.append(tuple(Excitation.of(*map(int, ex)) for ex in group))
            pool = optimize.OperatorPool(tuple(cands), spin_filter=bool(pool_cfg.get("spin_filter", True)))
        else:
            pool = optimize.make_pool(
                n_qubits,
                singles=bool(pool_cfg.get("singles", True)),
                doubles=pool_cfg.get("doubles", default_doubles),
                spin_adapted=bool(pool_cfg.get("spin_adapted", True)),
                freeze=[int(j) for j in pool_cfg.get("freeze", [])],
            )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid pool: {exc}") from exc
    pool.check(n_qubits)
    return pool


def _layout(config: dict[str, Any], n_qubits: int) -> optimize.AnsatzLayout:
    blocks_cfg = config.get("layout")
    if blocks_cfg is None:
        return optimize.AnsatzLayout.trailing()
    blocks = []
    for block in blocks_cfg:
        if block == "adaptive":
            blocks.append(optimize.Adaptive())
        elif isinstance(block, dict) and "static" in block:
            blocks.append(optimize.Static(_gates(block["static"], n_qubits).gates))
        else:
            raise ConfigError(f"layout blocks are 'adaptive' or {{static: [gates]}}, got {block!r}")
    if not any(isinstance(b, optimize.Adaptive) for b in blocks):
        raise ConfigError("layout needs at least one adaptive block")
    return optimize.AnsatzLayout(blocks)


def _adapt_opts(config: dict[str, Any]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    if "screen_scheme" in config:
        name = str(config["screen_scheme"])
        if name not in SCHEMES:
            raise ConfigError(f"unknown screen_scheme {name!r}; expected one of {', '.join(SCHEMES)}")
        out["screen_scheme"] = GradientScheme.parse(name, str(config.get("alpha", "+")))
    for key, cast in (("screen_tol", float), ("energy_tol", float), ("max_ops", int)):
        if key in config:
            out[key] = cast(config[key])
    return out


def _rounds(result: optimize.AdaptResult) -> list[dict[str, Any]]:
    return [
        {
            "round": r.index,
            "operator": [[list(p) for p in e.pairs] for e in r.operator],
            "point": r.point,
            "gradient": r.gradient,
            "value": r.value,
            "energy": r.energy,
            "converged": r.converged,
        }
        for r in result.rounds
    ]


def _trace_csv(trace: list[dict[str, float]]) -> str:
    return rows_to_csv(["step", "iteration", "value", "grad_norm"],
                       [[i, int(t["iteration"]), float(t["value"]), float(t["grad_norm"])]
                        for i, t in enumerate(trace)])


# commands -------------------------------------------------------------------

def _circuit_arg(args, problem: ProblemFile) -> Circuit:
    if args.circuit:
        c = Circuit.from_text(Path(args.circuit).read_text(), problem.n_qubits)
        if c.n_qubits > problem.n_qubits:
            raise DimensionError(f"circuit uses {c.n_qubits} qubits but the problem has {problem.n_qubits}")
        return c
    return problem.reference_circuit()


def cmd_energy(args, problem, config) -> tuple[dict, str | None]:
    c = _circuit_arg(args, problem)
    values = _parse_params(args.param)
    missing = [p for p in c.parameters if p not in values]
    if missing:
        raise ConfigError(f"unassigned circuit parameters: {', '.join(missing)} (use --param)")
    energy = Expectation(c, problem.hamiltonian).evaluate(values, threads=args.threads)
    if not math.isfinite(energy):
        raise optimize.NonFiniteError(f"energy is not finite: {energy!r}")
    print(f"energy {energy!r}", file=sys.stderr)
    return {"energy": energy, "parameters": values, "circuit": c.to_text()}, None


def cmd_grad(args, problem, config) -> tuple[dict, str | None]:
    schemes = _scheme(args, config, multiple=True)
    if args.circuit:
        c = _circuit_arg(args, problem)
    else:
        occ = _occupied(problem, config)
        c = problem.reference_circuit() + _ansatz(config, problem, occ)
    fixed = _parse_params(args.param)
    free = [p for p in c.parameters if p not in fixed]
    scan = args.scan or (free[0] if len(free) == 1 else None)
    if scan is None or scan not in c.parameters:
        raise ConfigError(f"choose the scanned parameter with --scan (circuit parameters: {list(c.parameters)})")
    others = [p for p in free if p != scan]
    if others:
        raise ConfigError(f"unassigned circuit parameters: {', '.join(others)} (use --param)")
    energy = Expectation(c, problem.hamiltonian)
    derivs = [grad(energy, scan, s) for s in schemes]
    thetas = np.linspace(args.start, args.stop, args.points)
    header = [scan, "energy"] + [f"grad_{s.label()}" for s in schemes] + ["fd(h=1e-05)"]
    rows = []
    for t in thetas:
        vals = dict(fixed)
        vals[scan] = float(t)
        row = [float(t), energy.evaluate(vals, threads=args.threads)]
        row += [d.evaluate(vals, threads=args.threads) for d in derivs]
        row.append(finite_difference(energy, scan, vals))
        rows.append(row)
    arr = np.array(rows)
    if not np.all(np.isfinite(arr)):
        raise optimize.NonFiniteError("non-finite value in gradient table")
    summary = {
        "parameter": scan,
        "points": len(thetas),
        "range": [args.start, args.stop],
        "schemes": [s.label() for s in schemes],
        "leaves_per_gradient": {s.label(): len(d.expectations()) for s, d in zip(schemes, derivs)},
        "max_abs_vs_fd": {s.label(): float(np.max(np.abs(arr[:, 2 + i] - arr[:, -1])))
                          for i, s in enumerate(schemes)},
        "energy_min": float(arr[:, 1].min()),
        "energy_max": float(arr[:, 1].max()),
    }
    return summary, rows_to_csv(header, rows)


def cmd_vqe(args, problem, config) -> tuple[dict, str | None]:
    scheme = _scheme(args, config)
    ref = _reference(config, problem)
    ansatz = _ansatz(config, problem, _occupied(problem, config))
    full = ref + ansatz
    init = _initial(config, full.parameters, args.seed)
    res = optimize.vqe(problem.hamiltonian, ansatz, ref, scheme=scheme, initial=init,
                       **_minimize_opts(config, args.threads))
    print(f"energy {res.energy!r} ({'converged' if res.converged else 'NOT converged'}, {res.iterations} iterations)", file=sys.stderr)
    rec = {"energy": res.energy, "parameters": res.values, "initial": init, "converged": res.converged,
           "iterations": res.iterations, "trace": res.trace, "scheme": scheme.label()}
    if not res.converged:
        rec["_not_converged"] = True
    return rec, _trace_csv(res.trace)


def cmd_adapt(args, problem, config) -> tuple[dict, str | None]:
    scheme = _scheme(args, config)
    ref = _reference(config, problem)
    res = optimize.adapt_vqe(problem.hamiltonian, _layout(config, problem.n_qubits),
                             _pool(config, problem.n_qubits), ref, scheme=scheme,
                             **_adapt_opts(config), **_minimize_opts(config, args.threads))
    print(f"energy {res.energy!r} after {len(res.rounds)} rounds ({res.stop_reason})", file=sys.stderr)
    rec = {"energy": res.energy, "initial_energy": res.initial_value, "parameters": res.values,
           "rounds": _rounds(res), "stop_reason": res.stop_reason, "layout": res.layout.describe(),
           "scheme": scheme.label(), "trace": res.trace}
    if any(not r.converged for r in res.rounds):
        rec["_not_converged"] = True
    rows = [[0, res.initial_value, res.initial_value, ""]] + [
        [r.index, r.value, r.energy, r.gradient] for r in res.rounds]
    return rec, rows_to_csv(["round", "objective", "energy", "screened_gradient"], rows)


def cmd_excited(args, problem, config) -> tuple[dict, str | None]:
    scheme = _scheme(args, config)
    n = problem.n_qubits
    mode = config.get("mode", "adapt")
    if mode not in ("adapt", "vqe"):
        raise ConfigError(f"mode must be 'adapt' or 'vqe', got {mode!r}")
    states = config.get("states")
    if states is None:
        n_states = int(config.get("n_states", 2))
        occ = _occupied(problem, config)
        states = [{}] + [{"cis_pair": [list(p) for p in default_cis_pair(occ, n)]}] * (n_states - 1)
    if not states:
        raise ConfigError("excited needs at least one state")
    task = optimize.ExcitedStateTask(problem.hamiltonian, penalties=None)
    penalties = config.get("penalties")
    out_states, rows, not_conv = [], [], False
    for k, state_cfg in enumerate(states):
        merged = {**{key: v for key, v in config.items() if key not in ("states", "cis_pair")}, **(state_cfg or {})}
        ref = _reference(merged, problem)
        if penalties is not None:
            task.penalties = [float(w) for w in penalties[: len(task.solved)]]
        prefix = f"s{k}_"
        if mode == "adapt":
            res = optimize.excited_adapt(task, _layout(merged, n), _pool(merged, n, default_doubles="all"), ref,
                                         scheme=scheme, param_prefix=prefix, **_adapt_opts(merged),
                                         **_minimize_opts(merged, args.threads))
            energy, values, circ = res.energy, res.values, res.circuit
            info = {"rounds": _rounds(res), "stop_reason": res.stop_reason, "objective": res.value}
            not_conv |= any(not r.converged for r in res.rounds)
        else:
            ansatz = _ansatz(merged, problem, _occupied(problem, merged))
            ansatz = Circuit(tuple(_prefixed(g, prefix) for g in ansatz.gates), n)
            init = _initial(merged, (ref + ansatz).parameters, args.seed + k)
            res = optimize.excited_vqe(task, ansatz, ref, scheme=scheme, initial=init,
                                       **_minimize_opts(merged, args.threads))
            energy, values, circ = res.energy, res.values, res.circuit
            info = {"iterations": res.iterations, "converged": res.converged}
            not_conv |= not res.converged
        overlaps = [overlap_squared(s.circuit, circ.bind(values)) for s in task.solved]
        task.add(circ, values, energy)
        print(f"state {k}: energy {energy!r}", file=sys.stderr)
        out_states.append({"state": k, "energy": energy, "parameters": values,
                           "overlaps_with_previous": overlaps, **info})
        rows.append([k, energy, max(overlaps, default=0.0)])
    rec = {"states": out_states, "energies": [s["energy"] for s in out_states], "mode": mode,
           "scheme": scheme.label()}
    if not_conv:
        rec["_not_converged"] = True
    return rec, rows_to_csv(["state", "energy", "max_overlap_squared"], rows)


def _prefixed(g, prefix: str):
    if isinstance(g, FermionicExcitation) and g.angle.param is not None:
        return replace(g, angle=replace(g.angle, param=prefix + g.angle.param))
    return g


def cmd_spectrum(args, problem, config) -> tuple[dict, str | None]:
    k = args.k
    if args.electrons is not None or args.spin is not None:
        values = exact.sector_spectrum(problem.hamiltonian, problem.n_qubits, k, args.electrons, args.spin)
    else:
        values = exact.dense_spectrum(problem.hamiltonian, problem.n_qubits, k)
    print(" ".join(repr(v) for v in values), file=sys.stderr)
    return {"eigenvalues": values, "k": k, "electrons": args.electrons, "spin": args.spin}, None


COMMANDS = {
    "energy": cmd_energy,
    "grad": cmd_grad,
    "vqe": cmd_vqe,
    "adapt": cmd_adapt,
    "excited": cmd_excited,
    "spectrum": cmd_spectrum,
}


# entry point ----------------------------------------------------------------

def _angle(text: str) -> float:
    t = text.strip().lower().replace("π", "pi")
    try:
        if "pi" in t:
            head = t.replace("*", "").split("pi")[0]
            tail = t.split("pi")[1]
            scale = float(head) if head not in ("", "+", "-") else (-1.0 if head == "-" else 1.0)
            div = float(tail.lstrip("/")) if tail else 1.0
            return scale * math.pi / div
        return float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad angle {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fermigrad", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("problem", help="Hamiltonian file, or a bundled problem name (e.g. h2_sto3g_0.7414)")
        p.add_argument("--circuit", help="circuit file (default: the problem's HF reference)")
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--scheme", help=f"gradient scheme ({'|'.join(SCHEMES)}); grad accepts a comma list")
        p.add_argument("--alpha", choices=["+", "-"], help="real2 shift sign / approx generator sign")
        p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")
        p.add_argument("--out", help="write the JSON record here instead of stdout")
        p.add_argument("--csv", help="write tabular output (scan, trace) here")
        p.add_argument("--threads", type=int, default=None, help="parallel expectation evaluation")
        p.add_argument("--seed", type=int, default=0, help="seed for random initial parameters")
        if name == "grad":
            p.add_argument("--scan", help="parameter to scan (default: the only free one)")
            p.add_argument("--points", type=int, default=101)
            p.add_argument("--start", type=_angle, default=0.0)
            p.add_argument("--stop", type=_angle, default=2 * math.pi)
        if name == "spectrum":
            p.add_argument("-k", type=int, default=4, help="number of eigenvalues")
            p.add_argument("--electrons", type=int, help="restrict to this particle number")
            p.add_argument("--spin", type=float, help="restrict to total spin S (0 = singlets)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_INPUT
    start = time.perf_counter()
    try:
        problem = load_problem(args.problem)
        config = load_config(args.config)
        result, table = COMMANDS[args.command](args, problem, config)
    except (PauliParseError, CircuitParseError, ConfigError, DimensionError, FileNotFoundError,
            exact.TooManyQubitsError, optimize.PenaltyError, UnassignedParameterError, IndexError,
            yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (optimize.NonFiniteError, SimulationError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    not_converged = bool(result.pop("_not_converged", False))
    record = {
        "command": args.command,
        "inputs": {
            "problem": str(args.problem),
            "problem_metadata": problem.metadata,
            "circuit": Path(args.circuit).read_text() if args.circuit else None,
            "config": config,
            "params": _parse_params(args.param),
            "scheme": args.scheme,
            "alpha": args.alpha,
            "seed": args.seed,
            "threads": args.threads,
        },
        "result": result,
        "wall_time_s": time.perf_counter() - start,
    }
    text = record_json(record)
    if args.out:
        Path(args.out).write_text(text)
    elif args.command != "grad":
        sys.stdout.write(text)
    if table is not None:
        if args.csv:
            Path(args.csv).write_text(table)
        elif args.command == "grad":
            sys.stdout.write(table)
    if not_converged:
        print("warning: optimizer did not reach the gradient tolerance", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
