"""Command-line entry point.

Every command prints a plain-text report, one ``key value`` pair per line.
Exit codes: 0 success or accept, 1 reject, 2 error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .graphs import Graph, parse_graph
from .hamiltonians import (
    MAX_DENSE_QUBITS,
    MAX_ENUMERATED_SITES,
    LocalHamiltonian,
    energy,
    enumerate_min_energy,
    hamiltonian_to_text,
    parse_hamiltonian,
    quantum_ground_energy,
    triangle_csp_hamiltonian,
    triangle_state,
    verify_witness,
)
from .lambda_solutions import LambdaSolution, cycle_solution, third_kind_solution, verify_lambda_solution
from .optimizer import EXACT_GUARD, exact_qq_solve, heuristic_ground_energy
from .qq_state import (
    Distribution,
    SparseDistribution,
    distribution_of_state,
    is_k_local_qq,
    parse_distribution,
)
from .reductions import StageError, decomposed_to_text, full_pipeline, parse_xlow, xlow_to_text
from .sic_basis import build_sic_basis, eigenvalues, sic_residuals

RESIDUAL_TOL = 1e-12
MAX_SEED = 2**64 - 1


class CliError(Exception):
    """Bad input or a failed stage; reported on stderr with exit code 2."""


@dataclass
class RunConfig:
    command: str
    inputs: tuple[str, ...] = ()
    output: str | None = None
    xi: float = 0.1
    eps: float = 1.0 / 40.0
    delta: float | None = None
    a: float | None = None
    k: int | None = None
    tol: float = 1e-9
    seed: int = 0
    rounds: int = 10
    delta_support: int = 32

    def validate(self) -> None:
        if not 0.0 < self.xi <= 1.0:
            raise CliError(f"xi must lie in (0, 1], got {self.xi}")
        if not 0.0 <= self.eps <= 1.0:
            raise CliError(f"eps must lie in [0, 1], got {self.eps}")
        if self.delta is not None and not 0.0 <= self.delta <= 1.0:
            raise CliError(f"delta must lie in [0, 1], got {self.delta}")
        if self.a is not None and not math.isfinite(self.a):
            raise CliError("the energy threshold must be finite")
        if self.k is not None and self.k < 1:
            raise CliError(f"k must be positive, got {self.k}")
        if not self.tol > 0.0:
            raise CliError(f"tol must be positive, got {self.tol}")
        if not 0 <= self.seed <= MAX_SEED:
            raise CliError("seed must fit in 64 unsigned bits")
        if self.rounds < 1 or self.delta_support < 1:
            raise CliError("rounds and delta-support must be positive")


def emit(key: str, value) -> None:
    if isinstance(value, float):
        value = repr(value)
    elif isinstance(value, (list, tuple)):
        value = " ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    print(f"{key} {value}")


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from exc


def _write(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror}") from exc


def _parse(what: str, parser: Callable[[str], object], text: str):
    try:
        return parser(text)
    except (ValueError, IndexError, KeyError) as exc:
        raise CliError(f"cannot parse {what}: {exc}") from exc


def load_hamiltonian(path: str) -> LocalHamiltonian:
    return _parse("Hamiltonian", parse_hamiltonian, _read(path))


def load_witness(path: str) -> Distribution:
    """A sparse distribution file, or a structured ``xlow`` witness."""
    text = _read(path)
    first = next((ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")), [])
    if first and first[0] == "xlow":
        return _parse("xlow witness", lambda t: parse_xlow(t)[0], text)
    return _parse("distribution", parse_distribution, text)


# ---------------------------------------------------------------- commands


def cmd_povm_check(cfg: RunConfig) -> int:
    basis = build_sic_basis()
    res = sic_residuals(basis)
    for key, val in res.items():
        emit(f"residual_{key}", val)
    emit("D0_spectrum", [round(float(x), 12) for x in eigenvalues(basis.D[0])])
    worst = max(res.values())
    emit("max_residual", worst)
    ok = worst <= RESIDUAL_TOL
    emit("status", "pass" if ok else "fail")
    return 0 if ok else 2


def cmd_verify(cfg: RunConfig) -> int:
    H = load_hamiltonian(cfg.inputs[0])
    mu = load_witness(cfg.inputs[1])
    try:
        verdict = verify_witness(H, cfg.a, mu, cfg.tol, cfg.k)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    emit("accepted", str(verdict.accepted).lower())
    emit("reason", verdict.reason or "none")
    emit("energy", verdict.energy)
    emit("threshold", float(cfg.a))
    emit("min_eigenvalue", verdict.min_eigenvalue)
    emit("violations", len(verdict.violations))
    if verdict.violations:
        subset, eig = min(verdict.violations, key=lambda v: v[1])
        emit("worst_subset", list(subset))
        emit("worst_eigenvalue", eig)
    return 0 if verdict.accepted else 1


def _parse_coloring(text: str | None) -> list[int] | None:
    if text is None:
        return None
    try:
        return [int(c) for c in text.replace(",", " ").split()]
    except ValueError as exc:
        raise CliError(f"bad coloring {text!r}") from exc


def cmd_reduce(cfg: RunConfig, coloring: str | None) -> int:
    G3 = _parse("graph", parse_graph, _read(cfg.inputs[0]))
    col = _parse_coloring(coloring)
    if col is not None and len(col) != G3.n:
        raise CliError(f"coloring has {len(col)} entries for {G3.n} vertices")
    try:
        res = full_pipeline(G3, cfg.xi, seed=cfg.seed, eps=cfg.eps, delta=cfg.delta, audit=False, coloring=col)
    except StageError as exc:
        raise CliError(f"stage {exc.stage} failed: {exc}") from exc
    rep = res.report
    prefix = cfg.output or Path(cfg.inputs[0]).stem
    dg = res.decomposed
    _write(f"{prefix}.ham", hamiltonian_to_text(res.hamiltonian))
    _write(f"{prefix}.dec", decomposed_to_text(dg))
    for ell, sol in enumerate(dg.solutions, start=1):
        lines = [f"part {ell}", f"kind {sol.kind}", f"lambda {sol.lambda_achieved!r}"]
        body = "\n".join(lines) + "\n"
        if isinstance(sol.distribution, SparseDistribution):
            body += sol.distribution.to_text()
        _write(f"{prefix}.part{ell}", body)
    for key in ("input_vertices", "input_edges", "isolated_removed", "degree_stage_vertices",
                "degree_stage_max_degree", "final_vertices", "final_edges", "class_V", "class_W",
                "class_T", "part_sizes", "lambda_achieved", "xi", "eps", "delta", "scale", "xi_b", "xi_a"):
        emit(key, rep[key])
    emit("soundness_energy", rep["b"])
    emit("completeness_energy", rep["a"])
    emit("input_3_colorable", "unknown" if rep["input_3_colorable"] is None else str(rep["input_3_colorable"]).lower())
    if res.coloring is not None:
        _write(f"{prefix}.witness", xlow_to_text(dg, res.coloring, rep["eps"], rep["delta"]))
        emit("witness", f"{prefix}.witness")
        emit("witness_energy", rep["witness_energy"])
    H = res.hamiltonian
    if H.n <= MAX_ENUMERATED_SITES:
        emit("enumerated_min_energy", enumerate_min_energy(H)[0])
    else:
        emit("enumerated_min_energy", "skipped")
    return 0


def _lambda_graph(spec: str) -> Graph:
    if spec.startswith("star:"):
        try:
            leaves = int(spec[5:])
        except ValueError as exc:
            raise CliError(f"bad star spec {spec!r}") from exc
        if leaves < 1:
            raise CliError("a star needs at least one leaf")
        return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])
    return _parse("graph", parse_graph, _read(spec))


def cmd_lambda(cfg: RunConfig, kind: str, spec: str, representation: str) -> int:
    try:
        if kind == "cycle":
            try:
                n = int(spec)
            except ValueError as exc:
                raise CliError(f"cycle length must be an integer, got {spec!r}") from exc
            sol: LambdaSolution = cycle_solution(n, representation=representation)
        else:
            J = _lambda_graph(spec)
            if J.m == 0:
                raise CliError("the graph J needs at least one edge")
            sol = third_kind_solution(J)
            if representation == "explicit":
                raise CliError("third-kind solutions are only available in structured form")
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    report = verify_lambda_solution(sol, seed=cfg.seed, tol=cfg.tol)
    emit("kind", sol.kind)
    emit("vertices", sol.n)
    emit("edges", sol.graph.m)
    emit("lambda", report.lambda_achieved)
    if report.worst_pair is not None:
        emit("worst_pair", list(report.worst_pair))
        emit("worst_tau", float(np.trace(sol.distribution.marginal(report.worst_pair))))
        emit("tau_min", report.tau_range[0])
        emit("tau_max", report.tau_range[1])
    emit("explicit", str(sol.explicit).lower())
    emit("passed", str(report.passed).lower())
    for msg in report.failures:
        emit("failure", msg)
    if cfg.output:
        if sol.explicit:
            _write(cfg.output, sol.distribution.to_text())
            emit("written", cfg.output)
        else:
            emit("written", "none")
    return 0 if report.passed else 1


def _oracles(H: LocalHamiltonian, k: int, tol: float) -> None:
    if H.n <= MAX_DENSE_QUBITS:
        emit("quantum_energy", quantum_ground_energy(H))
    else:
        emit("quantum_energy", "skipped")
    if H.n <= MAX_ENUMERATED_SITES:
        emit("min_assignment_energy", enumerate_min_energy(H)[0])
    else:
        emit("min_assignment_energy", "skipped")
    if 4**H.n <= EXACT_GUARD:
        res = exact_qq_solve(H, k, tol)
        emit("exact_qq_energy", res.energy)
        emit("exact_qq_lower_bound", res.lower_bound)
        emit("exact_qq_status", res.status)
    else:
        emit("exact_qq_energy", "skipped")


def cmd_optimize(cfg: RunConfig, oracle: bool) -> int:
    H = load_hamiltonian(cfg.inputs[0])
    k = H.k if cfg.k is None else cfg.k
    if not H.k <= k <= H.n:
        raise CliError(f"need {H.k} <= k <= {H.n}, got k={k}")
    res = heuristic_ground_energy(H, k, cfg.delta_support, cfg.rounds, cfg.seed, cfg.tol)
    if cfg.output:
        _write(cfg.output, res.mu.to_text())
    else:
        sys.stdout.write(res.mu.to_text())
    emit("rounds_run", len(res.history))
    emit("history", [float(e) for e in res.history])
    if oracle:
        _oracles(H, k, cfg.tol)
    print(res.summary())
    return 0


def cmd_oracle(cfg: RunConfig) -> int:
    H = load_hamiltonian(cfg.inputs[0])
    k = H.k if cfg.k is None else cfg.k
    if not H.k <= k <= H.n:
        raise CliError(f"need {H.k} <= k <= {H.n}, got k={k}")
    emit("n", H.n)
    emit("k", k)
    _oracles(H, k, cfg.tol)
    return 0


def cmd_demo_triangle(cfg: RunConfig) -> int:
    H = triangle_csp_hamiltonian()
    rho = triangle_state()
    emit("state_min_eigenvalue", float(np.linalg.eigvalsh(rho)[0]))
    mu = distribution_of_state(rho)
    emit("support_size", len(mu))
    cert = is_k_local_qq(mu, 2, cfg.tol)
    emit("two_local_qq", str(cert.valid).lower())
    emit("pair_min_eigenvalue", cert.min_eigenvalue)
    full = is_k_local_qq(mu, 3, cfg.tol)
    emit("three_local_qq", str(full.valid).lower())
    emit("full_min_eigenvalue", full.min_eigenvalue)
    emit("qq_energy", energy(H, mu).energy)
    emit("quantum_energy", quantum_ground_energy(H))
    res = exact_qq_solve(H, 2, cfg.tol)
    emit("exact_qq_energy", res.energy)
    emit("exact_qq_status", res.status)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quasiquantum", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--tol", type=float, default=1e-9, help="PSD tolerance")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("povm-check", help="check the SIC basis identities")
    common(sp)

    sp = sub.add_parser("verify", help="check a witness against a Hamiltonian and threshold")
    sp.add_argument("hamiltonian")
    sp.add_argument("witness", help="distribution file or xlow witness")
    sp.add_argument("-a", "--threshold", type=float, required=True, dest="a")
    sp.add_argument("-k", type=int, default=None, help="locality to certify (default: the Hamiltonian's)")
    common(sp)

    sp = sub.add_parser("reduce", help="run the reduction on a graph file")
    sp.add_argument("graph")
    sp.add_argument("--xi", type=float, default=0.1)
    sp.add_argument("--eps", type=float, default=1.0 / 40.0)
    sp.add_argument("--delta", type=float, default=None, help="default: lambda/10")
    sp.add_argument("--coloring", default=None, help="legal 3-coloring of the input, space separated")
    sp.add_argument("-o", "--out", default=None, help="output prefix")
    common(sp)

    sp = sub.add_parser("lambda", help="build and verify a lambda-solution")
    sp.add_argument("kind", choices=("cycle", "third-kind"))
    sp.add_argument("spec", help="cycle length, or for third-kind a graph file or star:<leaves>")
    sp.add_argument("--representation", choices=("auto", "explicit", "implicit"), default="auto")
    sp.add_argument("-o", "--out", default=None)
    common(sp)

    sp = sub.add_parser("optimize", help="random-support heuristic ground energy")
    sp.add_argument("hamiltonian")
    sp.add_argument("-k", type=int, default=None)
    sp.add_argument("--rounds", type=int, default=10)
    sp.add_argument("--delta-support", type=int, default=32)
    sp.add_argument("--no-oracle", action="store_true", help="skip the exact comparison")
    sp.add_argument("-o", "--out", default=None)
    common(sp)

    sp = sub.add_parser("oracle", help="exact energies for small Hamiltonians")
    sp.add_argument("hamiltonian")
    sp.add_argument("-k", type=int, default=None)
    common(sp)

    sp = sub.add_parser("demo-triangle", help="the three-qubit triangle example")
    common(sp)
    return p


def _config(args: argparse.Namespace) -> RunConfig:
    inputs = tuple(getattr(args, name) for name in ("hamiltonian", "witness", "graph") if hasattr(args, name))
    cfg = RunConfig(
        command=args.command,
        inputs=inputs,
        output=getattr(args, "out", None),
        tol=args.tol,
        seed=args.seed,
    )
    for name in ("xi", "eps", "delta", "a", "k", "rounds", "delta_support"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    cfg.validate()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = _config(args)
        if cfg.command == "povm-check":
            return cmd_povm_check(cfg)
        if cfg.command == "verify":
            return cmd_verify(cfg)
        if cfg.command == "reduce":
            return cmd_reduce(cfg, args.coloring)
        if cfg.command == "lambda":
            return cmd_lambda(cfg, args.kind, args.spec, args.representation)
        if cfg.command == "optimize":
            return cmd_optimize(cfg, not args.no_oracle)
        if cfg.command == "oracle":
            return cmd_oracle(cfg)
        return cmd_demo_triangle(cfg)
    except CliError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # the exit-code contract forbids tracebacks
        print(f"error {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
