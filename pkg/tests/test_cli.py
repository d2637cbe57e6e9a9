import pytest

from quasiquantum.cli import RunConfig, CliError, main
from quasiquantum.graphs import Graph, complete_graph, cycle_graph, graph_to_text
from quasiquantum.hamiltonians import coloring_hamiltonian, hamiltonian_to_text, triangle_csp_hamiltonian, triangle_state
from quasiquantum.qq_state import distribution_of_state


def report(text):
    out = {}
    for line in text.splitlines():
        key, _, value = line.partition(" ")
        out[key] = value
    return out


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, report(captured.out), captured.err


@pytest.fixture
def triangle_files(tmp_path):
    h = tmp_path / "tri.ham"
    h.write_text(hamiltonian_to_text(triangle_csp_hamiltonian()))
    mu = tmp_path / "tri.mu"
    mu.write_text(distribution_of_state(triangle_state()).to_text())
    return h, mu


def test_povm_check(capsys):
    code, rep, _ = run(capsys, "povm-check")
    assert code == 0
    assert any(k.startswith("residual") for k in rep)
    assert rep["D0_spectrum"].split() == ["-1.0", "2.0"]
    assert float(rep["max_residual"]) <= 1e-12


def test_verify_accept_and_reject(capsys, triangle_files):
    h, mu = triangle_files
    code, rep, _ = run(capsys, "verify", h, mu, "-a", 0)
    assert code == 0 and rep["accepted"] == "true"
    code, rep, _ = run(capsys, "verify", h, mu, "-a", -0.5)
    assert code == 1 and rep["reason"] == "energy"
    code, rep, _ = run(capsys, "verify", h, mu, "-a", 0, "-k", 3)
    assert code == 1 and rep["reason"] == "not-qq"


def test_verify_errors(capsys, triangle_files, tmp_path):
    h, mu = triangle_files
    lines = mu.read_text().splitlines()
    for i, line in enumerate(lines):
        parts = line.split()
        if len(parts) == 2 and not line.startswith("n "):
            lines[i] = f"{parts[0]} {float(parts[1]) + 0.25!r}"
            break
    bad = tmp_path / "bad.mu"
    bad.write_text("\n".join(lines) + "\n")
    assert run(capsys, "verify", h, bad, "-a", 0)[0] == 2
    code, _, err = run(capsys, "verify", h, tmp_path / "missing.mu", "-a", 0)
    assert code == 2 and "cannot read" in err
    assert run(capsys, "verify", h, mu)[0] == 2


def test_reduce_c5_witness(capsys, tmp_path):
    g = tmp_path / "c5.graph"
    g.write_text(graph_to_text(cycle_graph(5)))
    prefix = tmp_path / "c5"
    code, rep, _ = run(capsys, "reduce", g, "-o", prefix)
    assert code == 0
    for ext in ("ham", "dec", "part1", "part2", "part3", "witness"):
        assert (tmp_path / f"c5.{ext}").exists()
    a = float(rep["completeness_energy"])
    assert float(rep["witness_energy"]) == pytest.approx(a, abs=1e-8)
    assert float(rep["soundness_energy"]) > a
    # the witness clears the energy threshold; its PSD status is reported separately
    code, vrep, _ = run(capsys, "verify", f"{prefix}.ham", f"{prefix}.witness", "-a", a, "-k", 3)
    assert float(vrep["energy"]) == pytest.approx(a, abs=1e-8)
    assert code in (0, 1) and vrep["reason"] in ("none", "not-qq")


def test_reduce_k4_reports(capsys, tmp_path):
    g = tmp_path / "k4.graph"
    g.write_text(graph_to_text(complete_graph(4)))
    code, rep, _ = run(capsys, "reduce", g, "-o", tmp_path / "k4")
    assert code == 0
    assert rep["input_3_colorable"] == "false"
    assert "witness" not in rep


def test_reduce_errors(capsys, tmp_path):
    g = tmp_path / "junk.graph"
    g.write_text("not a graph\n")
    assert run(capsys, "reduce", g)[0] == 2
    ok = tmp_path / "c5.graph"
    ok.write_text(graph_to_text(cycle_graph(5)))
    assert run(capsys, "reduce", ok, "--xi", 2)[0] == 2
    assert run(capsys, "reduce", ok, "--coloring", "0 0 1 2 1")[0] == 2


@pytest.mark.parametrize("n,tau", [(5, 0.2), (4, 0.25)])
def test_lambda_cycles(capsys, n, tau):
    code, rep, _ = run(capsys, "lambda", "cycle", n)
    assert code == 0 and rep["passed"] == "true"
    assert float(rep["worst_tau"]) == pytest.approx(tau, abs=1e-12)


def test_lambda_third_kind(capsys, tmp_path):
    code, rep, _ = run(capsys, "lambda", "third-kind", "star:3")
    assert code == 0 and rep["passed"] == "true"
    assert float(rep["tau_max"]) <= 0.327
    star = tmp_path / "star.graph"
    star.write_text(graph_to_text(Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])))
    code, rep2, _ = run(capsys, "lambda", "third-kind", star)
    assert code == 0 and rep2["tau_max"] == rep["tau_max"]
    assert run(capsys, "lambda", "cycle", 2)[0] == 2
    assert run(capsys, "lambda", "third-kind", "star:9")[0] == 2


def test_optimize_triangle_and_edge(capsys, triangle_files, tmp_path):
    h, _ = triangle_files
    code, rep, _ = run(capsys, "optimize", h, "--rounds", 3, "--delta-support", 16, "-o", tmp_path / "best.mu")
    assert code == 0 and float(rep["energy"].split()[0]) <= 1e-6
    assert (tmp_path / "best.mu").exists()
    edge = tmp_path / "edge.ham"
    edge.write_text(hamiltonian_to_text(coloring_hamiltonian(Graph.from_edges(2, [(0, 1)]))))
    code, rep, _ = run(capsys, "optimize", edge)
    assert code == 0 and float(rep["energy"].split()[0]) <= 1e-6
    assert float(rep["quantum_energy"]) == pytest.approx(0, abs=1e-12)


def test_optimize_guard_breach(capsys, tmp_path):
    h = tmp_path / "c8.ham"
    h.write_text(hamiltonian_to_text(coloring_hamiltonian(cycle_graph(8))))
    code, rep, _ = run(capsys, "optimize", h, "--rounds", 1, "--delta-support", 4)
    assert code == 0
    assert rep["exact_qq_energy"] == "skipped"


def test_oracle_and_demo(capsys, triangle_files):
    h, _ = triangle_files
    code, rep, _ = run(capsys, "oracle", h)
    assert code == 0
    assert float(rep["quantum_energy"]) == pytest.approx(1, abs=1e-12)
    assert float(rep["exact_qq_energy"]) == pytest.approx(0, abs=1e-6)
    code, rep, _ = run(capsys, "demo-triangle")
    assert code == 0 and rep["two_local_qq"] == "true" and rep["three_local_qq"] == "false"


def test_bad_arguments_exit_2(capsys):
    assert run(capsys, "no-such-command")[0] == 2
    assert run(capsys)[0] == 2
    assert run(capsys, "lambda", "cycle", 5, "--seed", -1)[0] == 2


def test_run_config_validation():
    RunConfig("verify", a=0.0).validate()
    for bad in (dict(xi=0.0), dict(tol=0.0), dict(k=0), dict(rounds=0), dict(a=float("nan"))):
        with pytest.raises(CliError):
            RunConfig("x", **bad).validate()


def test_outputs_are_byte_identical(capsys, tmp_path):
    g = tmp_path / "c5.graph"
    g.write_text(graph_to_text(cycle_graph(5)))
    h = tmp_path / "c4.ham"
    h.write_text(hamiltonian_to_text(coloring_hamiltonian(cycle_graph(4))))
    outputs = []
    for run_id in ("a", "b"):
        d = tmp_path / run_id
        d.mkdir()
        run(capsys, "reduce", g, "--seed", 7, "-o", d / "c5")
        _, rep, _ = run(capsys, "optimize", h, "--seed", 3, "--rounds", 2, "--delta-support", 8,
                        "--no-oracle", "-o", d / "best.mu")
        outputs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())} | {"energy": rep["energy"]})
    assert outputs[0] == outputs[1]
