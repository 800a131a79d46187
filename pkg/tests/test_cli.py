import json
import math

import pytest
from click.testing import CliRunner

from cli import cli
from src.documents import family_document, kernel_document


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def kernels(write_json, uniform_k2, third_k2):
    return write_json("uniform.json", kernel_document(uniform_k2)), write_json("third.json", kernel_document(third_k2))


@pytest.fixture
def family_file(write_json, k2_family):
    return write_json("family.json", family_document(k2_family))


def probability(envelope, source, target):
    for edge in envelope["result"]["kernel"]["edges"]:
        if (edge["from"], edge["to"]) == (source, target):
            return edge["p"]
    raise KeyError((source, target))


def test_m_geodesic_midpoint(runner, kernels):
    result = runner.invoke(cli, ["geodesic", *kernels, "--kind", "m", "--t", "0.5"])
    assert result.exit_code == 0, result.output
    envelope = json.loads(result.output)
    assert envelope["subcommand"] == "geodesic"
    assert set(envelope["inputs"]) == {"w0", "w1"}
    assert envelope["inputs"]["w0"].startswith("sha256:")
    assert probability(envelope, "0", "1") == pytest.approx(5.0 / 12.0, abs=1e-14)


def test_e_geodesic_midpoint(runner, kernels):
    result = runner.invoke(cli, ["geodesic", *kernels, "--kind", "e", "--t", "0.5"])
    assert result.exit_code == 0, result.output
    assert probability(json.loads(result.output), "0", "1") == pytest.approx(0.414214, abs=1e-6)


def test_self_divergence_is_zero(runner, kernels):
    result = runner.invoke(cli, ["divergence", kernels[1], kernels[1]])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["result"] == {"form": "direct", "value": 0}


def test_divergence_with_family(runner, write_json, k2_family, family_file):
    from src.exp_family import kernel_at

    w1 = write_json("w1.json", kernel_document(kernel_at(k2_family, [0.3]).kernel))
    w2 = write_json("w2.json", kernel_document(kernel_at(k2_family, [-0.7]).kernel))
    result = runner.invoke(cli, ["divergence", w1, w2, "--family", family_file, "--form", "bregman"])
    assert result.exit_code == 0, result.output
    envelope = json.loads(result.output)
    assert envelope["result"]["form"] == "bregman"
    assert envelope["diagnostics"]["residual"] <= 1e-9


def test_output_is_byte_identical(runner, kernels):
    args = ["divergence", *kernels]
    assert runner.invoke(cli, args).output == runner.invoke(cli, args).output
    assert json.loads(runner.invoke(cli, args).output)["result"]["value"] == pytest.approx(
        0.5 * math.log(9.0 / 8.0), abs=1e-12
    )


def test_timing_is_opt_in(runner, kernels):
    plain = json.loads(runner.invoke(cli, ["divergence", *kernels]).output)
    timed = json.loads(runner.invoke(cli, ["divergence", *kernels, "--timing"]).output)
    assert "wall_clock_seconds" not in plain
    assert timed["wall_clock_seconds"] >= 0.0


def test_domain_error_envelope(runner, write_json, k2):
    edges = [{"from": a, "to": b, "v": 1.0} for a, b in k2.edge_labels()]
    edges[1]["v"] = -1.0
    path = write_json("f.json", {"states": list(k2.states), "edges": edges})
    result = runner.invoke(cli, ["normalize", path])
    assert result.exit_code == 1
    assert json.loads(result.output)["error"]["code"] == "not_positive"


def test_invalid_document(runner, write_json):
    path = write_json("bad.json", {"states": ["0", "1"], "edges": [], "extra": 1})
    result = runner.invoke(cli, ["stationary", path])
    assert result.exit_code == 1
    assert json.loads(result.output)["error"]["code"] == "invalid_document"


def test_usage_errors(runner, kernels, tmp_path):
    assert runner.invoke(cli, ["geodesic", *kernels, "--kind", "x", "--t", "0.5"]).exit_code == 2
    assert runner.invoke(cli, ["stationary", str(tmp_path / "missing.json")]).exit_code == 2
    assert runner.invoke(cli, ["no-such-command"]).exit_code == 2


def test_coords_needs_exactly_one_side(runner, family_file):
    assert runner.invoke(cli, ["coords", family_file]).exit_code == 2
    assert runner.invoke(cli, ["coords", family_file, "--theta", "0", "--eta", "0.25"]).exit_code == 2


def test_coords_eta_to_theta(runner, family_file):
    result = runner.invoke(cli, ["coords", family_file, "--eta", "0.3333333333333333"])
    assert result.exit_code == 0, result.output
    envelope = json.loads(result.output)
    assert envelope["result"]["theta"][0] == pytest.approx(2.0 * math.log(2.0), abs=1e-9)
    assert envelope["diagnostics"]["iterations"] >= 1


def test_eval_family(runner, family_file):
    result = runner.invoke(cli, ["eval-family", family_file, "--theta", "1"])
    assert result.exit_code == 0, result.output
    envelope = json.loads(result.output)
    assert envelope["result"]["psi"] == pytest.approx(math.log(1.0 + math.exp(0.5)), abs=1e-13)
    assert envelope["diagnostics"] == {"dimension": 1, "effective_dimension": 1}


def test_fisher(runner, family_file):
    result = runner.invoke(cli, ["fisher", family_file, "--theta", "0"])
    assert result.exit_code == 0, result.output
    envelope = json.loads(result.output)
    assert envelope["result"]["direct"][0][0] == pytest.approx(1.0 / 16.0, abs=1e-7)
    assert envelope["result"]["discrepancy"] <= 1e-6


def test_stationary_and_edge_measure(runner, kernels):
    stationary = json.loads(runner.invoke(cli, ["stationary", kernels[1]]).output)
    assert stationary["result"]["p"] == pytest.approx([0.5, 0.5], abs=1e-15)
    measure = json.loads(runner.invoke(cli, ["edge-measure", kernels[1]]).output)
    probs = [edge["p"] for edge in measure["result"]["edges"]]
    assert probs == pytest.approx([1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0], abs=1e-15)


def test_decompose(runner, write_json, k2):
    edges = [{"from": a, "to": b, "v": 1.0 if (a, b) == ("0", "1") else 0.0} for a, b in k2.edge_labels()]
    result = runner.invoke(cli, ["decompose", write_json("f.json", {"states": list(k2.states), "edges": edges})])
    assert result.exit_code == 0, result.output
    envelope = json.loads(result.output)
    anti = [edge["v"] for edge in envelope["result"]["anti_part"]["edges"]]
    assert anti == pytest.approx([0.0, 0.5, -0.5, 0.0], abs=1e-15)
    assert envelope["result"]["dimensions"] == {"dim_fa": 1, "dim_fs": 3}


def test_kl_joint_defaults_to_uniform(runner, kernels):
    result = runner.invoke(cli, ["kl-joint", *kernels, "--n", "1"])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["result"]["value"] == 0


def test_fit_from_trajectory(runner, family_file, tmp_path):
    path = tmp_path / "path.txt"
    path.write_text("0\n1\n0\n1\n1\n0\n0\n", encoding="utf-8")
    result = runner.invoke(cli, ["fit", family_file, "--trajectory", str(path)])
    assert result.exit_code == 0, result.output
    envelope = json.loads(result.output)
    assert envelope["diagnostics"]["length"] == 7
    assert set(envelope["inputs"]) == {"family", "trajectory"}
    # four of the six transitions leave their state: eta = 2/6
    assert envelope["result"]["eta"][0] == pytest.approx(1.0 / 3.0, abs=1e-9)


def test_fit_needs_one_target(runner, family_file):
    assert runner.invoke(cli, ["fit", family_file]).exit_code == 2


def test_csv_to_file(runner, kernels, tmp_path):
    out = tmp_path / "out.csv"
    result = runner.invoke(cli, ["divergence", *kernels, "--format", "csv", "--output", str(out)])
    assert result.exit_code == 0, result.output
    assert result.output == ""
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "path,value"
    assert "result.form,direct" in lines


def test_verify_subset(runner):
    args = ["verify", "--seed", "1", "--sizes", "2,3", "--suite", "stationary", "--suite", "dimensions"]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0, result.output
    envelope = json.loads(result.output)
    assert envelope["result"]["passed"] is True
    assert [s["name"] for s in envelope["result"]["suites"]] == ["stationary", "dimensions"]
    assert envelope["diagnostics"]["failures"] == 0
    assert runner.invoke(cli, args).output == result.output


def test_verify_rejects_small_sizes(runner):
    result = runner.invoke(cli, ["verify", "--sizes", "1"])
    assert result.exit_code == 1
    assert json.loads(result.output)["error"]["code"] == "invalid_input"


def test_log_level_is_validated(runner, kernels):
    rejected = runner.invoke(cli, ["--log-level", "loud", "stationary", kernels[1]])
    assert rejected.exit_code == 2
    assert "loud" in rejected.output
    assert runner.invoke(cli, ["--log-level", "debug", "stationary", kernels[1]]).exit_code == 0


def graph_file(write_json, graph):
    edges = [{"from": a, "to": b} for a, b in graph.edge_labels()]
    return write_json("graph.json", {"states": list(graph.states), "edges": edges})


@pytest.mark.parametrize("kind", ["full", "indicator"])
def test_family_feeds_eval_family(runner, write_json, tmp_path, k2, kind):
    out = tmp_path / f"{kind}.json"
    result = runner.invoke(cli, ["family", graph_file(write_json, k2), "--kind", kind])
    assert result.exit_code == 0, result.output
    envelope = json.loads(result.output)
    assert envelope["diagnostics"] == {"dimension": 2, "effective_dimension": 2}
    assert set(envelope["inputs"]) == {"graph"}

    out.write_text(json.dumps(envelope["result"]), encoding="utf-8")
    evaluated = runner.invoke(cli, ["eval-family", str(out), "--theta", "0,0"])
    assert evaluated.exit_code == 0, evaluated.output
    # carrier 0 at theta = 0 is the uniform kernel with Perron root 2
    assert json.loads(evaluated.output)["result"]["psi"] == pytest.approx(math.log(2.0), abs=1e-13)


def test_indicator_family_needs_complete_graph(runner, write_json):
    from src.kernel_graph import KernelGraph

    cycle = KernelGraph(("0", "1", "2"), ((0, 1), (1, 2), (2, 0), (0, 2)))
    result = runner.invoke(cli, ["family", graph_file(write_json, cycle), "--kind", "indicator"])
    assert result.exit_code == 1
    assert json.loads(result.output)["error"]["code"] == "invalid_input"
