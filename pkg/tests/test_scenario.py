import numpy as np
import pytest
import yaml

from lagrange_swarm.scenario import (ScenarioError, bundled_path, default_scenario, dump_scenario,
                                     format_agent_table, load_scenario, parse_agent_table,
                                     read_trace_csv, scenario_from_dict, scenario_to_dict,
                                     trace_columns, with_overrides, write_edge_files, write_trace_csv)
from lagrange_swarm.graph import parse_edge_list
from lagrange_swarm.simulation import run


def test_bundled_scenario_contents(demo_sc):
    assert demo_sc.n == 5 and demo_sc.dof == 2
    g = demo_sc.gains
    assert (g.mu, g.eta, g.beta, g.epsilon) == (1.5, 16.0, 25.0, 0.0)
    assert (demo_sc.omega1, demo_sc.omega2) == (1.0, 5.0)
    assert demo_sc.blackout == (10.0, 20.0)
    assert demo_sc.paired and len(demo_sc.gA.topologies) == 3
    assert demo_sc.gA.switch_times()[:3] == [1.0, 2.0, 3.0]
    for sig in (demo_sc.gA, demo_sc.gB):
        for top in sig.topologies:
            assert set(w for _, _, w in top.edges()) == {5.0}


def test_agent_table_round_trip():
    recs = parse_agent_table(bundled_path("agents.csv").read_text())
    assert len(recs) == 5
    again = parse_agent_table(format_agent_table(recs))
    assert again == recs


def test_agent_table_errors():
    with pytest.raises(ScenarioError):
        parse_agent_table("")
    with pytest.raises(ScenarioError, match="lacks columns"):
        parse_agent_table("agent,m1\n1,2\n")
    good = format_agent_table(parse_agent_table(bundled_path("agents.csv").read_text()))
    bad = good.replace(good.splitlines()[1].split(",")[1], "heavy", 1)
    with pytest.raises(ScenarioError, match="bad number"):
        parse_agent_table(bad)


def test_yaml_round_trip(tmp_path, demo_sc):
    path = tmp_path / "sc.yaml"
    dump_scenario(demo_sc, path)
    back = load_scenario(path)
    assert scenario_to_dict(back) == scenario_to_dict(demo_sc)
    a = run(demo_sc.with_(t_end=0.05)).terminal_state()
    b = run(back.with_(t_end=0.05)).terminal_state()
    np.testing.assert_array_equal(a, b)


def test_edge_files_are_readable(tmp_path, demo_sc):
    paths = write_edge_files(demo_sc, tmp_path)
    assert len(paths) == 6
    assert parse_edge_list(paths[0].read_text()) == demo_sc.gA.topologies[0]


def test_overrides(demo_sc):
    sc = with_overrides(demo_sc, dt=5e-4, epsilon=0.1, beta=30.0)
    assert sc.dt == 5e-4 and sc.gains.epsilon == 0.1 and sc.gains.beta == 30.0
    assert sc.gains.mu == demo_sc.gains.mu
    with pytest.raises(ValueError):
        with_overrides(demo_sc, eta=0.5)
    assert default_scenario(t_end=3.0).t_end == 3.0


def _doc():
    return yaml.safe_load(bundled_path().read_text())


def test_document_variants():
    doc = _doc()
    doc["leader"] = {"type": "constant", "position": [0.1, 0.2]}
    doc["graphs"]["A"]["schedule"] = [[0.0, 0], [2.0, 1]]
    doc["blackout"] = None
    sc = scenario_from_dict(doc, bundled_path().parent)
    assert sc.blackout is None
    assert sc.gA.switch_times() == [2.0]
    np.testing.assert_array_equal(sc.leader.position(3.0), [0.1, 0.2])


@pytest.mark.parametrize("mutate, match", [
    (lambda d: d.pop("gains"), "gains"),
    (lambda d: d.update(extra=1), "unknown sections"),
    (lambda d: d["leader"].update(type="spiral"), "leader"),
    (lambda d: d["gains"].update(eta=0.5), "eta"),
    (lambda d: d["graphs"]["A"].update(topologies=["missing.txt"]), "cannot read"),
    (lambda d: d["graphs"]["A"].update(topologies=[]), "nonempty"),
    (lambda d: d["graphs"]["A"].update(schedule=7), "schedule"),
    (lambda d: d["integration"].update(dt="fast"), "integration"),
    (lambda d: d["blackout"].update(end=5.0), "blackout"),
])
def test_document_errors(mutate, match):
    doc = _doc()
    mutate(doc)
    with pytest.raises(ScenarioError, match=match):
        scenario_from_dict(doc, bundled_path().parent)


def test_load_errors(tmp_path):
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(tmp_path / "nope.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("agents: [unclosed\n")
    with pytest.raises(ScenarioError, match="invalid YAML"):
        load_scenario(bad)


def test_trace_csv_round_trip(tmp_path, demo_sc):
    tr = run(demo_sc.with_(t_end=0.2))
    path = tmp_path / "trace.csv"
    write_trace_csv(tr, path)
    back = read_trace_csv(path)
    for name in ("times", "q", "qdot", "r_hat", "v_hat", "tau", "q0", "qdot0", "V", "topo_A", "topo_B"):
        np.testing.assert_array_equal(getattr(back, name), getattr(tr, name))
    header = path.read_text().splitlines()[0].split(",")
    assert header == trace_columns(5, 2)
    assert "q_1^(1)" in header and "err_pos_5" in header


def test_trace_csv_rejects_foreign_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("t,a,b\n0,1,2\n")
    with pytest.raises(ValueError):
        read_trace_csv(p)
