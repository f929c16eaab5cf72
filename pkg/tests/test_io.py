import numpy as np
import pytest

from peerfx.data import Dataset, GroupData
from peerfx.dgp import ErrorCoupling, simulate_dataset
from peerfx.errors import ConfigError, DataError
from peerfx.graph import build_graph
from peerfx.io import load_config, load_dataset, write_dataset


def write(path, text):
    path.write_text(text)
    return path


@pytest.fixture
def files(tmp_path):
    edges = write(tmp_path / "edges.csv", "group_id,i,j\nA,0,1\nA,1,2\n")
    nodes = write(tmp_path / "nodes.csv", "group_id,node_id,x,y\nA,0,1.0,2.0\nA,1,0.5,1.0\nA,2,-1,0\n")
    return edges, nodes


def test_load_path_graph(files):
    ds = load_dataset(*files)
    assert ds.G == 1 and ds.n == 3
    assert ds.groups[0].graph == build_graph(3, [(0, 1), (1, 2)])
    np.testing.assert_array_equal(ds.groups[0].x, [1.0, 0.5, -1.0])
    np.testing.assert_array_equal(ds.groups[0].y, [2.0, 1.0, 0.0])


def test_two_groups_and_isolated_nodes(tmp_path):
    edges = write(tmp_path / "e.csv", "group_id,i,j\nb,0,1\na,0,2\n")
    nodes = write(
        tmp_path / "n.csv",
        "group_id,node_id,x,y\nb,1,1,1\nb,0,2,2\na,0,1,1\na,1,1,1\na,2,1,1\na,3,0,0\n",
    )
    ds = load_dataset(edges, nodes)
    assert ds.G == 2 and ds.n == 6
    assert [d.group_id for d in ds.groups] == ["a", "b"]
    assert ds.groups[0].graph.degrees.tolist() == [1, 0, 1, 0]
    np.testing.assert_array_equal(ds.groups[1].x, [2, 1])


def test_dangling_edge_names_line(tmp_path, files):
    _, nodes = files
    edges = write(tmp_path / "bad.csv", "group_id,i,j\nA,0,1\nA,1,5\n")
    with pytest.raises(DataError, match=r"bad\.csv:3: .*endpoint 5"):
        load_dataset(edges, nodes)


def test_unknown_group_in_edges(tmp_path, files):
    _, nodes = files
    edges = write(tmp_path / "bad.csv", "group_id,i,j\nB,0,1\n")
    with pytest.raises(DataError, match=r":2: group 'B'"):
        load_dataset(edges, nodes)


def test_duplicate_node_record(tmp_path, files):
    edges, _ = files
    nodes = write(tmp_path / "n.csv", "group_id,node_id,x\nA,0,1\nA,1,1\nA,1,2\n")
    with pytest.raises(DataError, match=r"n\.csv:4: duplicate record .*line 3"):
        load_dataset(edges, nodes)


@pytest.mark.parametrize(
    "body, pattern",
    [
        ("A,0,abc,1\n", "x must be numeric"),
        ("A,0,nan,1\n", "x must be finite"),
        ("A,zero,1,1\n", "node_id must be an integer"),
        ("A,0,1\n", "expected 4 fields"),
        ("A,3,1,1\n", "outside 0..0"),
    ],
)
def test_bad_node_fields(tmp_path, body, pattern):
    edges = write(tmp_path / "e.csv", "group_id,i,j\n")
    nodes = write(tmp_path / "n.csv", "group_id,node_id,x,y\n" + body)
    with pytest.raises(DataError, match=pattern):
        load_dataset(edges, nodes)


def test_self_loop_line(tmp_path, files):
    _, nodes = files
    edges = write(tmp_path / "e.csv", "group_id,i,j\nA,1,1\n")
    with pytest.raises(DataError, match=r"e\.csv:2: self-loop"):
        load_dataset(edges, nodes)


def test_missing_header(tmp_path, files):
    _, nodes = files
    edges = write(tmp_path / "e.csv", "0,1\n")
    with pytest.raises(DataError, match="header"):
        load_dataset(edges, nodes)


def test_y_optional(tmp_path):
    edges = write(tmp_path / "e.csv", "group_id,i,j\nA,0,1\n")
    nodes = write(tmp_path / "n.csv", "group_id,node_id,x\nA,0,1\nA,1,2\n")
    ds = load_dataset(edges, nodes)
    assert ds.groups[0].y is None and not ds.has_outcomes


def test_round_trip(tmp_path):
    ds = simulate_dataset(7, 12, ec=ErrorCoupling("exp3"), seed=3)
    write_dataset(ds, tmp_path / "e.csv", tmp_path / "n.csv")
    back = load_dataset(tmp_path / "e.csv", tmp_path / "n.csv")
    assert back.groups == ds.groups


def test_round_trip_without_outcomes(tmp_path):
    rng = np.random.default_rng(1)
    ds = Dataset((GroupData(build_graph(4, [(0, 3)]), rng.normal(size=4) * 1e-7, None, "z"),))
    write_dataset(ds, tmp_path / "e.csv", tmp_path / "n.csv")
    assert load_dataset(tmp_path / "e.csv", tmp_path / "n.csv").groups == ds.groups


def test_config(tmp_path):
    path = write(
        tmp_path / "run.toml",
        """
G = 20
n_g = 10
R = 7
seed = 3
phi = ["zero", "exp3"]

[params]
delta = 0.3

[[estimators]]
name = "TSLS-E"
mode = "E"
max_step = 3

[hausman]
enabled = false
""",
    )
    cfgs = load_config(path)
    assert [c.phi for c in cfgs] == ["zero", "exp3"]
    c = cfgs[0]
    assert (c.G, c.n_g, c.R, c.seed, c.params.delta, c.params.beta) == (20, 10, 7, 3, 0.3, 1.0)
    assert c.estimators[0][1].max_step == 3 and not c.hausman


@pytest.mark.parametrize(
    "text, key",
    [
        ("reps = 5\n", "reps"),
        ("[params]\nrho = 0.1\n", "rho"),
        ("[[estimators]]\nmode = 'E'\nsteps = 2\n", "steps"),
    ],
)
def test_config_unknown_key(tmp_path, text, key):
    with pytest.raises(ConfigError, match=f"unknown key '{key}'"):
        load_config(write(tmp_path / "c.toml", text))


def test_config_syntax_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path / "c.toml", "G = \n"))
