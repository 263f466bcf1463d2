import numpy as np
import pytest

from errors import BoundsError, DependencyError, DimensionError, ParseError, SplitError, ValidationError
from graph.graph import FeatureScaler, Graph, SplitMasks, normalize_adjacency, propagate
from graph.io import load_flags, load_graph, load_splits, write_edges, write_features, write_flags
from models.models import StandardizeMode


@pytest.fixture
def write(tmp_path):
    def _write(name, content):
        path = tmp_path / name
        path.write_text(content, encoding="utf-8")
        return str(path)

    return _write


def random_graph(rng, num_nodes, density=0.2):
    upper = np.triu(rng.random((num_nodes, num_nodes)) < density, k=1)
    return Graph.from_edges(num_nodes, np.argwhere(upper), rng.standard_normal((num_nodes, 3)))


def test_load_graph_empty_edges(write):
    """Testa arquivo de arestas vazio com três nós isolados"""
    graph = load_graph(write("edges.txt", ""), write("x.csv", "1,2\n3,4\n5,6\n"))
    assert graph.num_nodes == 3
    assert graph.num_edges == 0


def test_load_graph_symmetrizes(write):
    """Testa a simetrização de uma aresta"""
    graph = load_graph(write("edges.txt", "0 1\n"), write("x.csv", "1.0\n2.0\n"))
    assert graph.num_edges == 1
    assert graph.adjacency[0, 1] == 1.0
    assert graph.adjacency[1, 0] == 1.0


def test_load_graph_deduplicates(write):
    """Testa arestas duplicadas e invertidas"""
    graph = load_graph(write("edges.txt", "0 1\n1 0\n0 1\n"), write("x.csv", "1\n2\n"))
    assert graph.num_edges == 1
    assert graph.adjacency.nnz == 2


def test_load_graph_out_of_range(write):
    """Testa aresta com índice fora do intervalo"""
    with pytest.raises(BoundsError):
        load_graph(write("edges.txt", "0 5\n"), write("x.csv", "1\n2\n"))


def test_load_graph_malformed_line(write):
    """Testa erro de parsing com número da linha"""
    with pytest.raises(ParseError) as exc:
        load_graph(write("edges.txt", "0 1\n1 x\n"), write("x.csv", "1\n2\n"))
    assert exc.value.line_number == 2


def test_load_graph_non_finite_feature(write):
    """Testa atributo não finito"""
    with pytest.raises(ValidationError):
        load_graph(write("edges.txt", ""), write("x.csv", "1\nnan\n"))


def test_load_graph_missing_file(tmp_path):
    """Testa arquivo ausente"""
    with pytest.raises(DependencyError):
        load_graph(str(tmp_path / "nope.txt"), str(tmp_path / "nope.csv"))


def test_normalize_isolated_node():
    graph = Graph.from_edges(1, [], np.ones((1, 1)))
    assert normalize_adjacency(graph).toarray().tolist() == [[1.0]]


def test_normalize_single_edge():
    graph = Graph.from_edges(2, [(0, 1)], np.ones((2, 1)))
    assert np.allclose(normalize_adjacency(graph).toarray(), 0.5, rtol=1e-15, atol=1e-15)


def test_normalize_triangle():
    graph = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)], np.ones((3, 1)))
    assert np.allclose(normalize_adjacency(graph).toarray(), 1.0 / 3.0, rtol=1e-15, atol=1e-15)


def test_normalize_ignores_input_self_loops():
    """Testa que laços de entrada não duplicam o auto-laço"""
    graph = Graph.from_edges(2, [(0, 0), (0, 1)], np.ones((2, 1)))
    assert np.allclose(normalize_adjacency(graph).toarray(), 0.5)


def test_normalize_symmetric_and_degree_formula():
    """Testa simetria exata e Â_ij = 1/√(d̃_i d̃_j) em grafos aleatórios"""
    rng = np.random.default_rng(7)
    for num_nodes in (5, 17, 50):
        graph = random_graph(rng, num_nodes)
        a_hat = normalize_adjacency(graph).toarray()
        assert np.max(np.abs(a_hat - a_hat.T)) == 0.0
        with_loops = graph.adjacency.toarray() + np.eye(num_nodes)
        degrees = with_loops.sum(axis=1)
        rows, cols = np.nonzero(with_loops)
        expected = 1.0 / np.sqrt(degrees[rows] * degrees[cols])
        assert np.allclose(a_hat[rows, cols], expected, rtol=1e-14)


def test_propagate_zero_hops():
    graph = Graph.from_edges(2, [(0, 1)], np.array([[2.0], [0.0]]))
    x = graph.features
    assert np.array_equal(propagate(normalize_adjacency(graph), x, 0), x)


def test_propagate_one_hop():
    graph = Graph.from_edges(2, [(0, 1)], np.array([[2.0], [0.0]]))
    assert np.allclose(propagate(normalize_adjacency(graph), graph.features, 1), [[1.0], [1.0]])


def test_propagate_isolated_node_unchanged():
    graph = Graph.from_edges(3, [(0, 1)], np.array([[2.0], [0.0], [7.5]]))
    result = propagate(normalize_adjacency(graph), graph.features, 4)
    assert result[2, 0] == 7.5


def test_propagate_composes():
    """Testa propagate(a+b) = propagate(a, propagate(b))"""
    rng = np.random.default_rng(3)
    graph = random_graph(rng, 30)
    a_hat = normalize_adjacency(graph)
    direct = propagate(a_hat, graph.features, 5)
    composed = propagate(a_hat, propagate(a_hat, graph.features, 2), 3)
    assert np.max(np.abs(direct - composed)) < 1e-10


def test_propagate_shape_mismatch():
    graph = Graph.from_edges(2, [(0, 1)], np.ones((2, 1)))
    with pytest.raises(DimensionError):
        propagate(normalize_adjacency(graph), np.ones((3, 1)), 1)


def test_graph_rejects_feature_row_mismatch():
    with pytest.raises(DimensionError):
        Graph.from_edges(3, [], np.ones((2, 1)))


def test_with_extra_nodes():
    """Testa o grafo aumentado com nós sintéticos"""
    graph = Graph.from_edges(2, [(0, 1)], np.ones((2, 2)))
    augmented = graph.with_extra_nodes(np.zeros((2, 2)), [(2, 0), (3, 1)])
    assert augmented.num_nodes == 4
    assert augmented.num_edges == 3
    assert augmented.edge_list().tolist() == [[0, 1], [0, 2], [1, 3]]
    assert np.array_equal(augmented.features[2:], np.zeros((2, 2)))


def test_split_masks_reject_overlap():
    with pytest.raises(SplitError):
        SplitMasks(
            known_id=np.array([0, 1]),
            wild=np.array([1, 2]),
            val_in=np.array([1]),
            val_out=np.array([2]),
            test_in=np.array([], dtype=int),
            test_out=np.array([], dtype=int),
        )


def test_split_masks_must_cover_wild():
    with pytest.raises(SplitError):
        SplitMasks(
            known_id=np.array([0]),
            wild=np.array([1, 2, 3]),
            val_in=np.array([1]),
            val_out=np.array([2]),
            test_in=np.array([], dtype=int),
            test_out=np.array([], dtype=int),
        )


def test_feature_scaler_modes():
    known = np.array([[1.0, 5.0], [3.0, 5.0]])
    scaled = FeatureScaler(StandardizeMode.SCALE).fit(known).transform(known)
    assert np.allclose(scaled, [[1.0, 5.0], [3.0, 5.0]])
    zscored = FeatureScaler(StandardizeMode.ZSCORE).fit(known).transform(known)
    assert np.allclose(zscored, [[-1.0, 0.0], [1.0, 0.0]])
    untouched = FeatureScaler(StandardizeMode.NONE).fit(known).transform(known)
    assert np.array_equal(untouched, known)


def test_feature_scaler_requires_fit():
    with pytest.raises(ValidationError):
        FeatureScaler().transform(np.ones((1, 1)))


def test_writers_reload(tmp_path):
    """Testa que edges/features/flags escritos são relidos sem perda"""
    features = np.array([[0.1, -2.5], [1e-17, 3.0], [7.0, 0.3333333333333333]])
    write_features(str(tmp_path / "x.csv"), features)
    write_edges(str(tmp_path / "e.txt"), np.array([[0, 2]]))
    write_flags(str(tmp_path / "f.txt"), np.array([False, True, False]))
    graph = load_graph(str(tmp_path / "e.txt"), str(tmp_path / "x.csv"))
    assert np.array_equal(graph.features, features)
    assert graph.edge_list().tolist() == [[0, 2]]
    assert load_flags(str(tmp_path / "f.txt")).tolist() == [False, True, False]


def test_load_splits_rejects_unknown_label(write):
    with pytest.raises(ParseError):
        load_splits(write("s.txt", "known\ntrain\n"))
