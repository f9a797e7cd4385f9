import numpy as np
import pytest

from tilq import InvalidInputError, TimeGrid


def test_uniform_nodes():
    g = TimeGrid.uniform(2.0, 8)
    assert g.num_intervals == 8
    assert g.nodes.size == 9
    np.testing.assert_allclose(g.nodes, np.linspace(0.0, 2.0, 9))
    np.testing.assert_allclose(g.h, 0.25)
    assert g.T == 2.0


def test_refine():
    g = TimeGrid.uniform(1.0, 10)
    r = g.refine(4)
    assert r.num_intervals == 40
    # refined grid contains the original nodes
    assert np.all(np.isin(np.round(g.nodes, 12), np.round(r.nodes, 12)))


def test_index_of():
    g = TimeGrid.uniform(1.0, 10)
    assert g.index_of(0.0) == 0
    assert g.index_of(0.3) == 3
    assert g.index_of(1.0) == 10
    with pytest.raises(InvalidInputError):
        g.index_of(0.35)


def test_bad_construction():
    with pytest.raises(InvalidInputError):
        TimeGrid.uniform(0.0, 10)
    with pytest.raises(InvalidInputError):
        TimeGrid.uniform(1.0, 0)


def test_nodes_read_only():
    g = TimeGrid.uniform(1.0, 4)
    with pytest.raises(ValueError):
        g.nodes[0] = 5.0
