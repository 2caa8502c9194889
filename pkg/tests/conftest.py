import numpy as np
import pytest

from convexkit.convexity import (
    discrete_convexity,
    euclidean_convexity,
    tree_hspace_convexity,
)
from convexkit.core import EuclideanBox, MetricTree


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def unit_interval():
    return EuclideanBox(1, [[0.0, 1.0]])


@pytest.fixture
def unit_square():
    return EuclideanBox(2, [[0.0, 1.0], [0.0, 1.0]])


@pytest.fixture
def path_tree():
    # a --2.0-- b --1.5-- c, plus leaf d hanging off b
    return MetricTree(
        ["a", "b", "c", "d"],
        [("a", "b", 2.0), ("b", "c", 1.5), ("b", "d", 1.0)],
    )


@pytest.fixture
def star_tree():
    return MetricTree(
        ["c", "l1", "l2", "l3"],
        [("c", "l1", 1.0), ("c", "l2", 1.0), ("c", "l3", 1.0)],
    )


@pytest.fixture
def euclid_1d():
    return euclidean_convexity(1, [[0.0, 1.0]])


@pytest.fixture
def euclid_2d():
    return euclidean_convexity(2, [[0.0, 1.0], [0.0, 1.0]])


@pytest.fixture
def two_point_discrete():
    return discrete_convexity(["y0", "y1"], {"y0": [0.0], "y1": [1.0]})


@pytest.fixture
def tree_structure(path_tree):
    return tree_hspace_convexity(path_tree)
