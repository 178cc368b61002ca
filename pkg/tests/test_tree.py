import numpy as np
import pytest

from stacknash.errors import ConfigError, ResourceLimitError
from stacknash.tree import (
    AdaptedProcess,
    build_tree,
    check_adapted,
    conditional_expectation,
    expectation,
)


def test_counts_and_increments():
    t1 = build_tree(1, 1.0)
    assert t1.n_nodes(1) == 2
    assert set(t1.increments(0)) == {1.0, -1.0}

    t2 = build_tree(2, 1.0)
    assert t2.n_nodes(2) == 4
    assert np.allclose(sorted(set(t2.increments(1))), [-np.sqrt(0.5), np.sqrt(0.5)])

    t8 = build_tree(8, 1.0)
    assert t8.n_nodes(8) == 256
    assert sum(t8.n_nodes(k) for k in range(9)) == 511


def test_budget_and_validation():
    with pytest.raises(ResourceLimitError):
        build_tree(25, 1.0)
    with pytest.raises(ConfigError):
        build_tree(0, 1.0)
    with pytest.raises(ConfigError):
        build_tree(3, 0.0)


def test_expectation_of_brownian():
    tree = build_tree(6, 2.0)
    WT = tree.brownian(6)
    assert expectation(tree, WT) == 0.0
    assert np.isclose(expectation(tree, WT**2), 2.0, atol=1e-14)
    const = np.full(tree.n_nodes(3), 4.2)
    assert expectation(tree, const) == 4.2


def test_conditional_expectations():
    tree = build_tree(4, 1.0)
    k = 2
    dw = tree.increments(k)
    assert np.all(conditional_expectation(tree, dw) == 0.0)
    assert np.isclose(conditional_expectation(tree, dw**2, node=1), tree.dt, atol=1e-15)
    const = np.full(tree.n_nodes(k + 1), -1.5)
    assert np.all(conditional_expectation(tree, const) == -1.5)
    with pytest.raises(ValueError):
        conditional_expectation(tree, np.ones(1))


def test_moment_exactness_all_levels():
    tree = build_tree(10, 1.0)
    for k in range(10):
        dw = tree.increments(k)
        assert abs(dw.mean()) <= 1e-14
        assert abs((dw**2).mean() - tree.dt) <= 1e-14


def test_cross_level_independence():
    tree = build_tree(8, 1.0)
    # replicate earlier increments down to the leaves and correlate
    leaves = tree.n_nodes(8)
    for j in range(8):
        dj = np.repeat(tree.increments(j), leaves // tree.n_nodes(j + 1))
        for k in range(j + 1, 8):
            dk = np.repeat(tree.increments(k), leaves // tree.n_nodes(k + 1))
            assert abs(np.mean(dj * dk)) <= 1e-14


def test_tower_property():
    tree = build_tree(5, 1.0)
    rng = np.random.default_rng(0)
    X = rng.standard_normal(tree.n_nodes(5))
    assert np.isclose(
        expectation(tree, X), expectation(tree, conditional_expectation(tree, X)), atol=1e-14
    )


def test_check_adapted():
    tree = build_tree(3, 1.0)
    good = AdaptedProcess(tree, [np.zeros((1 << k, 2)) for k in range(4)])
    assert check_adapted(good)
    missing = AdaptedProcess(tree, [np.zeros((1, 2)), None, np.zeros((4, 2))])
    assert not check_adapted(missing)
    deterministic = AdaptedProcess(tree, [np.ones((1 << k, 2)) for k in range(4)])
    assert check_adapted(deterministic)
    wrong_count = AdaptedProcess(tree, [np.zeros((3, 2))])
    assert not check_adapted(wrong_count)
