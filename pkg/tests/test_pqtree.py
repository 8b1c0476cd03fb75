import math

import numpy as np
import pytest

from spbandit import CapExceeded, PQTree, ZeroUniverse

from conftest import contiguity_filter


class TestConstruction:
    def test_fresh_tree_is_universal(self):
        tree = PQTree(3)
        assert len(tree.enumerate_frontiers()) == 6

    def test_single_leaf(self):
        tree = PQTree(1)
        assert tree.frontier() == [0]
        assert tree.enumerate_frontiers() == [(0,)]

    def test_five_leaves_all_permutations(self):
        assert len(PQTree(5).enumerate_frontiers(cap=200)) == math.factorial(5)

    def test_zero_universe(self):
        with pytest.raises(ZeroUniverse):
            PQTree(0)

    def test_canonical_frontier_is_identity(self):
        assert PQTree(4).frontier() == [0, 1, 2, 3]


class TestReduce:
    def test_two_overlapping_pairs_then_conflict(self):
        # Oracle: filter all 120 permutations by contiguity of the applied sets.
        tree = PQTree(5)
        assert tree.reduce({0, 1})
        assert tree.reduce({1, 2})
        want = contiguity_filter(5, [{0, 1}, {1, 2}])
        assert set(tree.enumerate_frontiers()) == want
        assert (0, 1, 2, 3, 4) in want

        # {0,1}, {1,2}, {0,2} all contiguous is impossible; tree must be intact.
        assert contiguity_filter(5, [{0, 1}, {1, 2}, {0, 2}]) == set()
        before = set(tree.enumerate_frontiers())
        assert not tree.reduce({0, 2})
        assert set(tree.enumerate_frontiers()) == before

    def test_vacuous_constraints_are_noops(self):
        tree = PQTree(4)
        before = set(tree.enumerate_frontiers())
        assert tree.reduce({2})
        assert tree.reduce(range(4))
        assert set(tree.enumerate_frontiers()) == before

    def test_frontier_satisfies_constraint(self):
        tree = PQTree(4)
        assert tree.reduce({1, 2})
        fr = tree.frontier()
        assert abs(fr.index(1) - fr.index(2)) == 1

    def test_constraint_outside_universe(self):
        with pytest.raises(ValueError):
            PQTree(3).reduce({0, 5})

    def test_enumerate_after_pair_constraint(self):
        tree = PQTree(3)
        assert tree.reduce({0, 1})
        got = set(tree.enumerate_frontiers())
        assert got == contiguity_filter(3, [{0, 1}])
        assert len(got) == 4

    def test_two_element_universe(self):
        assert len(PQTree(2).enumerate_frontiers()) == 2

    def test_cap_exceeded(self):
        with pytest.raises(CapExceeded):
            PQTree(5).enumerate_frontiers(cap=10)


class TestDump:
    def test_fresh_tree(self):
        assert PQTree(3).dump() == "(0 1 2)"

    def test_pair_grouping(self):
        tree = PQTree(4)
        tree.reduce({1, 2})
        assert tree.dump() == "(0 3 (1 2))"

    def test_q_node_rendering(self):
        tree = PQTree(4)
        tree.reduce({0, 1})
        tree.reduce({1, 2})
        # 0-1 and 1-2 adjacencies force a Q spine over {0,1,2}.
        assert tree.dump() == "(3 [0 1 2])"


class TestStructuralInvariants:
    @staticmethod
    def _walk(node, leaves):
        from spbandit.pqtree import _Leaf, _PNode, _QNode
        if isinstance(node, _Leaf):
            leaves.append(node.element)
            return
        if isinstance(node, _PNode):
            assert len(node.children) >= 2, "P-node with fewer than 2 children"
        else:
            assert isinstance(node, _QNode)
            assert len(node.children) >= 3, "Q-node with fewer than 3 children"
        for child in node.children:
            TestStructuralInvariants._walk(child, leaves)

    def test_arity_and_leaf_set_preserved_under_reductions(self):
        rng = np.random.default_rng(99)
        for _ in range(60):
            k = int(rng.integers(2, 9))
            tree = PQTree(k)
            for _ in range(int(rng.integers(1, 8))):
                size = int(rng.integers(2, k + 1))
                tree.reduce(rng.choice(k, size=size, replace=False))
                leaves = []
                self._walk(tree._root, leaves)
                assert sorted(leaves) == list(range(k))


class TestOracleEquivalence:
    def test_random_sequences_match_bruteforce(self):
        rng = np.random.default_rng(20240814)
        for _ in range(80):
            k = int(rng.integers(2, 8))
            tree = PQTree(k)
            applied: list[tuple[int, ...]] = []
            for _ in range(int(rng.integers(1, 7))):
                size = int(rng.integers(1, k + 1))
                c = tuple(sorted(rng.choice(k, size=size, replace=False).tolist()))
                want = contiguity_filter(k, applied + [c])
                ok = tree.reduce(c)
                assert ok == (len(want) > 0)
                if ok:
                    applied.append(c)
                got = set(tree.enumerate_frontiers(cap=10000))
                assert got == contiguity_filter(k, applied)
                assert tuple(tree.frontier()) in got

    def test_constraint_order_does_not_change_frontier_set(self):
        rng = np.random.default_rng(7)
        for _ in range(40):
            k = int(rng.integers(3, 7))
            constraints = []
            for _ in range(int(rng.integers(2, 5))):
                size = int(rng.integers(2, k))
                constraints.append(tuple(sorted(rng.choice(k, size=size, replace=False).tolist())))
            if not contiguity_filter(k, constraints):
                continue
            t1, t2 = PQTree(k), PQTree(k)
            for c in constraints:
                assert t1.reduce(c)
            for c in reversed(constraints):
                assert t2.reduce(c)
            assert set(t1.enumerate_frontiers()) == set(t2.enumerate_frontiers())
