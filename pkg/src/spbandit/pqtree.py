"""PQ tree maintaining contiguity (consecutive-ones) constraints over arms.

A PQ tree over the universe {0, ..., K-1} represents a set of permutations,
its *frontiers*: the leaf orders reachable by freely permuting the children of
P-nodes and reversing the children of Q-nodes.  ``reduce(S)`` restricts the
frontier set to exactly the previous frontiers in which the members of S are
consecutive, or reports that no such frontier exists and leaves the tree
unchanged.

The reduction is the classical bottom-up template pass expressed recursively:
each case below names the template it realizes (L1, P1-P6, Q1-Q3).  During a
reduction a subtree is classified as

* ``empty``   -- contains no member of S,
* ``full``    -- contains only members of S,
* ``partial`` -- rearranged so that members of S form a suffix block; partial
  results are Q-nodes whose children run empty -> full left to right.

Two partial children can only be accommodated at the pertinent root (the
deepest node covering all of S), where the block may sit in the middle of the
frontier; anywhere else the block must be movable to one end of the subtree.
Failure anywhere means the constraint set has become unsatisfiable.

Reductions build fresh nodes and share untouched subtrees, so a failed call
cannot corrupt the tree.
"""

from __future__ import annotations

import itertools

from .core import SPBanditError

__all__ = ["PQTree", "ZeroUniverse", "CapExceeded"]


class ZeroUniverse(SPBanditError):
    """A PQ tree needs at least one element."""


class CapExceeded(SPBanditError):
    """enumerate_frontiers hit its cap before exhausting the frontier set."""


_EMPTY, _FULL, _PARTIAL = 0, 1, 2


class _Leaf:
    __slots__ = ("element",)

    def __init__(self, element: int):
        self.element = element


class _PNode:
    __slots__ = ("children",)

    def __init__(self, children: list):
        self.children = children


class _QNode:
    __slots__ = ("children",)

    def __init__(self, children: list):
        self.children = children


class _Infeasible(Exception):
    """Internal: no template applies, the constraint cannot be satisfied."""


def _group(nodes: list):
    """Wrap two or more siblings in a fresh P-node; a single node stays bare."""
    return nodes[0] if len(nodes) == 1 else _PNode(list(nodes))


def _leaf_list(node) -> list[int]:
    out: list[int] = []
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, _Leaf):
            out.append(n.element)
        else:
            stack.extend(reversed(n.children))
    return out


def _reduce_nonroot(node, s: frozenset):
    """Bottom-up templates away from the pertinent root.

    Returns (state, node'); for ``_PARTIAL`` the node is a Q whose children
    run empty -> full.  Raises ``_Infeasible`` when no template applies.
    """
    if isinstance(node, _Leaf):
        # Template L1: a leaf is full or empty.
        return (_FULL, node) if node.element in s else (_EMPTY, node)

    results = [_reduce_nonroot(c, s) for c in node.children]

    if isinstance(node, _PNode):
        empties = [n for st, n in results if st == _EMPTY]
        fulls = [n for st, n in results if st == _FULL]
        partials = [n for st, n in results if st == _PARTIAL]
        if not partials:
            if not fulls:
                return _EMPTY, node
            if not empties:
                # Template P1: all children full.
                return _FULL, node
            # Template P3: group both sides; the block can slide to either end.
            return _PARTIAL, _QNode([_group(empties), _group(fulls)])
        if len(partials) == 1:
            # Template P5: thread empties and fulls through the partial child.
            kids: list = []
            if empties:
                kids.append(_group(empties))
            kids.extend(partials[0].children)
            if fulls:
                kids.append(_group(fulls))
            return _PARTIAL, _QNode(kids)
        # Two partial children are only legal at the pertinent root (P6).
        raise _Infeasible

    # Q-node: the full block must already be consecutive up to reversal.
    states = [st for st, _ in results]
    if all(st == _EMPTY for st in states):
        return _EMPTY, node
    if all(st == _FULL for st in states):
        # Template Q1: all children full.
        return _FULL, node
    for seq in (results, results[::-1]):
        kids = _match_singly_partial(seq)
        if kids is not None:
            # Template Q2: empties, at most one partial, then fulls to the end.
            return _PARTIAL, _QNode(kids)
    raise _Infeasible


def _match_singly_partial(results):
    """Match E* [partial] F* covering the whole child sequence, else None."""
    i, n = 0, len(results)
    kids: list = []
    while i < n and results[i][0] == _EMPTY:
        kids.append(results[i][1])
        i += 1
    if i < n and results[i][0] == _PARTIAL:
        kids.extend(results[i][1].children)
        i += 1
    while i < n and results[i][0] == _FULL:
        kids.append(results[i][1])
        i += 1
    return kids if i == n else None


def _match_doubly_partial(results):
    """Match E* [partial] F* [partial-reversed] E* over the whole sequence."""
    i, n = 0, len(results)
    kids: list = []
    while i < n and results[i][0] == _EMPTY:
        kids.append(results[i][1])
        i += 1
    if i < n and results[i][0] == _PARTIAL:
        kids.extend(results[i][1].children)
        i += 1
    while i < n and results[i][0] == _FULL:
        kids.append(results[i][1])
        i += 1
    if i < n and results[i][0] == _PARTIAL:
        # The second partial joins the block from the right: full side first.
        kids.extend(reversed(results[i][1].children))
        i += 1
    while i < n and results[i][0] == _EMPTY:
        kids.append(results[i][1])
        i += 1
    return kids if i == n else None


def _reduce_root(node, s: frozenset):
    """Templates at the pertinent root, where the block may sit mid-frontier."""
    if isinstance(node, _Leaf):
        return node
    results = [_reduce_nonroot(c, s) for c in node.children]

    if isinstance(node, _PNode):
        empties = [n for st, n in results if st == _EMPTY]
        fulls = [n for st, n in results if st == _FULL]
        partials = [n for st, n in results if st == _PARTIAL]
        if not partials:
            if not fulls or not empties:
                # Wholly empty or wholly full: a subtree's leaves are always
                # consecutive in any frontier, so the constraint is vacuous.
                return node
            # Template P2: gather the full children under one new P-child.
            return _PNode(empties + [_group(fulls)])
        if len(partials) == 1:
            # Template P4: attach grouped fulls at the full end of the partial.
            kids = list(partials[0].children)
            if fulls:
                kids.append(_group(fulls))
            part = _QNode(kids)
            return _PNode(empties + [part]) if empties else part
        if len(partials) == 2:
            # Template P6: merge both partials around the grouped fulls.
            kids = list(partials[0].children)
            if fulls:
                kids.append(_group(fulls))
            kids.extend(reversed(partials[1].children))
            merged = _QNode(kids)
            return _PNode(empties + [merged]) if empties else merged
        raise _Infeasible

    states = [st for st, _ in results]
    if all(st == _EMPTY for st in states) or all(st == _FULL for st in states):
        return node
    for seq in (results, results[::-1]):
        kids = _match_doubly_partial(seq)
        if kids is not None:
            # Template Q3: the block may lie strictly inside the Q sequence.
            return _QNode(kids)
    raise _Infeasible


def _normalize(node):
    """Restore arity invariants: P >= 2 children, Q >= 3, no unary nodes."""
    if isinstance(node, _Leaf):
        return node
    kids = [_normalize(c) for c in node.children]
    if len(kids) == 1:
        return kids[0]
    if isinstance(node, _QNode) and len(kids) == 2:
        return _PNode(kids)  # a 2-child Q admits the same two frontiers as a P
    if isinstance(node, _QNode):
        return _QNode(kids)
    return _PNode(kids)


class PQTree:
    """Mutable single-owner PQ tree over the universe {0, ..., k-1}.

    Distinct trees may be used concurrently; a single tree must not be shared
    across threads while being reduced.
    """

    def __init__(self, k: int):
        if k < 1:
            raise ZeroUniverse(f"universe size must be >= 1, got {k}")
        self._k = k
        self._universe = frozenset(range(k))
        self._root = _Leaf(0) if k == 1 else _PNode([_Leaf(i) for i in range(k)])

    @property
    def universe_size(self) -> int:
        return self._k

    def reduce(self, constraint) -> bool:
        """Require the members of ``constraint`` to be consecutive.

        Returns True on success (tree updated), False when no remaining
        frontier keeps the set contiguous (tree untouched).  Singleton and
        full-universe constraints are vacuous and always succeed.
        """
        s = frozenset(int(x) for x in constraint)
        if not s <= self._universe:
            raise ValueError(f"constraint {sorted(s)} not within universe of size {self._k}")
        if len(s) <= 1 or len(s) == self._k:
            return True

        # Descend to the pertinent root: the deepest node covering all of S.
        path: list[tuple] = []
        node = self._root
        while not isinstance(node, _Leaf):
            step = None
            for idx, child in enumerate(node.children):
                if s <= frozenset(_leaf_list(child)):
                    step = (node, idx)
                    break
            if step is None:
                break
            path.append(step)
            node = node.children[step[1]]

        try:
            replaced = _normalize(_reduce_root(node, s))
        except _Infeasible:
            return False

        # Path-copy the ancestors so the old tree was never mutated.
        for parent, idx in reversed(path):
            kids = list(parent.children)
            kids[idx] = replaced
            replaced = _PNode(kids) if isinstance(parent, _PNode) else _QNode(kids)
        self._root = replaced
        return True

    def frontier(self) -> list[int]:
        """The canonical frontier: children in stored order, Q-nodes unreversed."""
        return _leaf_list(self._root)

    def enumerate_frontiers(self, cap: int = 10000) -> list[tuple[int, ...]]:
        """All frontiers, intended for small universes (K <= 8).

        Raises :class:`CapExceeded` if more than ``cap`` frontiers exist.
        """
        out: list[tuple[int, ...]] = []
        for fr in _expand(self._root):
            out.append(fr)
            if len(out) > cap:
                raise CapExceeded(f"more than {cap} frontiers")
        return out

    def dump(self) -> str:
        """Parenthesized text form: P-nodes as ``(...)``, Q-nodes as ``[...]``."""
        return _dump(self._root)


def _expand(node):
    if isinstance(node, _Leaf):
        yield (node.element,)
        return
    parts = [list(_expand(c)) for c in node.children]
    if isinstance(node, _PNode):
        orders = itertools.permutations(range(len(parts)))
    else:
        orders = (tuple(range(len(parts))), tuple(reversed(range(len(parts)))))
    for order in orders:
        for combo in itertools.product(*(parts[i] for i in order)):
            yield tuple(itertools.chain.from_iterable(combo))


def _dump(node) -> str:
    if isinstance(node, _Leaf):
        return str(node.element)
    inner = " ".join(_dump(c) for c in node.children)
    return f"({inner})" if isinstance(node, _PNode) else f"[{inner}]"
