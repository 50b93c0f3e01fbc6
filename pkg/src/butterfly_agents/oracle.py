"""Centralized ground truth for the distributed protocols.

Everything here sees the whole graph at once and is written for obviousness,
not speed: BFS two-coloring, butterfly counts via the common-neighborhood
pair formula cross-checked by direct four-node enumeration, and a
spanning-tree checker.  All arithmetic uses exact Python integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

from .graphs import PortGraph

__all__ = [
    "NotBipartite",
    "oracle_coloring",
    "oracle_per_node_butterflies",
    "oracle_total_butterflies",
    "enumerate_butterflies",
    "TreeCheck",
    "check_spanning_tree",
]


class NotBipartite(ValueError):
    """The graph contains an odd cycle."""


def oracle_coloring(g: PortGraph) -> list[int]:
    """Two-color a connected graph by BFS from node 0; color[0] = 0.

    Raises NotBipartite if any edge joins two nodes of the same color.
    """
    n = g.node_count
    color = [-1] * n
    color[0] = 0
    queue = [0]
    while queue:
        nxt = []
        for v in queue:
            for u, _ in g.adjacency[v]:
                if color[u] == -1:
                    color[u] = 1 - color[v]
                    nxt.append(u)
                elif color[u] == color[v]:
                    raise NotBipartite(f"edge ({v}, {u}) joins same-color nodes")
        queue = nxt
    if any(c == -1 for c in color):
        raise ValueError("oracle_coloring requires a connected graph")
    return color


def oracle_per_node_butterflies(g: PortGraph) -> list[int]:
    """B(v) for every node: butterflies (2x2 bicliques) through v.

    For v on one side, B(v) = sum over same-side w != v of C(common, 2)
    where common = |N(v) & N(w)|.
    """
    color = oracle_coloring(g)
    nbrs = [set(g.neighbors(v)) for v in range(g.node_count)]
    counts = [0] * g.node_count
    for side in (0, 1):
        nodes = [v for v in range(g.node_count) if color[v] == side]
        for i, v in enumerate(nodes):
            for w in nodes[i + 1 :]:
                common = len(nbrs[v] & nbrs[w])
                if common > 1:
                    pair = comb(common, 2)
                    counts[v] += pair
                    counts[w] += pair
    return counts


def enumerate_butterflies(g: PortGraph) -> int:
    """Count butterflies by brute force over all A-pairs x B-pairs."""
    color = oracle_coloring(g)
    a_nodes = [v for v in range(g.node_count) if color[v] == 0]
    b_nodes = [v for v in range(g.node_count) if color[v] == 1]
    nbrs = [set(g.neighbors(v)) for v in range(g.node_count)]
    total = 0
    for i, u in enumerate(a_nodes):
        for w in a_nodes[i + 1 :]:
            for j, x in enumerate(b_nodes):
                if x not in nbrs[u] or x not in nbrs[w]:
                    continue
                for y in b_nodes[j + 1 :]:
                    if y in nbrs[u] and y in nbrs[w]:
                        total += 1
    return total


def oracle_total_butterflies(g: PortGraph) -> int:
    """Total butterfly count.

    Computed as half the sum of per-node counts over one side; asserted to
    agree with the other side's half-sum, and on graphs of at most 64 nodes
    also with the direct four-node enumeration.
    """
    color = oracle_coloring(g)
    per_node = oracle_per_node_butterflies(g)
    sum_a = sum(b for v, b in enumerate(per_node) if color[v] == 0)
    sum_b = sum(b for v, b in enumerate(per_node) if color[v] == 1)
    if sum_a != sum_b:
        raise AssertionError(f"side sums disagree: {sum_a} vs {sum_b}")
    if sum_a % 2 != 0:
        raise AssertionError(f"side sum {sum_a} is odd")
    total = sum_a // 2
    if g.node_count <= 64:
        enumerated = enumerate_butterflies(g)
        if enumerated != total:
            raise AssertionError(
                f"pair formula gives {total}, enumeration gives {enumerated}"
            )
    return total


# ---------------------------------------------------------------------------
# spanning-tree checking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TreeCheck:
    ok: bool
    problems: tuple[str, ...]
    depth: dict[int, int] | None  # node -> distance from root, when ok
    height: int | None  # max depth
    diameter: int | None  # longest path within the tree, when ok


def check_spanning_tree(
    g: PortGraph, parent_port: dict[int, int | None], root: int
) -> TreeCheck:
    """Verify that per-node parent ports describe a spanning tree of ``g``.

    ``parent_port[v]`` is the port at node ``v`` leading to its parent, or
    None exactly for the root.  Checks edge validity, a single root, that
    following parents from every node reaches the root (acyclicity +
    connectivity), and computes depth and diameter.
    """
    problems: list[str] = []
    n = g.node_count
    if set(parent_port) != set(range(n)):
        problems.append("parent map does not cover every node exactly once")
        return TreeCheck(False, tuple(problems), None, None, None)
    roots = [v for v, p in parent_port.items() if p is None]
    if roots != [root]:
        problems.append(f"expected single root {root}, found roots {roots}")
    parent_of: dict[int, int] = {}
    for v, p in parent_port.items():
        if p is None:
            continue
        if not (0 <= p < g.degree(v)):
            problems.append(f"node {v}: parent port {p} out of range")
            continue
        parent_of[v] = g.adjacency[v][p][0]
    if problems:
        return TreeCheck(False, tuple(problems), None, None, None)

    depth: dict[int, int] = {root: 0}
    for v in range(n):
        path = []
        x = v
        while x not in depth:
            if x in path:
                problems.append(f"parent pointers cycle through node {x}")
                return TreeCheck(False, tuple(problems), None, None, None)
            path.append(x)
            if x not in parent_of:
                problems.append(f"node {x} has no parent and is not the root")
                return TreeCheck(False, tuple(problems), None, None, None)
            x = parent_of[x]
        base = depth[x]
        for i, y in enumerate(reversed(path)):
            depth[y] = base + i + 1

    # diameter of a tree: farthest node from root, then farthest from that
    children: dict[int, list[int]] = {v: [] for v in range(n)}
    for v, u in parent_of.items():
        children[u].append(v)

    def farthest(start: int) -> tuple[int, int]:
        dist = {start: 0}
        queue = [start]
        far, fard = start, 0
        while queue:
            nxt = []
            for v in queue:
                for u in children[v] + ([parent_of[v]] if v in parent_of else []):
                    if u not in dist:
                        dist[u] = dist[v] + 1
                        if dist[u] > fard:
                            far, fard = u, dist[u]
                        nxt.append(u)
            queue = nxt
        return far, fard

    end, _ = farthest(root)
    _, diameter = farthest(end)
    height = max(depth.values())
    return TreeCheck(True, (), depth, height, diameter)
