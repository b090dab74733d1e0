"""Pure-Python union-find plane decoder.

Reference implementation and import-time fallback for :mod:`dcqec._ufcore`.
Both must return bit-identical corrections.
"""

from __future__ import annotations

import numpy as np


class ClusterForest:
    """Disjoint-set forest over graph nodes with per-root parity and boundary lists.

    Union is by size (ties keep the lower root index) with path compression;
    the surviving root inherits the XOR of both parities and the concatenated
    boundary lists.
    """

    def __init__(self, defects):
        n = len(defects)
        self.parent = list(range(n))
        self.size = [1] * n
        self.parity = [int(d) & 1 for d in defects]
        self.boundary = {v: [v] for v in range(n) if self.parity[v]}

    def find(self, v: int) -> int:
        parent = self.parent
        root = v
        while parent[root] != root:
            root = parent[root]
        while parent[v] != root:
            parent[v], v = root, parent[v]
        return root

    def union(self, u: int, w: int) -> int:
        """Merge the clusters of ``u`` and ``w``; returns the surviving root."""
        ru, rw = self.find(u), self.find(w)
        if ru == rw:
            return ru
        size = self.size
        if size[ru] < size[rw] or (size[ru] == size[rw] and ru > rw):
            ru, rw = rw, ru
        self.parent[rw] = ru
        size[ru] += size[rw]
        self.parity[ru] ^= self.parity[rw]
        bu = self.boundary.setdefault(ru, [])
        bw = self.boundary.pop(rw, None)
        if bw:
            bu.extend(bw)
        return ru


class PlaneDecoder:
    """Union-find decoder for one defect plane of a 4-regular graph.

    ``node_edges`` is ``(n_nodes, 4)``: incident edges per node, in the order
    used for spanning-forest construction.  ``edge_nodes`` is ``(n_edges, 2)``.
    """

    def __init__(self, node_edges, edge_nodes):
        self.node_edges = [tuple(int(e) for e in row) for row in np.asarray(node_edges)]
        self.edge_nodes = [(int(a), int(b)) for a, b in np.asarray(edge_nodes)]
        self.n_nodes = len(self.node_edges)
        self.n_edges = len(self.edge_nodes)
        self.last_rounds = 0

    def decode(self, defects, max_rounds: int = -1) -> np.ndarray:
        defects = [int(d) & 1 for d in np.asarray(defects).ravel()]
        if len(defects) != self.n_nodes:
            raise ValueError(f"expected {self.n_nodes} defect bits, got {len(defects)}")
        if sum(defects) % 2:
            raise ValueError("odd number of defects; plane cannot be decoded")
        support = self._grow(defects, max_rounds)
        return self._peel(defects, support)

    def _grow(self, defects, max_rounds):
        node_edges, edge_nodes = self.node_edges, self.edge_nodes
        forest = ClusterForest(defects)
        find, size, parity, boundary = forest.find, forest.size, forest.parity, forest.boundary
        in_cluster = list(defects)
        support = [0] * self.n_edges

        odd = [v for v in range(self.n_nodes) if defects[v]]
        rounds = 0
        while odd:
            rounds += 1
            if 0 <= max_rounds < rounds:
                raise RuntimeError(f"union-find growth exceeded {max_rounds} rounds")
            # smallest cluster first, ties by root index
            odd.sort(key=lambda r: (size[r], r))
            fused = []
            for root in odd:
                kept = []
                for b in boundary[root]:
                    open_edge = False
                    for e in node_edges[b]:
                        s = support[e]
                        if s < 2:
                            s += 1
                            support[e] = s
                            if s == 2:
                                fused.append(e)
                            else:
                                open_edge = True
                    # vertices whose edges are all fully grown never grow again
                    if open_edge:
                        kept.append(b)
                boundary[root] = kept
            for e in fused:
                u, w = edge_nodes[e]
                forest.union(u, w)
                for x in (u, w):
                    if not in_cluster[x]:
                        in_cluster[x] = 1
                        boundary.setdefault(find(x), []).append(x)
            seen = set()
            nxt = []
            for r in odd:
                r = find(r)
                if r not in seen:
                    seen.add(r)
                    if parity[r]:
                        nxt.append(r)
            odd = nxt
        self.last_rounds = rounds
        self._in_cluster = in_cluster
        return support

    def _peel(self, defects, support):
        node_edges, edge_nodes = self.node_edges, self.edge_nodes
        n = self.n_nodes
        correction = np.zeros(self.n_edges, dtype=np.uint8)
        visited = [False] * n
        tree_edge = [-1] * n
        order = []
        in_cluster = self._in_cluster
        for start in range(n):
            if visited[start] or not in_cluster[start]:
                continue
            visited[start] = True
            head = len(order)
            order.append(start)
            while head < len(order):
                x = order[head]
                head += 1
                for e in node_edges[x]:
                    if support[e] == 2:
                        a, b = edge_nodes[e]
                        y = b if a == x else a
                        if not visited[y]:
                            visited[y] = True
                            tree_edge[y] = e
                            order.append(y)
        residual = list(defects)
        for x in reversed(order):
            e = tree_edge[x]
            if e < 0:
                if residual[x]:
                    raise RuntimeError("cluster with odd defect parity reached peeling")
                continue
            if residual[x]:
                correction[e] ^= 1
                residual[x] = 0
                a, b = edge_nodes[e]
                y = b if a == x else a
                residual[y] ^= 1
        return correction

    def decode_batch(self, defects, max_rounds: int = -1) -> np.ndarray:
        defects = np.asarray(defects)
        out = np.zeros((defects.shape[0], self.n_edges), dtype=np.uint8)
        for i in range(defects.shape[0]):
            if defects[i].any():
                out[i] = self.decode(defects[i], max_rounds)
        return out
