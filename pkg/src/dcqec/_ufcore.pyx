# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# distutils: language = c++
"""Compiled union-find plane decoder; same contract as ``dcqec._ufpy``."""

import numpy as np
cimport numpy as cnp
from libcpp.vector cimport vector
from libcpp.pair cimport pair
from libcpp.algorithm cimport sort

cnp.import_array()


cdef class PlaneDecoder:
    cdef int n_nodes, n_edges
    cdef int[:, ::1] node_edges
    cdef int[:, ::1] edge_nodes
    cdef int[::1] parent, size, tree_edge, order
    cdef unsigned char[::1] parity, in_cluster, support, visited, residual, mark
    cdef vector[vector[int]] boundary
    cdef public int last_rounds

    def __init__(self, node_edges, edge_nodes):
        self.node_edges = np.ascontiguousarray(node_edges, dtype=np.int32)
        self.edge_nodes = np.ascontiguousarray(edge_nodes, dtype=np.int32)
        if self.node_edges.shape[1] != 4 or self.edge_nodes.shape[1] != 2:
            raise ValueError("node_edges must be (n, 4) and edge_nodes (m, 2)")
        self.n_nodes = self.node_edges.shape[0]
        self.n_edges = self.edge_nodes.shape[0]
        self.parent = np.empty(self.n_nodes, dtype=np.int32)
        self.size = np.empty(self.n_nodes, dtype=np.int32)
        self.tree_edge = np.empty(self.n_nodes, dtype=np.int32)
        self.order = np.empty(self.n_nodes, dtype=np.int32)
        self.parity = np.empty(self.n_nodes, dtype=np.uint8)
        self.in_cluster = np.empty(self.n_nodes, dtype=np.uint8)
        self.visited = np.empty(self.n_nodes, dtype=np.uint8)
        self.residual = np.empty(self.n_nodes, dtype=np.uint8)
        self.mark = np.zeros(self.n_nodes, dtype=np.uint8)
        self.support = np.empty(self.n_edges, dtype=np.uint8)
        self.boundary.resize(self.n_nodes)
        self.last_rounds = 0

    cdef inline int find(self, int v) nogil:
        cdef int root = v
        cdef int nxt
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[v] != root:
            nxt = self.parent[v]
            self.parent[v] = root
            v = nxt
        return root

    cdef int _decode(self, const unsigned char[::1] defects, unsigned char[::1] out, int max_rounds) except -1:
        cdef int n = self.n_nodes
        cdef int v, i, k, e, s, b, u, w, x, y, ru, rw, root, rounds, head, tail, total
        cdef bint open_edge
        cdef vector[int] odd, nxt, fused
        cdef vector[pair[int, int]] keyed
        cdef vector[int]* bl

        total = 0
        for v in range(n):
            self.parent[v] = v
            self.size[v] = 1
            self.parity[v] = defects[v] & 1
            self.in_cluster[v] = defects[v] & 1
            self.boundary[v].clear()
            if defects[v] & 1:
                self.boundary[v].push_back(v)
                odd.push_back(v)
                total += 1
        if total % 2:
            raise ValueError("odd number of defects; plane cannot be decoded")
        for e in range(self.n_edges):
            self.support[e] = 0
            out[e] = 0

        rounds = 0
        while odd.size() > 0:
            rounds += 1
            if 0 <= max_rounds < rounds:
                raise RuntimeError(f"union-find growth exceeded {max_rounds} rounds")
            keyed.clear()
            for i in range(<int>odd.size()):
                keyed.push_back(pair[int, int](self.size[odd[i]], odd[i]))
            sort(keyed.begin(), keyed.end())
            fused.clear()
            for i in range(<int>keyed.size()):
                root = keyed[i].second
                bl = &self.boundary[root]
                w = 0
                for k in range(<int>bl.size()):
                    b = bl[0][k]
                    open_edge = False
                    for x in range(4):
                        e = self.node_edges[b, x]
                        s = self.support[e]
                        if s < 2:
                            s += 1
                            self.support[e] = s
                            if s == 2:
                                fused.push_back(e)
                            else:
                                open_edge = True
                    if open_edge:
                        bl[0][w] = b
                        w += 1
                bl.resize(w)
            for i in range(<int>fused.size()):
                e = fused[i]
                u = self.edge_nodes[e, 0]
                w = self.edge_nodes[e, 1]
                ru = self.find(u)
                rw = self.find(w)
                if ru != rw:
                    if self.size[ru] < self.size[rw] or (self.size[ru] == self.size[rw] and ru > rw):
                        ru, rw = rw, ru
                    self.parent[rw] = ru
                    self.size[ru] += self.size[rw]
                    self.parity[ru] ^= self.parity[rw]
                    bl = &self.boundary[rw]
                    for k in range(<int>bl.size()):
                        self.boundary[ru].push_back(bl[0][k])
                    bl.clear()
                if not self.in_cluster[u]:
                    self.in_cluster[u] = 1
                    self.boundary[self.find(u)].push_back(u)
                if not self.in_cluster[w]:
                    self.in_cluster[w] = 1
                    self.boundary[self.find(w)].push_back(w)
            nxt.clear()
            for i in range(<int>odd.size()):
                root = self.find(odd[i])
                if not self.mark[root]:
                    self.mark[root] = 1
                    if self.parity[root]:
                        nxt.push_back(root)
            for i in range(<int>odd.size()):
                self.mark[self.find(odd[i])] = 0
            odd.swap(nxt)
        self.last_rounds = rounds

        # spanning forest by BFS from the lowest unvisited cluster vertex, then peel in reverse BFS order
        for v in range(n):
            self.visited[v] = 0
            self.tree_edge[v] = -1
            self.residual[v] = defects[v] & 1
        tail = 0
        for v in range(n):
            if self.visited[v] or not self.in_cluster[v]:
                continue
            self.visited[v] = 1
            head = tail
            self.order[tail] = v
            tail += 1
            while head < tail:
                x = self.order[head]
                head += 1
                for k in range(4):
                    e = self.node_edges[x, k]
                    if self.support[e] == 2:
                        y = self.edge_nodes[e, 1] if self.edge_nodes[e, 0] == x else self.edge_nodes[e, 0]
                        if not self.visited[y]:
                            self.visited[y] = 1
                            self.tree_edge[y] = e
                            self.order[tail] = y
                            tail += 1
        for i in range(tail - 1, -1, -1):
            x = self.order[i]
            e = self.tree_edge[x]
            if e < 0:
                if self.residual[x]:
                    raise RuntimeError("cluster with odd defect parity reached peeling")
                continue
            if self.residual[x]:
                out[e] ^= 1
                self.residual[x] = 0
                y = self.edge_nodes[e, 1] if self.edge_nodes[e, 0] == x else self.edge_nodes[e, 0]
                self.residual[y] ^= 1
        return 0

    def decode(self, defects, int max_rounds=-1):
        cdef cnp.ndarray[cnp.uint8_t, ndim=1] d = np.ascontiguousarray(defects, dtype=np.uint8).ravel()
        if d.shape[0] != self.n_nodes:
            raise ValueError(f"expected {self.n_nodes} defect bits, got {d.shape[0]}")
        out = np.zeros(self.n_edges, dtype=np.uint8)
        self._decode(d, out, max_rounds)
        return out

    def decode_batch(self, defects, int max_rounds=-1):
        cdef const unsigned char[:, ::1] d = np.ascontiguousarray(defects, dtype=np.uint8)
        if d.shape[1] != self.n_nodes:
            raise ValueError(f"expected {self.n_nodes} defect bits per row, got {d.shape[1]}")
        out = np.zeros((d.shape[0], self.n_edges), dtype=np.uint8)
        cdef unsigned char[:, ::1] o = out
        cdef Py_ssize_t i, j
        cdef bint any_defect
        for i in range(d.shape[0]):
            any_defect = False
            for j in range(d.shape[1]):
                if d[i, j]:
                    any_defect = True
                    break
            if any_defect:
                self._decode(d[i], o[i], max_rounds)
        return out
