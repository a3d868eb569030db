"""Dinic's maximum flow on real-valued capacities."""
from __future__ import annotations

from collections import deque


class FlowNetwork:
    """Directed network with residual arcs stored pairwise (arc ``a`` and ``a ^ 1``).

    Examples
    --------
    >>> net = FlowNetwork(3)
    >>> _ = net.add_arc(0, 1, 2.0); _ = net.add_arc(1, 2, 1.5)
    >>> net.max_flow(0, 2)
    1.5
    """

    def __init__(self, n_nodes: int, eps: float = 1e-12):
        self.n = n_nodes
        self.eps = eps
        self.adj = [[] for _ in range(n_nodes)]
        self.head = []
        self.cap = []

    def add_arc(self, u: int, v: int, cap: float, rev_cap: float = 0.0) -> int:
        """Add arc ``u -> v`` (and its residual twin with ``rev_cap``); return its id."""
        a = len(self.head)
        self.head += [v, u]
        self.cap += [float(cap), float(rev_cap)]
        self.adj[u].append(a)
        self.adj[v].append(a + 1)
        return a

    def flow_on(self, a: int) -> float:
        """Net flow pushed along arc ``a`` so far."""
        return self.cap[a ^ 1] - self._orig_rev[a >> 1]

    def _levels(self, s, t):
        level = [-1] * self.n
        level[s] = 0
        q = deque([s])
        head, cap, eps = self.head, self.cap, self.eps
        while q:
            u = q.popleft()
            for a in self.adj[u]:
                v = head[a]
                if level[v] < 0 and cap[a] > eps:
                    level[v] = level[u] + 1
                    q.append(v)
        return level if level[t] >= 0 else None

    def _augment(self, s, t, level, ptr):
        # iterative DFS along the level graph; returns the pushed amount
        head, cap, adj, eps = self.head, self.cap, self.adj, self.eps
        path = []
        u = s
        while True:
            if u == t:
                push = min(cap[a] for a in path)
                for a in path:
                    cap[a] -= push
                    cap[a ^ 1] += push
                return push
            advanced = False
            arcs = adj[u]
            while ptr[u] < len(arcs):
                a = arcs[ptr[u]]
                v = head[a]
                if cap[a] > eps and level[v] == level[u] + 1:
                    path.append(a)
                    u = v
                    advanced = True
                    break
                ptr[u] += 1
            if not advanced:
                if u == s:
                    return 0.0
                level[u] = -1  # dead end
                a = path.pop()
                u = head[a ^ 1]
                ptr[u] += 1

    def max_flow(self, s: int, t: int) -> float:
        self._orig_rev = self.cap[1::2]
        total = 0.0
        while True:
            level = self._levels(s, t)
            if level is None:
                return total
            ptr = [0] * self.n
            while True:
                pushed = self._augment(s, t, level, ptr)
                if pushed <= self.eps:
                    break
                total += pushed

    def source_side(self, s: int) -> list:
        """Nodes reachable from ``s`` in the residual network (a minimum cut)."""
        seen = [False] * self.n
        seen[s] = True
        q = deque([s])
        while q:
            u = q.popleft()
            for a in self.adj[u]:
                v = self.head[a]
                if not seen[v] and self.cap[a] > self.eps:
                    seen[v] = True
                    q.append(v)
        return [i for i in range(self.n) if seen[i]]
