"""Shared test helpers: exhaustive tree enumeration and brute-force isomorphism."""

import heapq
import itertools
from collections import defaultdict

import numpy as np


def prufer_to_parents(seq, n):
    """Labeled tree from a Prufer sequence, rooted at node 0."""
    degree = [1] * n
    for s in seq:
        degree[s] += 1
    leaves = [i for i in range(n) if degree[i] == 1]
    heapq.heapify(leaves)
    edges = []
    for s in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, s))
        degree[s] -= 1
        if degree[s] == 1:
            heapq.heappush(leaves, s)
    edges.append((heapq.heappop(leaves), heapq.heappop(leaves)))

    adj = defaultdict(list)
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    parent = [-1] * n
    seen = {0}
    stack = [0]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                parent[y] = x
                stack.append(y)
    return parent


def all_labeled_trees(n):
    """Every labeled tree on n nodes as a parent list (n^(n-2) of them)."""
    if n == 1:
        return [[-1]]
    if n == 2:
        return [[-1, 0]]
    return [prufer_to_parents(seq, n) for seq in itertools.product(range(n), repeat=n - 2)]


def _edge_set(parent):
    return frozenset(frozenset((i, p)) for i, p in enumerate(parent) if p >= 0)


def brute_force_isomorphic(parent_a, parent_b):
    """Try every node bijection; exact but exponential (n <= 7 only)."""
    n = len(parent_a)
    if len(parent_b) != n:
        return False
    ea, eb = _edge_set(parent_a), _edge_set(parent_b)
    for perm in itertools.permutations(range(n)):
        mapped = frozenset(frozenset(perm[v] for v in e) for e in ea)
        if mapped == eb:
            return True
    return False
