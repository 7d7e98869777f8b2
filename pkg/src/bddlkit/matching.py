"""Maximum bipartite matching for small instance sets (augmenting paths)."""
from __future__ import annotations

from typing import Dict, Hashable, Iterable, Mapping, Sequence


def max_matching(adjacency: Mapping[Hashable, Iterable[Hashable]]) -> Dict[Hashable, Hashable]:
    """Maximum matching as a left -> right dict.

    Left vertices are tried in iteration order and neighbours in the given
    order, so the result is deterministic.
    """
    adj = {u: list(vs) for u, vs in adjacency.items()}
    owner: Dict[Hashable, Hashable] = {}

    def augment(u, seen) -> bool:
        for v in adj[u]:
            if v in seen:
                continue
            seen.add(v)
            if v not in owner or augment(owner[v], seen):
                owner[v] = u
                return True
        return False

    for u in adj:
        augment(u, set())
    return {u: v for v, u in owner.items()}


def matching_size(left: Sequence, right: Sequence, edge) -> int:
    """Size of a maximum matching where ``edge(l, r)`` says whether l and r may pair."""
    return len(max_matching({l: [r for r in right if edge(l, r)] for l in left}))
