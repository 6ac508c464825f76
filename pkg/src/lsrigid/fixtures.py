"""Doctored coding structures for negative tests and the selfcheck report.

Each fixture perturbs the free-group coding in a specific, detectable way:
an extra non-maximal cycle, a backtracking edge (geodesic violation), a
missing generator edge (bijection deficit), or a transient dead end.
"""

from __future__ import annotations

from .coding import INITIAL, MarkovStructure, build_free_group_coding


def _with_extra(ms: MarkovStructure, new_states, new_edges) -> MarkovStructure:
    """Append states and labelled edges (by name) to a structure."""
    states = ms.states + tuple(new_states)
    index = {s: i for i, s in enumerate(states)}
    succ = [list(t) for t in ms.succ] + [[] for _ in new_states]
    labels = [list(t) for t in ms.labels] + [[] for _ in new_states]
    for src, dst, letter in new_edges:
        succ[index[src]].append(index[dst])
        labels[index[src]].append(letter)
    packed_succ = []
    packed_labels = []
    for t, l in zip(succ, labels):
        order = sorted(range(len(t)), key=lambda k: t[k])
        packed_succ.append(tuple(t[k] for k in order))
        packed_labels.append(tuple(l[k] for k in order))
    return MarkovStructure(
        rank=ms.rank,
        states=states,
        succ=tuple(packed_succ),
        labels=tuple(packed_labels),
        initial=ms.initial,
    )


def coding_with_tail_cycle(rank: int = 2) -> MarkovStructure:
    """Free coding plus a reachable 2-cycle component (spectral radius 1)."""
    ms = build_free_group_coding(rank)
    return _with_extra(
        ms,
        ["c1", "c2"],
        [(INITIAL, "c1", 1), ("c1", "c2", 2), ("c2", "c1", 1)],
    )


def coding_with_backtrack(rank: int = 2) -> MarkovStructure:
    """Free coding plus one backtracking edge a -> a^-1: geodesic violation at n = 2."""
    ms = build_free_group_coding(rank)
    return _with_extra(ms, [], [("a", "A", -1)])


def coding_missing_generator_edge(rank: int = 2) -> MarkovStructure:
    """Free coding without the initial edge to the b state: deficit at n = 1."""
    ms = build_free_group_coding(rank)
    b = ms.index("b")
    start = ms.initial_index
    succ = list(ms.succ)
    labels = list(ms.labels)
    keep = [k for k, j in enumerate(succ[start]) if j != b]
    succ[start] = tuple(succ[start][k] for k in keep)
    labels[start] = tuple(labels[start][k] for k in keep)
    return MarkovStructure(
        rank=ms.rank, states=ms.states, succ=tuple(succ), labels=tuple(labels), initial=ms.initial
    )


def coding_with_dead_end(rank: int = 2) -> MarkovStructure:
    """Free coding plus a transient dead-end state reachable from the start."""
    ms = build_free_group_coding(rank)
    return _with_extra(ms, ["d"], [(INITIAL, "d", 1)])
