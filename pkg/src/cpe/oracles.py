"""Combinatorial maximization oracles and k-best enumeration.

Every structure implements a raw constrained solver returning *some*
maximizer; :meth:`ActionSpace.maximize` turns it into the canonical one
(largest value, then lexicographically smallest bits) by fixing coordinates
one at a time. k-best enumeration partitions the remaining space with forced
in/out constraints (Lawler; Murty for assignments) or, for DAG paths, by the
prefix at which a path deviates from an already-reported one.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Hashable, Iterator, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .actions import Action

DEFAULT_ENUMERATION_CAP = 10**6


class RankDeficiencyError(ValueError):
    """The feasible actions do not span R^d."""

    def __init__(self, coordinate: int, rank: int, d: int) -> None:
        super().__init__(
            f"feasible actions span only rank {rank} < d={d}; "
            f"unit direction e_{coordinate} is unreachable"
        )
        self.coordinate = coordinate
        self.rank = rank
        self.d = d


class EnumerationCapError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConstrainedQuery:
    weights: np.ndarray
    forced_in: frozenset[int] = field(default_factory=frozenset)
    forced_out: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "forced_in", frozenset(self.forced_in))
        object.__setattr__(self, "forced_out", frozenset(self.forced_out))
        if self.forced_in & self.forced_out:
            raise ValueError(f"arms forced both in and out: {sorted(self.forced_in & self.forced_out)}")


def _tie_tolerance(weights: np.ndarray) -> float:
    return 1e-12 * float(np.abs(weights).sum())


class ActionSpace:
    """A family of feasible super arms over ``d`` base arms."""

    d: int
    m: int
    kind: str = "abstract"

    # -- structure-specific hooks -------------------------------------------------
    def _solve(self, w: np.ndarray, fin: frozenset, fout: frozenset,
               cardinality: int | None = None) -> Action | None:
        raise NotImplementedError

    def contains(self, x: Action) -> bool:
        raise NotImplementedError

    def count(self) -> int:
        raise NotImplementedError

    def _enumerate(self) -> Iterator[Action]:
        raise NotImplementedError

    @property
    def cardinalities(self) -> tuple[int, ...]:
        """Support sizes attained by feasible actions."""
        raise NotImplementedError

    # -- generic machinery -------------------------------------------------------
    @property
    def fixed_cardinality(self) -> bool:
        return len(self.cardinalities) == 1

    def log_count(self) -> float:
        return math.log(self.count())

    def _check_weights(self, weights) -> np.ndarray:
        w = np.asarray(weights, dtype=float)
        if w.shape != (self.d,):
            raise ValueError(f"weights must have length d={self.d}, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        return w

    def maximize(self, weights, forced_in=(), forced_out=(),
                 cardinality: int | None = None) -> tuple[Action, float] | None:
        """Best feasible action under the constraints, or ``None`` if infeasible.

        Ties are broken towards the lexicographically smallest bit sequence.
        """
        q = ConstrainedQuery(self._check_weights(weights), forced_in, forced_out)
        for i in itertools.chain(q.forced_in, q.forced_out):
            if not 0 <= i < self.d:
                raise ValueError(f"constraint on base arm {i} out of range")
        return self._canonical(q.weights, q.forced_in, q.forced_out, cardinality)

    def _canonical(self, w, fin, fout, cardinality=None):
        x = self._solve(w, fin, fout, cardinality)
        if x is None:
            return None
        best = x.value(w)
        tol = _tie_tolerance(w)
        fin, fout = set(fin), set(fout)
        for i in range(self.d):
            if i in fin or i in fout:
                continue
            if not x.has(i):
                fout.add(i)
                continue
            alt = self._solve(w, frozenset(fin), frozenset(fout | {i}), cardinality)
            if alt is not None and alt.value(w) >= best - tol:
                x = alt
                best = max(best, alt.value(w))
                fout.add(i)
            else:
                fin.add(i)
        return x, x.value(w)

    def k_best(self, weights, k: int, cardinality: int | None = None) -> list[tuple[Action, float]]:
        """The ``k`` best actions in non-increasing value order (Lawler partitioning)."""
        if k < 1:
            raise ValueError("k must be at least 1")
        w = self._check_weights(weights)
        first = self._canonical(w, frozenset(), frozenset(), cardinality)
        if first is None:
            return []
        counter = itertools.count()
        heap = [(-first[1], first[0].mask, next(counter), first[0], frozenset(), frozenset())]
        out: list[tuple[Action, float]] = []
        while heap and len(out) < k:
            negv, _, _, x, fin, fout = heapq.heappop(heap)
            out.append((x, -negv))
            if len(out) == k:
                break
            free = [e for e in x.support if e not in fin]
            for j, e in enumerate(free):
                cfin = fin | frozenset(free[:j])
                cfout = fout | {e}
                res = self._canonical(w, cfin, cfout, cardinality)
                if res is not None:
                    heapq.heappush(heap, (-res[1], res[0].mask, next(counter), res[0], cfin, cfout))
        return out

    def enumerate(self, cap: int = DEFAULT_ENUMERATION_CAP) -> list[Action]:
        n = self.count()
        if n > cap:
            raise EnumerationCapError(f"|X| = {n} exceeds enumeration cap {cap}")
        return sorted(self._enumerate())

    def to_json(self) -> dict:
        raise NotImplementedError


class TopK(ActionSpace):
    """All subsets of exactly ``k`` out of ``d`` base arms."""

    kind = "topk"

    def __init__(self, d: int, k: int) -> None:
        if not 1 <= k <= d:
            raise ValueError(f"top-k needs 1 <= k <= d, got k={k}, d={d}")
        self.d, self.k, self.m = int(d), int(k), int(k)

    @property
    def cardinalities(self):
        return (self.k,)

    def _solve(self, w, fin, fout, cardinality=None):
        if cardinality is not None and cardinality != self.k:
            return None
        if len(fin) > self.k or self.d - len(fout) < self.k:
            return None
        free = [i for i in range(self.d) if i not in fin and i not in fout]
        # equal weights: prefer larger indices, which keeps the bits lexicographically small
        free.sort(key=lambda i: (-w[i], -i))
        return Action.from_support(self.d, list(fin) + free[: self.k - len(fin)])

    def _canonical(self, w, fin, fout, cardinality=None):
        x = self._solve(w, fin, fout, cardinality)
        return None if x is None else (x, x.value(w))

    def contains(self, x):
        return x.d == self.d and x.size == self.k

    def count(self):
        return math.comb(self.d, self.k)

    def _enumerate(self):
        for c in itertools.combinations(range(self.d), self.k):
            yield Action.from_support(self.d, c)

    def to_json(self):
        return {"type": "topk", "k": self.k}


class PartitionMatroid(ActionSpace):
    """Exactly one base arm from each group of a partition of ``range(d)``."""

    kind = "partition"

    def __init__(self, boundaries: Sequence[int]) -> None:
        bounds = [int(b) for b in boundaries]
        if not bounds or bounds != sorted(set(bounds)) or bounds[0] <= 0:
            raise ValueError("group boundaries must be strictly increasing positive ends")
        starts = [0] + bounds[:-1]
        self.groups = [tuple(range(a, b)) for a, b in zip(starts, bounds)]
        self.boundaries = bounds
        self.d = bounds[-1]
        self.m = len(self.groups)
        self._group_of = {i: g for g, grp in enumerate(self.groups) for i in grp}

    @property
    def cardinalities(self):
        return (self.m,)

    def _solve(self, w, fin, fout, cardinality=None):
        if cardinality is not None and cardinality != self.m:
            return None
        chosen = []
        for grp in self.groups:
            forced = [i for i in grp if i in fin]
            if len(forced) > 1:
                return None
            if forced:
                chosen.append(forced[0])
                continue
            allowed = [i for i in grp if i not in fout]
            if not allowed:
                return None
            chosen.append(max(allowed, key=lambda i: (w[i], i)))
        return Action.from_support(self.d, chosen)

    def _canonical(self, w, fin, fout, cardinality=None):
        x = self._solve(w, fin, fout, cardinality)
        return None if x is None else (x, x.value(w))

    def contains(self, x):
        if x.d != self.d:
            return False
        return all(sum(x.has(i) for i in grp) == 1 for grp in self.groups)

    def count(self):
        return math.prod(len(g) for g in self.groups)

    def _enumerate(self):
        for c in itertools.product(*self.groups):
            yield Action.from_support(self.d, c)

    def to_json(self):
        return {"type": "partition", "boundaries": list(self.boundaries)}


class PerfectMatching(ActionSpace):
    """Perfect matchings of the complete bipartite graph K_{n,n}.

    Base arm ``i * n + j`` is the edge between left vertex ``i`` and right vertex ``j``.
    """

    kind = "matching"

    def __init__(self, n: int) -> None:
        if n < 1:
            raise ValueError("matching side size must be positive")
        self.n = int(n)
        self.d = self.n * self.n
        self.m = self.n

    @property
    def cardinalities(self):
        return (self.n,)

    def _solve(self, w, fin, fout, cardinality=None):
        n = self.n
        if cardinality is not None and cardinality != n:
            return None
        W = np.array(w, dtype=float).reshape(n, n)
        for e in fout:
            W[e // n, e % n] = -np.inf
        rows, cols = set(), set()
        for e in fin:
            i, j = divmod(e, n)
            if i in rows or j in cols:
                return None
            rows.add(i)
            cols.add(j)
            keep = W[i, j]
            W[i, :] = -np.inf
            W[:, j] = -np.inf
            W[i, j] = keep
        try:
            r, c = linear_sum_assignment(W, maximize=True)
        except ValueError:
            return None
        if not np.all(np.isfinite(W[r, c])):
            return None
        return Action.from_support(self.d, (r * n + c).tolist())

    def contains(self, x):
        if x.d != self.d:
            return False
        M = x.vector.reshape(self.n, self.n)
        return bool(np.all(M.sum(axis=0) == 1) and np.all(M.sum(axis=1) == 1))

    def count(self):
        return math.factorial(self.n)

    def _enumerate(self):
        n = self.n
        for p in itertools.permutations(range(n)):
            yield Action.from_support(self.d, [i * n + p[i] for i in range(n)])

    def to_json(self):
        return {"type": "matching", "n": self.n}


class DagPaths(ActionSpace):
    """Source-to-sink paths of a directed acyclic graph; base arms are edges."""

    kind = "dagpath"

    def __init__(self, edges: Sequence[tuple[Hashable, Hashable]], source: Hashable, sink: Hashable) -> None:
        self.edges = [tuple(e) for e in edges]
        if not self.edges:
            raise ValueError("DAG needs at least one edge")
        if source == sink:
            raise ValueError("source and sink must differ")
        self.source, self.sink = source, sink
        nodes = {source, sink}
        for u, v in self.edges:
            nodes.update((u, v))
        indeg = {v: 0 for v in nodes}
        self._out: dict = {v: [] for v in nodes}
        for idx, (u, v) in enumerate(self.edges):
            indeg[v] += 1
            self._out[u].append(idx)
        ready = sorted((v for v in nodes if indeg[v] == 0), key=repr)
        order = []
        while ready:
            u = ready.pop()
            order.append(u)
            for idx in self._out[u]:
                v = self.edges[idx][1]
                indeg[v] -= 1
                if indeg[v] == 0:
                    ready.append(v)
        if len(order) != len(nodes):
            raise ValueError("edge list contains a directed cycle")
        self._order = order
        self._topo = {v: i for i, v in enumerate(order)}
        self.d = len(self.edges)
        counts = self._path_counts()
        if counts.get(source, 0) == 0:
            raise ValueError("sink is unreachable from source")
        self._lengths = self._reachable_lengths()
        self.m = max(self._lengths)

    # paths from each node to the sink
    def _path_counts(self) -> dict:
        cnt = {v: 0 for v in self._order}
        cnt[self.sink] = 1
        for u in reversed(self._order):
            if u == self.sink:
                continue
            cnt[u] = sum(cnt[self.edges[idx][1]] for idx in self._out[u])
        return cnt

    def _reachable_lengths(self) -> tuple[int, ...]:
        lens = {v: set() for v in self._order}
        lens[self.sink] = {0}
        for u in reversed(self._order):
            if u == self.sink:
                continue
            for idx in self._out[u]:
                lens[u].update(l + 1 for l in lens[self.edges[idx][1]])
        return tuple(sorted(lens[self.source]))

    @property
    def cardinalities(self):
        return self._lengths

    def count(self):
        return self._path_counts()[self.source]

    def path_order(self, x: Action) -> list[int]:
        """Edges of ``x`` in traversal order."""
        return sorted(x.support, key=lambda idx: self._topo[self.edges[idx][0]])

    def contains(self, x):
        if x.d != self.d or x.size == 0:
            return False
        seq = self.path_order(x)
        node = self.source
        for idx in seq:
            u, v = self.edges[idx]
            if u != node:
                return False
            node = v
        return node == self.sink

    def _segment(self, a, b, w, banned, by_length: bool):
        """Best a->b path avoiding ``banned``: {length: (value, edges)} or (value, edges)."""
        if self._topo[a] > self._topo[b]:
            return None
        if by_length:
            best = {a: {0: (0.0, None)}}
        else:
            best = {a: (0.0, None)}
        start = self._topo[a]
        for u in self._order[start: self._topo[b] + 1]:
            if u not in best:
                continue
            for idx in self._out[u]:
                if idx in banned:
                    continue
                v = self.edges[idx][1]
                if self._topo[v] > self._topo[b]:
                    continue
                if by_length:
                    tab = best.setdefault(v, {})
                    for l, (val, _) in best[u].items():
                        cand = val + w[idx]
                        if l + 1 not in tab or cand > tab[l + 1][0]:
                            tab[l + 1] = (cand, idx)
                else:
                    cand = best[u][0] + w[idx]
                    if v not in best or cand > best[v][0]:
                        best[v] = (cand, idx)
        if b not in best:
            return None

        def trace(length=None):
            edges, node, l = [], b, length
            while node != a:
                idx = best[node][l][1] if by_length else best[node][1]
                edges.append(idx)
                node = self.edges[idx][0]
                if by_length:
                    l -= 1
            return edges[::-1]

        if by_length:
            return {l: (val, trace(l)) for l, (val, _) in best[b].items()}
        return best[b][0], trace()

    def _solve(self, w, fin, fout, cardinality=None):
        forced = sorted(fin, key=lambda idx: self._topo[self.edges[idx][0]])
        tails = [self.edges[idx][0] for idx in forced]
        if len(set(tails)) != len(tails):
            return None
        points = [self.source]
        for idx in forced:
            points.extend(self.edges[idx])
        points.append(self.sink)
        banned = set(fout)
        by_length = cardinality is not None
        segs = [self._segment(points[2 * s], points[2 * s + 1], w, banned, by_length)
                for s in range(len(points) // 2)]
        if any(s is None for s in segs):
            return None
        if not by_length:
            edges = []
            for s, seg in enumerate(segs):
                edges.extend(seg[1])
                if s < len(forced):
                    edges.append(forced[s])
            return Action.from_support(self.d, edges)
        # max-plus convolution of segment tables over total length
        total = {0: (0.0, [])}
        for s, seg in enumerate(segs):
            extra = [forced[s]] if s < len(forced) else []
            nxt = {}
            for l1, (v1, e1) in total.items():
                for l2, (v2, e2) in seg.items():
                    l = l1 + l2 + len(extra)
                    val = v1 + v2 + sum(w[i] for i in extra)
                    if l not in nxt or val > nxt[l][0]:
                        nxt[l] = (val, e1 + e2 + extra)
            total = nxt
        if cardinality not in total:
            return None
        return Action.from_support(self.d, total[cardinality][1])

    def k_best(self, weights, k, cardinality=None):
        """Deviation-based k-best: children share a prefix and leave its end by a new edge."""
        if k < 1:
            raise ValueError("k must be at least 1")
        w = self._check_weights(weights)
        first = self._canonical(w, frozenset(), frozenset(), cardinality)
        if first is None:
            return []
        counter = itertools.count()
        heap = [(-first[1], first[0].mask, next(counter), first[0], 0, frozenset())]
        out = []
        while heap and len(out) < k:
            negv, _, _, x, plen, banned = heapq.heappop(heap)
            out.append((x, -negv))
            if len(out) == k:
                break
            path = self.path_order(x)
            for j in range(plen, len(path)):
                ban = (banned | {path[j]}) if j == plen else frozenset({path[j]})
                res = self._canonical(w, frozenset(path[:j]), ban, cardinality)
                if res is not None:
                    heapq.heappush(heap, (-res[1], res[0].mask, next(counter), res[0], j, ban))
        return out

    def _enumerate(self):
        def walk(node, acc):
            if node == self.sink:
                yield Action.from_support(self.d, acc)
                return
            for idx in self._out[node]:
                yield from walk(self.edges[idx][1], acc + [idx])
        yield from walk(self.source, [])

    def to_json(self):
        return {"type": "dagpath", "edges": [list(e) for e in self.edges],
                "source": self.source, "sink": self.sink}


def space_from_json(d: int, spec: dict) -> ActionSpace:
    kind = spec.get("type")
    if kind == "topk":
        space = TopK(d, spec["k"])
    elif kind == "partition":
        space = PartitionMatroid(spec["boundaries"])
    elif kind == "matching":
        space = PerfectMatching(spec["n"])
    elif kind == "dagpath":
        space = DagPaths([tuple(e) for e in spec["edges"]], spec["source"], spec["sink"])
    else:
        raise ValueError(f"unknown structure type {kind!r}")
    if space.d != d:
        raise ValueError(f"structure {kind} implies d={space.d}, instance declares d={d}")
    return space


# -- functional surface -------------------------------------------------------------

def maximize(space: ActionSpace, q: ConstrainedQuery) -> tuple[Action, float] | None:
    return space.maximize(q.weights, q.forced_in, q.forced_out)


def k_best(space: ActionSpace, weights, k: int) -> list[tuple[Action, float]]:
    return space.k_best(weights, k)


def count(space: ActionSpace) -> int:
    return space.count()


def _greedy_basis(space: ActionSpace, tol: float = 1e-9) -> tuple[list[Action], np.ndarray]:
    d = space.d
    basis: list[Action] = []
    Q = np.zeros((d, 0))
    grew = True
    while grew:
        grew = False
        for i in range(d):
            while True:
                e = np.zeros(d)
                e[i] = 1.0
                r = e - Q @ (Q.T @ e)
                if np.linalg.norm(r) < tol:
                    break
                # any maximizer will do here; skipping the canonical tie-break keeps this cheap
                none = frozenset()
                picks = [space._solve(r, none, none), space._solve(-r, none, none)]
                picks = [p for p in picks if p is not None]
                if not picks:
                    break
                x = max(picks, key=lambda a: (abs(float(r @ a.vector)), -a.mask))
                if abs(float(r @ x.vector)) < tol:
                    break
                v = x.vector - Q @ (Q.T @ x.vector)
                Q = np.column_stack([Q, v / np.linalg.norm(v)])
                basis.append(x)
                grew = True
    return basis, Q


def span_basis(space: ActionSpace) -> tuple[list[Action], np.ndarray]:
    """Linearly independent feasible actions spanning span(X), plus an orthonormal basis of it.

    Built greedily with the maximization oracle, never by enumerating X.
    """
    return _greedy_basis(space)


def rank_basis(space: ActionSpace) -> list[Action]:
    """``d`` feasible actions with linearly independent incidence vectors.

    Raises :class:`RankDeficiencyError` when X does not span R^d.
    """
    basis, Q = _greedy_basis(space)
    if len(basis) < space.d:
        resid = np.eye(space.d) - Q @ Q.T
        coord = int(np.argmax(np.linalg.norm(resid, axis=0) > 1e-9))
        raise RankDeficiencyError(coord, len(basis), space.d)
    return basis
