"""Directed interaction graphs over a leader node v0 and n followers.

Node 0 is always the leader. Adjacency entries follow the convention
``weights[i, j] > 0`` iff node i receives information from node j, so row i
lists the in-neighbours of node i.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class NoSpanningTree(ValueError):
    """The graph has no directed spanning tree rooted at the leader."""


class NumericalFailure(RuntimeError):
    """No diagonal scaling certifying positive definiteness was found."""


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """Weighted digraph on nodes ``0..n_followers`` with node 0 the leader."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, copy=True)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise ValueError(f"adjacency must be square, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("adjacency weights must be finite and nonnegative")
        if np.any(np.diag(w) != 0):
            raise ValueError("self loops are not allowed (a_ii must be 0)")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_followers(self) -> int:
        return self.weights.shape[0] - 1

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_edges(cls, n_followers: int, edges: Iterable[tuple[int, int, float]]) -> "DirectedGraph":
        """Build from ``(src, dst, weight)`` triples; an edge src -> dst sets a[dst, src]."""
        w = np.zeros((n_followers + 1, n_followers + 1))
        for src, dst, weight in edges:
            if not (0 <= src <= n_followers and 0 <= dst <= n_followers):
                raise ValueError(f"edge ({src}, {dst}) outside node range 0..{n_followers}")
            if src == dst:
                raise ValueError(f"self loop on node {src}")
            w[dst, src] = weight
        return cls(w)

    def edges(self) -> list[tuple[int, int, float]]:
        dst, src = np.nonzero(self.weights)
        order = np.lexsort((dst, src))
        return [(int(src[k]), int(dst[k]), float(self.weights[dst[k], src[k]])) for k in order]

    def without_edges(self) -> "DirectedGraph":
        return DirectedGraph(np.zeros_like(self.weights))

    def __eq__(self, other):
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return self.weights.shape == other.weights.shape and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.weights.tobytes())


@dataclass(frozen=True, eq=False)
class LaplacianPartition:
    """Laplacian with the leader-first block split.

    ``L21`` is the n x 1 column of follower-to-leader couplings and ``L22`` the
    n x n follower block.
    """

    L: np.ndarray
    L21: np.ndarray
    L22: np.ndarray

    @property
    def n_followers(self) -> int:
        return self.L22.shape[0]

    def adjacency(self) -> np.ndarray:
        a = -np.array(self.L, dtype=float)
        np.fill_diagonal(a, 0.0)
        return a


def laplacian(g: DirectedGraph) -> LaplacianPartition:
    a = g.weights
    L = -a.copy()
    np.fill_diagonal(L, a.sum(axis=1))
    return LaplacianPartition(L=L, L21=L[1:, :1].copy(), L22=L[1:, 1:].copy())


def reachable_from(weights: np.ndarray, root: int) -> np.ndarray:
    """Boolean mask of nodes reachable from ``root`` along directed edges."""
    n = weights.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[root] = True
    frontier = [root]
    while frontier:
        nxt = []
        for j in frontier:
            # column j holds the out-edges of node j
            for i in np.flatnonzero(weights[:, j] > 0):
                if not seen[i]:
                    seen[i] = True
                    nxt.append(int(i))
        frontier = nxt
    return seen


def has_rooted_spanning_tree(g: DirectedGraph, root: int = 0) -> bool:
    if not 0 <= root < g.n_nodes:
        raise ValueError(f"root {root} is not a node of the graph")
    return bool(reachable_from(g.weights, root).all())


@dataclass(frozen=True)
class GammaCertificate:
    gamma: np.ndarray
    min_eig: float

    @property
    def gamma_bar(self) -> float:
        return float(np.max(self.gamma))

    @property
    def gamma_underbar(self) -> float:
        return float(np.min(self.gamma))

    def matrix(self) -> np.ndarray:
        return np.diag(self.gamma)


def _sym_min_eig(gamma: np.ndarray, L22: np.ndarray) -> float:
    S = gamma[:, None] * L22
    return float(np.linalg.eigvalsh(S + S.T)[0])


def _coordinate_search(L22: np.ndarray, rng: np.random.Generator, iters: int = 400) -> np.ndarray:
    n = L22.shape[0]
    best = np.ones(n)
    best_val = _sym_min_eig(best, L22)
    scale = 0.5
    for _ in range(iters):
        cand = best * np.exp(scale * rng.standard_normal(n))
        cand /= cand.max()
        val = _sym_min_eig(cand, L22)
        if val > best_val:
            best, best_val = cand, val
        else:
            scale = max(scale * 0.98, 1e-3)
    return best


def solve_gamma(part: LaplacianPartition, seed: int = 0) -> GammaCertificate:
    """Find diagonal Gamma > 0 with Gamma L22 + L22^T Gamma > 0, scaled to max 1.

    Candidates, in order: p with L22^T p = 1; p / q with L22 q = 1 (always valid
    for a nonsingular M-matrix); a randomized multiplicative search.
    """
    L = part.L
    if part.n_followers == 0:
        raise ValueError("graph has no followers")
    if np.any(L[0] != 0):
        raise NoSpanningTree("leader node has incoming edges; it cannot be the tree root")
    if not reachable_from(part.adjacency(), 0).all():
        raise NoSpanningTree("some follower is unreachable from the leader")
    L22 = part.L22
    ones = np.ones(L22.shape[0])
    candidates = []
    try:
        p = np.linalg.solve(L22.T, ones)
        q = np.linalg.solve(L22, ones)
        candidates = [p, p / q]
    except np.linalg.LinAlgError:
        pass
    for cand in candidates:
        if np.all(np.isfinite(cand)) and np.all(cand > 0):
            gamma = cand / cand.max()
            eig = _sym_min_eig(gamma, L22)
            if eig > 0:
                return GammaCertificate(gamma=gamma, min_eig=eig)
    gamma = _coordinate_search(L22, np.random.default_rng(seed))
    eig = _sym_min_eig(gamma, L22)
    if eig <= 0:
        raise NumericalFailure(f"best diagonal scaling reached min eigenvalue {eig:.3e}")
    return GammaCertificate(gamma=gamma, min_eig=eig)


@dataclass(frozen=True)
class SwitchingSignal:
    """Right-continuous piecewise-constant selection among ``topologies``.

    ``schedule`` holds ``(switch_time, topology_index)`` pairs; the first entry
    must start at t = 0.
    """

    topologies: tuple[DirectedGraph, ...]
    schedule: tuple[tuple[float, int], ...]
    dwell_floor: float = 0.0
    _times: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "topologies", tuple(self.topologies))
        sched = tuple((float(t), int(k)) for t, k in self.schedule)
        object.__setattr__(self, "schedule", sched)
        if not self.topologies:
            raise ValueError("switching signal needs at least one topology")
        if not sched or sched[0][0] != 0.0:
            raise ValueError("schedule must start with an entry at t = 0")
        sizes = {g.n_nodes for g in self.topologies}
        if len(sizes) != 1:
            raise ValueError("all topologies must share the node set")
        times = [t for t, _ in sched]
        for k in (k for _, k in sched):
            if not 0 <= k < len(self.topologies):
                raise ValueError(f"topology index {k} out of range")
        gaps = np.diff(times)
        if np.any(gaps < 0):
            raise ValueError("switch times must be nondecreasing")
        if np.any(gaps <= self.dwell_floor):
            raise ValueError(f"consecutive switches closer than the dwell floor {self.dwell_floor}")
        object.__setattr__(self, "_times", tuple(times))

    @classmethod
    def constant(cls, graph: DirectedGraph) -> "SwitchingSignal":
        return cls(topologies=(graph,), schedule=((0.0, 0),))

    @classmethod
    def periodic(cls, topologies: Sequence[DirectedGraph], period: float, t_end: float,
                 dwell_floor: float = 0.0) -> "SwitchingSignal":
        """Round-robin over ``topologies``, switching every ``period`` seconds up to ``t_end``."""
        m = len(topologies)
        n_seg = max(1, int(np.ceil(t_end / period - 1e-12)))
        sched = [(k * period, k % m) for k in range(n_seg)]
        return cls(topologies=tuple(topologies), schedule=tuple(sched), dwell_floor=dwell_floor)

    def index_at(self, t: float) -> int:
        if t < 0:
            raise ValueError("t must be nonnegative")
        pos = bisect.bisect_right(self._times, t) - 1
        return self.schedule[pos][1]

    def switch_times(self) -> list[float]:
        """Instants where the active topology actually changes."""
        out = []
        prev = None
        for t, k in self.schedule:
            if prev is not None and k != prev:
                out.append(t)
            prev = k
        return out

    def min_gap(self) -> float:
        times = self.switch_times()
        if len(times) < 2:
            return float("inf")
        return float(np.min(np.diff(times)))


def topology_at(sig: SwitchingSignal, t: float) -> DirectedGraph:
    return sig.topologies[sig.index_at(t)]


# -- edge list and schedule files -----------------------------------------

def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def parse_edge_list(text: str, n_followers: int | None = None) -> DirectedGraph:
    """Parse lines of ``src dst weight``; ``#`` starts a comment.

    A line ``nodes N`` may declare the follower count; otherwise it is the
    largest node index seen.
    """
    edges = []
    declared = n_followers
    for lineno, line in _content_lines(text):
        parts = line.split()
        if parts[0] == "nodes" and len(parts) == 2:
            declared = int(parts[1])
            continue
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'src dst weight', got {line!r}")
        try:
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if declared is None:
        declared = max((max(s, d) for s, d, _ in edges), default=0)
    return DirectedGraph.from_edges(declared, edges)


def format_edge_list(g: DirectedGraph) -> str:
    lines = [f"nodes {g.n_followers}"]
    lines += [f"{s} {d} {w:.17g}" for s, d, w in g.edges()]
    return "\n".join(lines) + "\n"


def parse_schedule(text: str) -> list[tuple[float, int]]:
    out = []
    for lineno, line in _content_lines(text):
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'time index', got {line!r}")
        out.append((float(parts[0]), int(parts[1])))
    return out


def format_schedule(schedule: Iterable[tuple[float, int]]) -> str:
    return "".join(f"{t:.17g} {k}\n" for t, k in schedule)


def read_graph(path: str | Path, n_followers: int | None = None) -> DirectedGraph:
    return parse_edge_list(Path(path).read_text(), n_followers)


def write_graph(path: str | Path, g: DirectedGraph) -> None:
    Path(path).write_text(format_edge_list(g))
