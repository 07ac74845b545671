"""Graphs, target graphs, colorings, and the path distance metrics.

Conventions
-----------
Vertices of the underlying graph are labeled ``1..n``; a coloring is a plain
tuple indexed ``0..n-1``, so vertex ``v`` carries color ``coloring[v-1]``.
Colors are ints: ``0..q-1`` for clique models, or vertex indices ``0..h-1``
of a target graph.

A proper 3-coloring of the path is equivalently encoded by its successive
color differences mod 3, mapped to signs (+1 for difference 1, -1 for
difference 2).  The map is exactly 3-to-1: the fibers are the cyclic color
shifts.  An integer height profile with unit increments refines the sign
encoding; it is unique up to adding a multiple of 6, and we fix the anchor
``h_1`` as the unique value in ``{0..5}`` with ``h_1`` odd and
``h_1 = coloring[0] (mod 3)``.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Optional, Sequence

Coloring = tuple[int, ...]
SignConfig = tuple[int, ...]
HeightFunction = tuple[int, ...]

DEFAULT_ENUMERATION_BUDGET = 2_000_000


class BudgetExceededError(RuntimeError):
    """Raised when an enumeration would exceed the configured state budget."""


class ImproperColoringError(ValueError):
    """Raised when an operation requires a proper path 3-coloring."""


# ---------------------------------------------------------------------------
# Graphs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Graph:
    """Finite simple undirected graph on vertices 1..n.

    ``kind`` is "path" when the edge set is exactly {(i, i+1) : 1 <= i < n},
    "general" otherwise.  Instances are immutable and safe to share.
    """

    n: int
    edges: frozenset[tuple[int, int]]
    kind: str = "general"

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("vertex count must be positive")
        norm = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (1 <= u <= self.n and 1 <= v <= self.n):
                raise ValueError(f"edge ({u}, {v}) leaves 1..{self.n}")
            norm.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(norm))
        if self.kind == "path":
            expected = {(i, i + 1) for i in range(1, self.n)}
            if set(self.edges) != expected:
                raise ValueError("kind='path' requires exactly the path edges")
        elif self.kind != "general":
            raise ValueError(f"unknown graph kind {self.kind!r}")

    @staticmethod
    def path(n: int) -> "Graph":
        return Graph(n, frozenset((i, i + 1) for i in range(1, n)), kind="path")

    @staticmethod
    def star(n: int) -> "Graph":
        """Star with center 1 and leaves 2..n."""
        return Graph(n, frozenset((1, v) for v in range(2, n + 1)))

    @staticmethod
    def from_edges(n: int, edges) -> "Graph":
        g = Graph(n, frozenset(tuple(e) for e in edges))
        expected = frozenset((i, i + 1) for i in range(1, n))
        if g.edges == expected:
            return Graph(n, expected, kind="path")
        return g

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        """adjacency[v] = sorted neighbors of vertex v; index 0 is unused."""
        nbrs: list[list[int]] = [[] for _ in range(self.n + 1)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return tuple(tuple(sorted(a)) for a in nbrs)

    @property
    def max_degree(self) -> int:
        return max((len(self.adjacency[v]) for v in range(1, self.n + 1)), default=0)

    @property
    def small_n_caveat(self) -> bool:
        """Reports should flag n <= 3 instances (boundary effects dominate)."""
        return self.n <= 3

    def to_text(self) -> str:
        """Edge-list serialization: one 'u v' pair per line."""
        return "\n".join(f"{u} {v}" for u, v in sorted(self.edges))

    @staticmethod
    def from_text(text: str, n: Optional[int] = None) -> "Graph":
        edges = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            u, v = map(int, line.split())
            edges.append((u, v))
        if n is None:
            n = max((max(e) for e in edges), default=1)
        return Graph.from_edges(n, edges)


@dataclass(frozen=True)
class TargetGraph:
    """Constraint graph H: colors are its vertices, allowed neighbor pairs its edges.

    Self-loops are allowed.  ``directed=True`` interprets the adjacency matrix
    as arcs; otherwise the matrix must be symmetric.
    """

    adjacency: tuple[tuple[bool, ...], ...]
    directed: bool = False

    def __post_init__(self) -> None:
        h = len(self.adjacency)
        if h < 1 or any(len(row) != h for row in self.adjacency):
            raise ValueError("adjacency must be a square matrix")
        object.__setattr__(
            self, "adjacency", tuple(tuple(bool(x) for x in row) for row in self.adjacency)
        )
        if not self.directed:
            for i in range(h):
                for j in range(h):
                    if self.adjacency[i][j] != self.adjacency[j][i]:
                        raise ValueError("undirected target graph must be symmetric")

    @property
    def h(self) -> int:
        return len(self.adjacency)

    def allows(self, c: int, d: int) -> bool:
        """True iff (c, d) is an edge/arc of H."""
        return self.adjacency[c][d]

    @staticmethod
    def clique(q: int) -> "TargetGraph":
        """K_q without self-loops; the proper q-coloring constraint."""
        return TargetGraph(tuple(tuple(i != j for j in range(q)) for i in range(q)))

    @staticmethod
    def cycle(h: int) -> "TargetGraph":
        return TargetGraph(
            tuple(
                tuple((abs(i - j) % h in (1, h - 1)) and i != j for j in range(h))
                for i in range(h)
            )
        )

    @staticmethod
    def single_edge() -> "TargetGraph":
        return TargetGraph(((False, True), (True, False)))

    @cached_property
    def is_connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in range(self.h):
                if v not in seen and (self.adjacency[u][v] or self.adjacency[v][u]):
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.h

    @cached_property
    def bipartition(self) -> Optional[tuple[frozenset[int], frozenset[int]]]:
        """(side containing vertex 0, other side) for bipartite undirected H, else None."""
        if self.directed:
            return None
        side = {0: 0}
        stack = [0]
        while stack:
            u = stack.pop()
            if self.adjacency[u][u]:
                return None
            for v in range(self.h):
                if self.adjacency[u][v]:
                    if v not in side:
                        side[v] = 1 - side[u]
                        stack.append(v)
                    elif side[v] == side[u]:
                        return None
        if len(side) != self.h:
            # disconnected: bipartiteness of the whole is not well-anchored
            return None
        s0 = frozenset(v for v, s in side.items() if s == 0)
        return s0, frozenset(range(self.h)) - s0

    @property
    def is_bipartite(self) -> bool:
        return self.bipartition is not None

    def to_text(self) -> str:
        """Adjacency-matrix block of 0/1 rows."""
        return "\n".join("".join("1" if x else "0" for x in row) for row in self.adjacency)

    @staticmethod
    def from_text(text: str, directed: bool = False) -> "TargetGraph":
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append(tuple(ch == "1" for ch in line.replace(" ", "")))
        return TargetGraph(tuple(rows), directed=directed)


# ---------------------------------------------------------------------------
# Colorings and enumeration
# ---------------------------------------------------------------------------

def coloring_to_text(coloring: Coloring) -> str:
    """Comma-separated integer serialization."""
    return ",".join(str(c) for c in coloring)


def coloring_from_text(text: str) -> Coloring:
    return tuple(int(x) for x in text.strip().split(","))


def is_proper(g: Graph, q: int, coloring: Coloring) -> bool:
    if len(coloring) != g.n or any(not (0 <= c < q) for c in coloring):
        return False
    return all(coloring[u - 1] != coloring[v - 1] for u, v in g.edges)


def is_h_valid(g: Graph, target: TargetGraph, coloring: Coloring) -> bool:
    """True iff the coloring maps every edge of g to an edge of H.

    For directed H the path edges are read left to right: (v, v+1) must map
    to an arc (coloring[v-1], coloring[v]); general graphs use the stored
    (u, v) orientation with u < v.
    """
    if len(coloring) != g.n or any(not (0 <= c < target.h) for c in coloring):
        return False
    return all(target.allows(coloring[u - 1], coloring[v - 1]) for u, v in g.edges)


def enumerate_colorings(
    g: Graph,
    q: int,
    proper_only: bool = True,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> list[Coloring]:
    """All q-colorings of g in lexicographic order, optionally proper only.

    Raises BudgetExceededError when the a-priori size bound (q(q-1)^(n-1)
    proper path colorings, q^n otherwise) exceeds the budget.
    """
    if q < 2:
        raise ValueError("q >= 2 required")
    if proper_only and g.kind == "path":
        size_bound = q * (q - 1) ** (g.n - 1)
    else:
        size_bound = q ** g.n
    if size_bound > budget:
        raise BudgetExceededError(f"{size_bound} colorings exceed budget {budget}")
    if not proper_only:
        return [tuple(c) for c in itertools.product(range(q), repeat=g.n)]
    adjacency = g.adjacency
    out: list[Coloring] = []
    partial = [0] * g.n

    def extend(v: int) -> None:
        if v > g.n:
            out.append(tuple(partial))
            return
        for c in range(q):
            if all(partial[u - 1] != c for u in adjacency[v] if u < v):
                partial[v - 1] = c
                extend(v + 1)

    extend(1)
    return out


def enumerate_h_colorings(
    g: Graph,
    target: TargetGraph,
    component: str = "all",
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> list[Coloring]:
    """All homomorphisms g -> H in lexicographic order.

    ``component`` selects a compatibility class for bipartite undirected H on
    a path: "side0"/"side1" keep colorings whose first vertex lies on the
    side of H-vertex 0 / the other side.
    """
    if component not in ("all", "side0", "side1"):
        raise ValueError(f"unknown component {component!r}")
    if component != "all":
        if target.bipartition is None:
            raise ValueError("component selection requires a bipartite target graph")
        if g.kind != "path":
            raise ValueError("component selection is defined for paths only")
    if target.h ** g.n > budget:
        raise BudgetExceededError(f"{target.h}**{g.n} colorings exceed budget {budget}")
    adjacency = g.adjacency
    out: list[Coloring] = []
    partial = [0] * g.n

    def ok(v: int, c: int) -> bool:
        # directed arcs follow the stored (u, v) orientation with u < v,
        # which on a path reads left to right
        return all(
            target.allows(partial[u - 1], c) for u in adjacency[v] if u < v
        )

    def extend(v: int) -> None:
        if v > g.n:
            out.append(tuple(partial))
            return
        for c in range(target.h):
            if ok(v, c):
                partial[v - 1] = c
                extend(v + 1)

    extend(1)
    if component == "all":
        return out
    side0, _side1 = target.bipartition
    keep0 = component == "side0"
    return [c for c in out if (c[0] in side0) == keep0]


# ---------------------------------------------------------------------------
# Sign and height encodings (q = 3 paths)
# ---------------------------------------------------------------------------

def _require_proper3(coloring: Coloring) -> None:
    if any(not (0 <= c < 3) for c in coloring):
        raise ImproperColoringError("colors must lie in {0,1,2}")
    if any(a == b for a, b in zip(coloring, coloring[1:])):
        raise ImproperColoringError("coloring is not proper on the path")


def to_signs(coloring: Coloring) -> SignConfig:
    """Successive-difference sign encoding of a proper path 3-coloring.

    signs[i] = +1 iff coloring[i+1] - coloring[i] = 1 (mod 3).
    """
    _require_proper3(coloring)
    return tuple(
        1 if (b - a) % 3 == 1 else -1 for a, b in zip(coloring, coloring[1:])
    )


def from_signs(signs: SignConfig, first_color: int) -> Coloring:
    """Inverse of to_signs given the first vertex color."""
    if not 0 <= first_color < 3:
        raise ValueError("first_color must lie in {0,1,2}")
    out = [first_color]
    for s in signs:
        if s not in (-1, 1):
            raise ValueError("signs must be +-1")
        out.append((out[-1] + (1 if s == 1 else 2)) % 3)
    return tuple(out)


def cyclic_shift(coloring: Coloring, s: int) -> Coloring:
    """Add s to every color mod 3."""
    return tuple((c + s) % 3 for c in coloring)


def height_of(coloring: Coloring) -> HeightFunction:
    """Canonical height profile of a proper path 3-coloring.

    Anchored at the unique h_1 in {0..5} with h_1 odd and h_1 = color mod 3;
    increments equal the sign encoding, so |h_i - h_{i+1}| = 1 along edges
    and h_i = i (mod 2), h_i = coloring[i-1] (mod 3) for every vertex.
    """
    signs = to_signs(coloring)
    h1 = next(h for h in range(6) if h % 2 == 1 and h % 3 == coloring[0] % 3)
    out = [h1]
    for s in signs:
        out.append(out[-1] + s)
    return tuple(out)


def all_height_anchors(coloring: Coloring) -> Iterator[HeightFunction]:
    """The canonical height profile and its shifts by multiples of 6 (lazy)."""
    base = height_of(coloring)
    k = 0
    while True:
        yield tuple(x + 6 * k for x in base)
        k += 1


# ---------------------------------------------------------------------------
# Vertex weights and the two path metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VertexWeights:
    """Positive rational per-vertex weights used by the weighted path metric."""

    weights: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        ws = tuple(Fraction(w) for w in self.weights)
        if not ws or any(w <= 0 for w in ws):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "weights", ws)

    def __len__(self) -> int:
        return len(self.weights)

    def __getitem__(self, i: int) -> Fraction:
        return self.weights[i]

    @property
    def w_min(self) -> Fraction:
        return min(self.weights)

    @staticmethod
    def uniform(n: int) -> "VertexWeights":
        return VertexWeights((Fraction(1),) * n)

    @staticmethod
    def glauber_q3(n: int) -> "VertexWeights":
        """Break-even weights for single random-site updates: (1/2, 1, ..., 1, 1/2)."""
        if n < 2:
            raise ValueError("n >= 2 required")
        return VertexWeights(
            (Fraction(1, 2),) + (Fraction(1),) * (n - 2) + (Fraction(1, 2),)
        )

    @staticmethod
    def scan_q3(n: int) -> "VertexWeights":
        """Break-even weights for left-to-right sweeps: (1/4, 1, ..., 1, 3/4)."""
        if n < 2:
            raise ValueError("n >= 2 required")
        return VertexWeights(
            (Fraction(1, 4),) + (Fraction(1),) * (n - 2) + (Fraction(3, 4),)
        )


def d1(sigma: Coloring, tau: Coloring) -> int:
    """Hamming distance between the sign encodings of two proper 3-colorings."""
    if len(sigma) != len(tau):
        raise ValueError("length mismatch")
    return sum(a != b for a, b in zip(to_signs(sigma), to_signs(tau)))


def _weighted_median(values: Sequence[int], weights: VertexWeights) -> int:
    items = sorted(zip(values, weights.weights))
    total = sum(w for _, w in items)
    acc = Fraction(0)
    for v, w in items:
        acc += w
        if 2 * acc >= total:
            return v
    return items[-1][0]


def optimal_height_pair(
    sigma: Coloring, tau: Coloring, weights: VertexWeights
) -> tuple[HeightFunction, HeightFunction, Fraction]:
    """Height profiles (h, h*) attaining the weighted height distance.

    Minimizes sum_i weights[i] * |h_i - h*_i| / 2 over the anchor freedom,
    which is exactly a shift of one profile by a multiple of 6.  The
    objective is convex piecewise-linear in the shift, so it suffices to
    evaluate the two multiples of 6 bracketing the weighted median of the
    height differences.
    """
    if len(sigma) != len(tau) or len(sigma) != len(weights):
        raise ValueError("length mismatch")
    h = height_of(sigma)
    hstar = height_of(tau)
    diffs = [a - b for a, b in zip(h, hstar)]
    med = _weighted_median(diffs, weights)
    s0 = 6 * math.floor(Fraction(med, 6))
    best: Optional[tuple[Fraction, int]] = None
    for s in (s0 - 6, s0, s0 + 6):
        val = sum(w * abs(d - s) for d, w in zip(diffs, weights.weights)) / 2
        if best is None or val < best[0]:
            best = (val, s)
    val, s = best
    return h, tuple(x + s for x in hstar), val


def d2(sigma: Coloring, tau: Coloring, weights: VertexWeights) -> Fraction:
    """Minimal weighted single-vertex move cost between two proper 3-colorings.

    Equals the minimum over height representatives of
    sum_i weights[i] * |h_i - h*_i| / 2.
    """
    return optimal_height_pair(sigma, tau, weights)[2]


def geodesic(
    sigma: Coloring,
    tau: Coloring,
    weights: VertexWeights,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> list[Coloring]:
    """A minimum-cost single-vertex move path from sigma to tau inside the
    proper colorings, realizing d2; Dijkstra over the weighted move graph.

    Returns the state sequence [sigma, ..., tau]; empty moves list when
    sigma == tau (the returned sequence is then just [sigma]).
    """
    n = len(sigma)
    if 3 ** n > budget:
        raise BudgetExceededError(f"3**{n} states exceed budget {budget}")
    _require_proper3(sigma)
    _require_proper3(tau)

    target_cost = d2(sigma, tau, weights)
    dist: dict[Coloring, Fraction] = {sigma: Fraction(0)}
    prev: dict[Coloring, Coloring] = {}
    counter = itertools.count()
    pq: list[tuple[Fraction, int, Coloring]] = [(Fraction(0), next(counter), sigma)]
    while pq:
        d, _, u = heapq.heappop(pq)
        if u == tau:
            break
        if d > dist[u]:
            continue
        for v in range(n):
            for c in range(3):
                if c == u[v]:
                    continue
                if v > 0 and u[v - 1] == c:
                    continue
                if v < n - 1 and u[v + 1] == c:
                    continue
                nxt = u[:v] + (c,) + u[v + 1:]
                nd = d + weights[v]
                if nxt not in dist or nd < dist[nxt]:
                    dist[nxt] = nd
                    prev[nxt] = u
                    heapq.heappush(pq, (nd, next(counter), nxt))
    if tau not in dist:
        raise RuntimeError("move graph is disconnected; cannot happen on a path")
    if dist[tau] != target_cost:
        raise AssertionError(
            f"geodesic cost {dist[tau]} does not match metric value {target_cost}"
        )
    path = [tau]
    while path[-1] != sigma:
        path.append(prev[path[-1]])
    path.reverse()
    return path
