"""Undirected graphs over study variables and the edge-list file format.

Vertices are 0-based column indices in the Python API. The on-disk edge
list is 1-based::

    # comment lines are ignored
    d 5
    1 2
    1 3

Vertex sets are handled internally as integer bitmasks (bit ``j`` set means
variable ``j`` is in the set), so ``d`` is capped at :data:`MAX_VARIABLES`.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable

from .exceptions import InvalidArgumentError, ParseError

MAX_VARIABLES = 64


def mask_of(indices: Iterable[int], d: int) -> int:
    bits = 0
    for j in indices:
        j = int(j)
        if not 0 <= j < d:
            raise InvalidArgumentError(f"vertex index {j} outside 0..{d - 1}")
        bits |= 1 << j
    return bits


def indices_of(bits: int) -> tuple[int, ...]:
    out = []
    j = 0
    while bits:
        if bits & 1:
            out.append(j)
        bits >>= 1
        j += 1
    return tuple(out)


@dataclass(frozen=True)
class UndirectedGraph:
    """Simple undirected graph on vertices ``0..d-1``.

    Parameters
    ----------
    d : int
        Number of vertices (study variables).
    edges : iterable of pairs
        Unordered vertex pairs. Stored normalized as ``(u, v)`` with ``u < v``.
    """

    d: int
    edges: frozenset = field(default_factory=frozenset)
    _adj: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= self.d <= MAX_VARIABLES:
            raise InvalidArgumentError(f"d must be in 0..{MAX_VARIABLES}, got {self.d}")
        norm = set()
        for e in self.edges:
            u, v = (int(x) for x in e)
            if u == v:
                raise InvalidArgumentError(f"self-loop on vertex {u}")
            if not (0 <= u < self.d and 0 <= v < self.d):
                raise InvalidArgumentError(f"edge ({u}, {v}) outside 0..{self.d - 1}")
            norm.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(norm))
        adj = [0] * self.d
        for u, v in norm:
            adj[u] |= 1 << v
            adj[v] |= 1 << u
        object.__setattr__(self, "_adj", tuple(adj))

    @classmethod
    def complete(cls, d: int) -> "UndirectedGraph":
        return cls(d, frozenset(combinations(range(d), 2)))

    @classmethod
    def chain(cls, d: int) -> "UndirectedGraph":
        return cls(d, frozenset((j, j + 1) for j in range(d - 1)))

    @classmethod
    def from_edges_1based(cls, d: int, edges) -> "UndirectedGraph":
        return cls(d, frozenset((u - 1, v - 1) for u, v in edges))

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def adjacency_mask(self, v: int) -> int:
        return self._adj[v]

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self._adj[u] >> v & 1)

    def neighbor_mask(self, bits: int) -> int:
        """Bitmask of vertices outside ``bits`` adjacent to some vertex in it."""
        out = 0
        rest = bits
        j = 0
        while rest:
            if rest & 1:
                out |= self._adj[j]
            rest >>= 1
            j += 1
        return out & ~bits

    def neighbors(self, subset) -> frozenset[int]:
        """Open neighborhood of a vertex subset.

        ``subset`` may be an iterable of vertex indices or a ``Pattern``.
        """
        bits = self._bits(subset)
        return frozenset(indices_of(self.neighbor_mask(bits)))

    def closed_neighborhood(self, subset) -> frozenset[int]:
        bits = self._bits(subset)
        return frozenset(indices_of(self.neighbor_mask(bits) | bits))

    def components_of_mask(self, bits: int) -> list[int]:
        """Connected components of the subgraph induced by ``bits``.

        Returned as bitmasks ordered by smallest member.
        """
        comps = []
        remaining = bits
        while remaining:
            seed = remaining & -remaining
            comp = seed
            frontier = seed
            while frontier:
                grown = self.neighbor_mask(frontier) & bits & ~comp
                comp |= grown
                frontier = grown
            comps.append(comp)
            remaining &= ~comp
        return comps

    def is_connected_mask(self, bits: int) -> bool:
        return bits != 0 and len(self.components_of_mask(bits)) == 1

    def _bits(self, subset) -> int:
        if hasattr(subset, "bits") and hasattr(subset, "d"):
            if subset.d != self.d:
                raise InvalidArgumentError(f"pattern length {subset.d} != graph size {self.d}")
            return subset.bits
        return mask_of(subset, self.d)

    def to_dict(self) -> dict:
        """JSON-ready form with 1-based edges."""
        return {"d": self.d, "edges": [[u + 1, v + 1] for u, v in self.sorted_edges()]}

    @classmethod
    def from_dict(cls, obj: dict) -> "UndirectedGraph":
        return cls.from_edges_1based(int(obj["d"]), [tuple(e) for e in obj["edges"]])


def format_graph(g: UndirectedGraph) -> str:
    lines = [f"d {g.d}"]
    lines += [f"{u + 1} {v + 1}" for u, v in g.sorted_edges()]
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> UndirectedGraph:
    d = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        if d is None:
            if len(tok) != 2 or tok[0] != "d":
                raise ParseError("first non-comment line must be 'd <vertex-count>'", line=lineno)
            try:
                d = int(tok[1])
            except ValueError:
                raise ParseError(f"bad vertex count {tok[1]!r}", line=lineno) from None
            if not 0 <= d <= MAX_VARIABLES:
                raise ParseError(f"vertex count must be in 0..{MAX_VARIABLES}", line=lineno)
            continue
        if len(tok) != 2:
            raise ParseError(f"expected 'u v', got {line!r}", line=lineno)
        try:
            u, v = int(tok[0]), int(tok[1])
        except ValueError:
            raise ParseError(f"non-integer vertex in {line!r}", line=lineno) from None
        if u == v:
            raise ParseError(f"self-loop on vertex {u}", line=lineno)
        if not (1 <= u <= d and 1 <= v <= d):
            raise ParseError(f"vertex out of range 1..{d} in {line!r}", line=lineno)
        edges.append((u - 1, v - 1))
    if d is None:
        raise ParseError("missing 'd <vertex-count>' header")
    return UndirectedGraph(d, frozenset(edges))


def read_graph(path: str | os.PathLike) -> UndirectedGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh.read())


def write_graph(g: UndirectedGraph, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_graph(g))
