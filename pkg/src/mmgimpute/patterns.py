"""Response patterns and the graph-driven pattern algebra.

A :class:`Pattern` is a length-``d`` binary vector stored as a bitmask. The
same type serves three roles:

* response pattern ``r`` (1 = observed),
* connected pattern ``s`` (1 = member of one connected component of the
  missing set),
* model pattern ``m`` (1 = must be observed to fit the submodel for ``s``).

String form follows variable order, so ``"00110"`` observes the third and
fourth variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from .exceptions import InvalidArgumentError
from .graph import MAX_VARIABLES, UndirectedGraph, indices_of, mask_of

Comparison = Literal["greater", "less", "equal", "incomparable"]


@dataclass(frozen=True, order=False)
class Pattern:
    d: int
    bits: int

    def __post_init__(self):
        if not 0 <= self.d <= MAX_VARIABLES:
            raise InvalidArgumentError(f"pattern length must be in 0..{MAX_VARIABLES}")
        if self.bits < 0 or self.bits >> self.d:
            raise InvalidArgumentError(f"bits {self.bits:#x} do not fit in length {self.d}")

    @classmethod
    def from_str(cls, text: str) -> "Pattern":
        text = text.strip()
        if any(c not in "01" for c in text):
            raise InvalidArgumentError(f"pattern string must be binary, got {text!r}")
        bits = sum(1 << j for j, c in enumerate(text) if c == "1")
        return cls(len(text), bits)

    @classmethod
    def from_indices(cls, d: int, indices: Iterable[int]) -> "Pattern":
        return cls(d, mask_of(indices, d))

    @classmethod
    def from_mask(cls, mask: Sequence[bool] | np.ndarray) -> "Pattern":
        mask = np.asarray(mask, dtype=bool)
        return cls(len(mask), mask_of(np.flatnonzero(mask), len(mask)))

    @classmethod
    def full(cls, d: int) -> "Pattern":
        return cls(d, (1 << d) - 1)

    @classmethod
    def empty(cls, d: int) -> "Pattern":
        return cls(d, 0)

    def __str__(self) -> str:
        return "".join("1" if self.bits >> j & 1 else "0" for j in range(self.d))

    def __repr__(self) -> str:
        return f"Pattern('{self}')"

    def __contains__(self, j: int) -> bool:
        return 0 <= j < self.d and bool(self.bits >> j & 1)

    def __len__(self) -> int:
        return self.d

    def __or__(self, other: "Pattern") -> "Pattern":
        self._check(other)
        return Pattern(self.d, self.bits | other.bits)

    def __and__(self, other: "Pattern") -> "Pattern":
        self._check(other)
        return Pattern(self.d, self.bits & other.bits)

    @property
    def indices(self) -> tuple[int, ...]:
        return indices_of(self.bits)

    @property
    def count(self) -> int:
        return bin(self.bits).count("1")

    def complement(self) -> "Pattern":
        return Pattern(self.d, ~self.bits & ((1 << self.d) - 1))

    def to_mask(self) -> np.ndarray:
        return np.array([self.bits >> j & 1 for j in range(self.d)], dtype=bool)

    def covers(self, other: "Pattern") -> bool:
        """True if every 1 of ``other`` is also a 1 here (``self >= other``)."""
        self._check(other)
        return other.bits & ~self.bits == 0

    def sort_key(self) -> tuple:
        return (self.count, self.indices)

    def _check(self, other: "Pattern") -> None:
        if self.d != other.d:
            raise InvalidArgumentError(f"pattern length mismatch: {self.d} vs {other.d}")


def as_pattern(value, d: int | None = None) -> Pattern:
    """Coerce a ``Pattern``, bit string, or boolean mask to :class:`Pattern`."""
    if isinstance(value, Pattern):
        p = value
    elif isinstance(value, str):
        p = Pattern.from_str(value)
    else:
        p = Pattern.from_mask(value)
    if d is not None and p.d != d:
        raise InvalidArgumentError(f"pattern length {p.d} != {d}")
    return p


def neighbors(g: UndirectedGraph, subset) -> frozenset[int]:
    return g.neighbors(subset)


def closed_neighborhood(g: UndirectedGraph, subset) -> frozenset[int]:
    return g.closed_neighborhood(subset)


def missing_components(g: UndirectedGraph, r: Pattern) -> list[Pattern]:
    """Connected patterns of the missing set of response pattern ``r``.

    Ordered by smallest member; they partition ``r.complement()``.
    """
    _check_len(g, r)
    missing = r.complement().bits
    return [Pattern(g.d, c) for c in g.components_of_mask(missing)]


def psi(g: UndirectedGraph, missing: Pattern, target: int) -> Pattern:
    """Component of the missing-set indicator ``missing`` that contains ``target``."""
    _check_len(g, missing)
    if target not in missing:
        raise InvalidArgumentError(f"variable {target} is not set in {missing}")
    for c in g.components_of_mask(missing.bits):
        if c >> target & 1:
            return Pattern(g.d, c)
    raise AssertionError("unreachable")


def pattern_compare(r1: Pattern, r2: Pattern) -> Comparison:
    if r1.d != r2.d:
        raise InvalidArgumentError(f"pattern length mismatch: {r1.d} vs {r2.d}")
    if r1.bits == r2.bits:
        return "equal"
    if r1.covers(r2):
        return "greater"
    if r2.covers(r1):
        return "less"
    return "incomparable"


def model_pattern_of(g: UndirectedGraph, s: Pattern) -> Pattern:
    """Required-observed pattern for connected pattern ``s``: ``s`` plus its neighbors."""
    _check_len(g, s)
    if not g.is_connected_mask(s.bits):
        raise InvalidArgumentError(f"{s} is not a connected vertex set of the graph")
    return Pattern(g.d, s.bits | g.neighbor_mask(s.bits))


def boundary(g: UndirectedGraph, s: Pattern) -> Pattern:
    _check_len(g, s)
    return Pattern(g.d, g.neighbor_mask(s.bits))


def factorization(g: UndirectedGraph, r: Pattern) -> list[tuple[Pattern, tuple[int, ...]]]:
    """Imputation factors for response pattern ``r``.

    Each entry is ``(s, conditioning_indices)`` where the conditioning set is
    the boundary of the connected pattern ``s``.
    """
    return [(s, boundary(g, s).indices) for s in missing_components(g, r)]


def occurring_components(
    g: UndirectedGraph, patterns: Iterable[Pattern], target: int
) -> list[Pattern]:
    """Distinct target-containing components realized by the given patterns.

    Only patterns with ``target`` missing contribute. Sorted by size, then
    by member indices.
    """
    if not 0 <= target < g.d:
        raise InvalidArgumentError(f"target {target} outside 0..{g.d - 1}")
    seen = set()
    for r in patterns:
        _check_len(g, r)
        if target in r:
            continue
        seen.add(psi(g, r.complement(), target))
    return sorted(seen, key=Pattern.sort_key)


def _check_len(g: UndirectedGraph, p: Pattern) -> None:
    if p.d != g.d:
        raise InvalidArgumentError(f"pattern length {p.d} != graph size {g.d}")
