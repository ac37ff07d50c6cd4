"""Neighborhood anonymity of configurations and the structural predicates
that decide it: unique neighborhoods, triangles, pentagonal geometries,
the anonymity characterization and transversal design recognition."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from functools import reduce
from itertools import combinations

from upir_lab.errors import AnonymityLevelError
from upir_lab.incidence import (
    Configuration,
    GroupedConfiguration,
    closed_neighborhood,
    neighborhood,
)


class Mode(str, Enum):
    OPEN = "open"
    CLOSED = "closed"


def mode_for(protocol: str) -> Mode:
    """UPIR 1 leaks neighborhoods, UPIR 2 closed neighborhoods."""
    protocol = str(getattr(protocol, "value", protocol)).lower()
    if protocol == "upir1":
        return Mode.OPEN
    if protocol == "upir2":
        return Mode.CLOSED
    raise ValueError(f"unknown protocol {protocol!r}; expected upir1 or upir2")


def mode_neighborhood(config: Configuration, p: int, mode: Mode) -> frozenset[int]:
    """N(p) in OPEN mode, CN(p) in CLOSED mode."""
    if Mode(mode) is Mode.OPEN:
        return neighborhood(config, p)
    return closed_neighborhood(config, p)


@dataclass(frozen=True)
class AnonymityPartition:
    mode: Mode
    parts: tuple[tuple[int, ...], ...]

    @property
    def level(self) -> int:
        return min(len(part) for part in self.parts)

    def part_of(self, p: int) -> tuple[int, ...]:
        for part in self.parts:
            if p in part:
                return part
        raise IndexError(f"point {p} is in no part")


def anonymity_partition(config: Configuration, mode: Mode) -> AnonymityPartition:
    """Group points by equal (closed) neighborhood, parts ordered by smallest member."""
    mode = Mode(mode)
    classes: dict[frozenset[int], list[int]] = {}
    for point in range(config.v):
        classes.setdefault(mode_neighborhood(config, point, mode), []).append(point)
    return AnonymityPartition(mode, tuple(tuple(points) for points in classes.values()))


def has_unique_neighborhoods(config: Configuration, mode: Mode) -> bool:
    return all(len(part) == 1 for part in anonymity_partition(config, mode).parts)


def is_triangle_free(config: Configuration) -> bool:
    """True when no three points are pairwise collinear on three distinct lines."""
    line_of_pair = config.line_of_pair
    for p in range(config.v):
        later = sorted(q for q in config.neighborhoods[p] if q > p)
        for q, s in combinations(later, 2):
            if (q, s) in line_of_pair and line_of_pair[(p, q)] != line_of_pair[(p, s)]:
                logging.debug("Triangle %d, %d, %d", p, q, s)
                return False
    return True


@dataclass(frozen=True)
class PentagonalReport:
    is_pentagonal: bool
    opposite_line: tuple[int | None, ...]
    opposite_line_pairs: tuple[tuple[int, int], ...]


def pentagonal_report(config: Configuration) -> PentagonalReport:
    """Find each point's opposite line and the mutually opposite line pairs.

    A point's opposite line is the line whose points are exactly those outside
    its closed neighborhood; a pair ``(l, l')`` is opposite when every point of
    ``l`` has opposite line ``l'`` and vice versa.
    """
    index_of = {frozenset(line): index for index, line in enumerate(config.lines)}
    everything = frozenset(range(config.v))
    opposite = tuple(
        index_of.get(everything - closed_neighborhood(config, p)) for p in range(config.v)
    )

    def common_opposite(line_index: int) -> int | None:
        found = {opposite[p] for p in config.lines[line_index]}
        return found.pop() if len(found) == 1 else None

    pairs = []
    for index in range(config.b):
        other = common_opposite(index)
        if other is not None and index < other and common_opposite(other) == index:
            pairs.append((index, other))
    return PentagonalReport(
        is_pentagonal=all(line is not None for line in opposite),
        opposite_line=opposite,
        opposite_line_pairs=tuple(pairs),
    )


@dataclass(frozen=True)
class CharacterizationReport:
    n: int
    m: int
    r: int
    k: int
    parts_non_collinear: bool
    r_at_least_n: bool
    m_at_least_k: bool
    r_equals_n: bool
    m_equals_k: bool
    is_optimal: bool


def check_characterization(config: Configuration) -> CharacterizationReport:
    """Verify the necessary conditions on an n-anonymous configuration (n >= 2).

    ``is_optimal`` records whether the anonymity set and the neighborhood of a
    point together cover the whole point set, v = n + r(k - 1).
    """
    partition = anonymity_partition(config, Mode.OPEN)
    n = partition.level
    if n < 2:
        raise AnonymityLevelError(
            "characterization needs n-anonymous neighborhoods with n >= 2 (level is 1)"
        )
    non_collinear = all(
        config.line_of_pair.get(pair) is None
        for part in partition.parts
        for pair in combinations(part, 2)
    )
    m = len(partition.parts)
    return CharacterizationReport(
        n=n,
        m=m,
        r=config.r,
        k=config.k,
        parts_non_collinear=non_collinear,
        r_at_least_n=config.r >= n,
        m_at_least_k=m >= config.k,
        r_equals_n=config.r == n,
        m_equals_k=m == config.k,
        is_optimal=config.v == n + config.r * (config.k - 1),
    )


def is_transversal_design(config: Configuration) -> GroupedConfiguration | None:
    """Recover the groups when the configuration is a TD(k, n), else ``None``."""
    partition = anonymity_partition(config, Mode.OPEN)
    n = partition.level
    sizes = {len(part) for part in partition.parts}
    if n < 2 or sizes != {n} or len(partition.parts) != config.k or config.r != n:
        return None
    part_of = {p: index for index, part in enumerate(partition.parts) for p in part}
    for line in config.lines:
        if sorted(part_of[p] for p in line) != list(range(config.k)):
            return None
    for p, q in combinations(range(config.v), 2):
        if part_of[p] != part_of[q] and (p, q) not in config.line_of_pair:
            return None
    return GroupedConfiguration(config, partition.parts)


def structural_anonymity_set(config: Configuration, owner: int, mode: Mode) -> frozenset[int]:
    """Intersection of the (closed) neighborhoods of the owner's possible proxies.

    This is the smallest anonymity set an intersection attack can ever reach.
    """
    mode = Mode(mode)
    proxies = mode_neighborhood(config, owner, mode)
    return reduce(
        frozenset.intersection, (mode_neighborhood(config, p, mode) for p in proxies)
    )
