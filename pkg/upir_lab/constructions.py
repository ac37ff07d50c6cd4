"""Concrete configurations: affine planes, transversal designs, the small
exemplars and the extension to anonymous closed neighborhoods.

Lines are computed in ``galois.GF(q)`` for prime ``q``. ``UPIR_LAB_MAX_POINTS``
caps the number of points any constructor will materialize.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Iterable

import galois
import numpy as np

from upir_lab.errors import (
    DivisibilityError,
    NotPrimeError,
    ParameterError,
    PartitionError,
    ResourceLimitError,
)
from upir_lab.incidence import (
    Configuration,
    GroupedConfiguration,
    IncidenceStructure,
    Line,
    as_configuration,
    is_parallel_class,
)

DEFAULT_MAX_POINTS = 10000

# Line set of the (36, 72, 6, 3)-configuration with 3-anonymous neighborhoods,
# one-based as published.
_EXAMPLE_36 = (
    (1, 4, 7), (1, 5, 8), (1, 6, 9), (2, 4, 8), (2, 5, 9), (2, 6, 7),
    (3, 4, 9), (3, 5, 7), (3, 6, 8), (1, 10, 13), (1, 11, 14), (1, 12, 15),
    (2, 10, 14), (2, 11, 15), (2, 12, 13), (3, 10, 15), (3, 11, 13), (3, 12, 14),
    (4, 16, 19), (4, 17, 20), (4, 18, 21), (5, 16, 20), (5, 17, 21), (5, 18, 19),
    (6, 16, 21), (6, 17, 19), (6, 18, 20), (7, 22, 25), (7, 23, 26), (7, 24, 27),
    (8, 22, 26), (8, 23, 27), (8, 24, 25), (9, 22, 27), (9, 23, 25), (9, 24, 26),
    (10, 28, 31), (10, 29, 32), (10, 30, 33), (11, 28, 32), (11, 29, 33), (11, 30, 31),
    (12, 28, 33), (12, 29, 31), (12, 30, 32), (13, 16, 34), (13, 17, 35), (13, 18, 36),
    (14, 16, 35), (14, 17, 36), (14, 18, 34), (15, 16, 36), (15, 17, 34), (15, 18, 35),
    (19, 22, 31), (19, 23, 32), (19, 24, 33), (20, 22, 32), (20, 23, 33), (20, 24, 31),
    (21, 22, 33), (21, 23, 31), (21, 24, 32), (25, 28, 34), (25, 29, 35), (25, 30, 36),
    (26, 28, 35), (26, 29, 36), (26, 30, 34), (27, 28, 36), (27, 29, 34), (27, 30, 35),
)

_FANO_LINES = ((0, 1, 2), (0, 3, 4), (0, 5, 6), (1, 3, 5), (1, 4, 6), (2, 3, 6), (2, 4, 5))


@dataclass(frozen=True)
class ParallelClassLabeling:
    classes: tuple[tuple[int, ...], ...]

    def is_resolution(self, config: Configuration) -> bool:
        """True when the classes are parallel classes splitting every line once."""
        indices = sorted(index for group in self.classes for index in group)
        return indices == list(range(config.b)) and all(
            is_parallel_class(config, group) for group in self.classes
        )


def is_prime(q: int) -> bool:
    return q >= 2 and galois.is_prime(q)


def _require_prime(q: int) -> None:
    if not is_prime(q):
        raise NotPrimeError(f"order must be prime (got {q})")


def max_points() -> int:
    """Read ``UPIR_LAB_MAX_POINTS``, defaulting to ``DEFAULT_MAX_POINTS``."""
    raw = os.getenv("UPIR_LAB_MAX_POINTS", str(DEFAULT_MAX_POINTS))
    try:
        limit = int(raw)
    except ValueError:
        limit = 0
    if limit <= 0:
        raise ParameterError(f"UPIR_LAB_MAX_POINTS must be a positive integer (got {raw!r})")
    return limit


def _check_size(points: int) -> None:
    limit = max_points()
    if points > limit:
        raise ResourceLimitError(f"{points} points exceed UPIR_LAB_MAX_POINTS={limit}")


def _slope_lines(order: int, columns: int) -> list[list[Line]]:
    """Lines ``y = a x + c`` over ``GF(order)`` cut to ``x < columns``, grouped by slope."""
    field = galois.GF(order)
    xs = field.elements[:columns]
    offsets = np.arange(columns) * order
    return [
        [
            tuple(int(index) for index in offsets + (slope * xs + c).view(np.ndarray))
            for c in field.elements
        ]
        for slope in field.elements
    ]


def _canonical_with_labels(
    point_count: int, classes: list[list[Line]]
) -> tuple[IncidenceStructure, tuple[tuple[int, ...], ...]]:
    flat = [line for group in classes for line in group]
    structure = IncidenceStructure(point_count, tuple(flat)).canonical()
    index_of = {line: index for index, line in enumerate(structure.lines)}
    labels = tuple(tuple(sorted(index_of[line] for line in group)) for group in classes)
    return structure, labels


def affine_plane(q: int) -> tuple[Configuration, ParallelClassLabeling]:
    """The affine plane of prime order ``q`` with its slope resolution.

    Point ``(x, y)`` has index ``x * q + y``. ``classes[a]`` holds the lines
    ``y = a x + c`` and ``classes[q]`` the verticals ``x = c``.
    """
    _require_prime(q)
    _check_size(q * q)
    classes = _slope_lines(q, q)
    classes.append([tuple(c * q + y for y in range(q)) for c in range(q)])
    structure, labels = _canonical_with_labels(q * q, classes)
    config = as_configuration(structure)
    logging.info("Built affine plane of order %d: %s", q, config.parameters)
    return config, ParallelClassLabeling(labels)


def transversal_design(k: int, n: int) -> GroupedConfiguration:
    """TD(k, n) carved from the affine plane of order ``n``.

    The kept points are those on the verticals ``x = 0..k-1``, which become
    the groups; every non-vertical line restricted to them is a block. Point
    ``(x, y)`` keeps index ``x * n + y``.
    """
    if not 2 <= k <= n:
        raise ParameterError(f"transversal design needs 2 <= k <= n (got k={k}, n={n})")
    _require_prime(n)
    _check_size(n * n)
    lines = [line for parallel in _slope_lines(n, k) for line in parallel]
    structure = IncidenceStructure.from_lines(k * n, lines).canonical()
    groups = tuple(tuple(x * n + y for y in range(n)) for x in range(k))
    design = GroupedConfiguration(as_configuration(structure), groups)
    logging.info("Built TD(%d, %d): %s", k, n, design.config.parameters)
    return design


def fano_plane() -> Configuration:
    return as_configuration(IncidenceStructure(7, _FANO_LINES))


def pappus() -> Configuration:
    return transversal_design(3, 3).config


def square() -> Configuration:
    return transversal_design(2, 2).config


def example_36() -> Configuration:
    """The (36, 72, 6, 3)-configuration that is 3-anonymous but no transversal design."""
    lines = (tuple(p - 1 for p in line) for line in _EXAMPLE_36)
    return as_configuration(IncidenceStructure(36, tuple(lines)).canonical())


def cycle(v: int) -> Configuration:
    if v < 3:
        raise ParameterError(f"a cycle needs at least 3 points (got {v})")
    _check_size(v)
    lines = [(p, (p + 1) % v) for p in range(v)]
    return as_configuration(IncidenceStructure.from_lines(v, lines).canonical())


def pentagon() -> Configuration:
    return cycle(5)


def _neighborhood_classes(config: Configuration) -> list[tuple[int, ...]]:
    classes: dict[frozenset[int], list[int]] = {}
    for point, near in enumerate(config.neighborhoods):
        classes.setdefault(near, []).append(point)
    return [tuple(points) for points in classes.values()]


def _packing(part: Iterable[int], k: int) -> list[Line]:
    members = sorted(part)
    return [tuple(members[start:start + k]) for start in range(0, len(members), k)]


def extend_to_closed_anonymous(gc: GroupedConfiguration) -> Configuration:
    """Add lines inside each anonymity part so closed neighborhoods become shared.

    Every part of size ``s`` receives ``s / k`` new lines, consecutive runs of
    the sorted part, so each point gains exactly one line.

    Points on the same new line share their closed neighborhood, so the
    closed anonymity level is at least the smallest part size only while no
    part is larger than ``k``. A part of size ``s > k`` splits into ``s / k``
    runs with distinct closed neighborhoods, and the guarantee drops to ``k``.
    """
    config = gc.config
    expected = {frozenset(part) for part in _neighborhood_classes(config)}
    if {frozenset(group) for group in gc.groups} != expected:
        raise PartitionError("groups are not the neighborhood anonymity partition")
    for group in gc.groups:
        if len(group) % config.k:
            raise DivisibilityError(
                f"part sizes must be divisible by k={config.k}; "
                f"part {list(group)} has {len(group)} points"
            )
    oversized = [group for group in gc.groups if len(group) > config.k]
    if oversized:
        logging.warning(
            "%d parts exceed k=%d; closed neighborhoods are only guaranteed %d-anonymous",
            len(oversized),
            config.k,
            config.k,
        )
    added = [line for group in gc.groups for line in _packing(group, config.k)]
    structure = IncidenceStructure(config.v, config.lines + tuple(added)).canonical()
    extended = as_configuration(structure)
    logging.info(
        "Extended %s by %d lines to %s", config.parameters, len(added), extended.parameters
    )
    return extended
