"""Incidence structures, the configuration axioms and the ``cfg`` text format.

Points are the integers ``0..v-1`` and a line is a strictly ascending tuple of
points. An :class:`IncidenceStructure` only promises well-formedness; the
partial-linear-space, regularity, uniformity and connectivity axioms are
checked by :func:`validate`, and :func:`as_configuration` is the single way a
structure becomes a :class:`Configuration`.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from os import PathLike
from typing import Iterable, Sequence

import networkx as nx

from upir_lab.errors import (
    CfgFormatError,
    ConfigurationError,
    PartitionError,
    StructureError,
)

Line = tuple[int, ...]


@dataclass(frozen=True)
class IncidenceStructure:
    point_count: int
    lines: tuple[Line, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "lines", tuple(tuple(line) for line in self.lines))
        if self.point_count < 0:
            raise StructureError(f"point count must be nonnegative (got {self.point_count})")
        seen: set[Line] = set()
        for index, line in enumerate(self.lines):
            if len(line) < 2:
                raise StructureError(f"line {index} has fewer than two points")
            if any(b <= a for a, b in zip(line, line[1:])):
                raise StructureError(
                    f"line {index} is not strictly ascending: {list(line)}"
                )
            if line[0] < 0 or line[-1] >= self.point_count:
                raise StructureError(
                    f"line {index} has a point outside [0, {self.point_count})"
                )
            if line in seen:
                raise StructureError(f"line {index} repeats an earlier line")
            seen.add(line)

    @classmethod
    def from_lines(
        cls, point_count: int, lines: Iterable[Iterable[int]]
    ) -> IncidenceStructure:
        """Build a structure from unsorted point collections, keeping line order."""
        return cls(point_count, tuple(tuple(sorted(int(p) for p in line)) for line in lines))

    @property
    def b(self) -> int:
        return len(self.lines)

    def canonical(self) -> IncidenceStructure:
        """Return the same structure with its lines in lexicographic order."""
        return IncidenceStructure(self.point_count, tuple(sorted(self.lines)))


@dataclass(frozen=True)
class ValidationReport:
    is_partial_linear_space: bool
    is_regular: int | None
    is_uniform: int | None
    is_connected: bool
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def _common_value(values: Sequence[int]) -> int | None:
    if values and min(values) == max(values) and values[0] > 0:
        return values[0]
    return None


def _spread(noun: str, counted: str, values: Sequence[int]) -> str:
    low = min(range(len(values)), key=values.__getitem__)
    high = max(range(len(values)), key=values.__getitem__)
    return (
        f"{noun} {low} has {values[low]} {counted} but "
        f"{noun} {high} has {values[high]}"
    )


def validate(structure: IncidenceStructure) -> ValidationReport:
    """Check the partial linear space, regularity, uniformity and connectivity axioms.

    Never raises for a well-formed structure: every failed axiom becomes a
    human-readable entry in ``violations``.
    """
    v = structure.point_count
    if v == 0:
        return ValidationReport(False, None, None, False, ("structure has no points",))

    violations: list[str] = []
    line_of_pair: dict[tuple[int, int], int] = {}
    for index, line in enumerate(structure.lines):
        for pair in combinations(line, 2):
            first = line_of_pair.setdefault(pair, index)
            if first != index:
                violations.append(
                    f"points {pair[0]} and {pair[1]} lie on lines {first} and {index}"
                )
    is_partial_linear_space = not violations

    degrees = [0] * v
    for line in structure.lines:
        for point in line:
            degrees[point] += 1
    regular = _common_value(degrees)
    if regular is None:
        if max(degrees) == 0:
            violations.append("no point lies on a line")
        else:
            violations.append("not regular: " + _spread("point", "lines", degrees))

    sizes = [len(line) for line in structure.lines]
    uniform = _common_value(sizes)
    if uniform is None:
        if not sizes:
            violations.append("structure has no lines")
        else:
            violations.append("not uniform: " + _spread("line", "points", sizes))

    graph = nx.Graph()
    graph.add_nodes_from(("point", p) for p in range(v))
    graph.add_edges_from(
        (("point", p), ("line", index))
        for index, line in enumerate(structure.lines)
        for p in line
    )
    connected = nx.is_connected(graph)
    if not connected:
        components = nx.number_connected_components(graph)
        violations.append(f"incidence graph has {components} connected components")

    return ValidationReport(
        is_partial_linear_space, regular, uniform, connected, tuple(violations)
    )


@dataclass(frozen=True)
class Configuration:
    """A validated r-regular, k-uniform, connected partial linear space.

    Build instances with :func:`as_configuration`; the constructor itself
    trusts its arguments.
    """

    structure: IncidenceStructure
    r: int
    k: int
    lines_through: tuple[tuple[int, ...], ...]

    @property
    def v(self) -> int:
        return self.structure.point_count

    @property
    def b(self) -> int:
        return self.structure.b

    @property
    def lines(self) -> tuple[Line, ...]:
        return self.structure.lines

    @property
    def parameters(self) -> tuple[int, int, int, int]:
        return self.v, self.b, self.r, self.k

    @cached_property
    def line_of_pair(self) -> dict[tuple[int, int], int]:
        return {
            pair: index
            for index, line in enumerate(self.lines)
            for pair in combinations(line, 2)
        }

    @cached_property
    def neighborhoods(self) -> tuple[frozenset[int], ...]:
        result = []
        for point in range(self.v):
            collinear: set[int] = set()
            for index in self.lines_through[point]:
                collinear.update(self.lines[index])
            collinear.discard(point)
            result.append(frozenset(collinear))
        return tuple(result)


def as_configuration(structure: IncidenceStructure) -> Configuration:
    report = validate(structure)
    if not report.ok:
        raise ConfigurationError(report)
    lines_through: list[list[int]] = [[] for _ in range(structure.point_count)]
    for index, line in enumerate(structure.lines):
        for point in line:
            lines_through[point].append(index)
    config = Configuration(
        structure,
        report.is_regular,
        report.is_uniform,
        tuple(tuple(indices) for indices in lines_through),
    )
    logging.debug("Accepted (%d, %d, %d, %d)-configuration", *config.parameters)
    return config


@dataclass(frozen=True)
class GroupedConfiguration:
    """A configuration with a partition of its points into non-collinear parts.

    The parts are the groups of a transversal design or, more generally, the
    neighborhood anonymity partition of a configuration.
    """

    config: Configuration
    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        groups = tuple(tuple(sorted(group)) for group in self.groups)
        object.__setattr__(self, "groups", groups)
        members = sorted(p for group in groups for p in group)
        if members != list(range(self.config.v)):
            raise PartitionError("groups do not partition the point set")
        part_of = {p: index for index, group in enumerate(groups) for p in group}
        for index, line in enumerate(self.config.lines):
            parts = {part_of[p] for p in line}
            if len(parts) < len(line):
                raise PartitionError(f"line {index} contains two points of one group")

    @property
    def m(self) -> int:
        return len(self.groups)


def _check_point(config: Configuration, p: int) -> None:
    if not 0 <= p < config.v:
        raise IndexError(f"point {p} outside [0, {config.v})")


def neighborhood(config: Configuration, p: int) -> frozenset[int]:
    """Points collinear with ``p``, excluding ``p``."""
    _check_point(config, p)
    return config.neighborhoods[p]


def closed_neighborhood(config: Configuration, p: int) -> frozenset[int]:
    _check_point(config, p)
    return config.neighborhoods[p] | {p}


def deficiency(config: Configuration) -> int:
    """Number of points not collinear with a given point; zero iff linear space."""
    return config.v - (config.r * (config.k - 1) + 1)


def is_parallel_class(config: Configuration, line_subset: Iterable[int]) -> bool:
    covered: list[int] = []
    for index in line_subset:
        covered.extend(config.lines[index])
    return len(covered) == config.v and set(covered) == set(range(config.v))


def line_through(config: Configuration, p: int, q: int) -> int | None:
    """Index of the unique line containing ``p`` and ``q``, if they are collinear."""
    _check_point(config, p)
    _check_point(config, q)
    if p == q:
        return None
    return config.line_of_pair.get((min(p, q), max(p, q)))


def collinearity_graph(config: Configuration) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(config.v))
    for (p, q), index in config.line_of_pair.items():
        graph.add_edge(p, q, line=index)
    return graph


# cfg text format

_HEADER = re.compile(r"cfg (0|[1-9][0-9]*) (0|[1-9][0-9]*)")
_ROW = re.compile(r"(0|[1-9][0-9]*)( (0|[1-9][0-9]*))*")


def parse_cfg(text: str) -> IncidenceStructure:
    if "\r" in text:
        raise CfgFormatError("cfg text must use LF line endings")

    header: tuple[int, int] | None = None
    lines: list[Line] = []
    seen: dict[Line, int] = {}
    for number, raw in enumerate(text.split("\n"), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        if header is None:
            match = _HEADER.fullmatch(content)
            if match is None:
                raise CfgFormatError(f"line {number}: expected 'cfg <v> <b>' header")
            header = int(match.group(1)), int(match.group(2))
            continue
        v, b = header
        if len(lines) == b:
            raise CfgFormatError(f"line {number}: trailing content after {b} lines")
        if _ROW.fullmatch(content) is None:
            raise CfgFormatError(f"line {number}: malformed point list {content!r}")
        points = tuple(int(token) for token in content.split(" "))
        if len(points) < 2:
            raise CfgFormatError(f"line {number}: a line needs at least two points")
        if any(b2 <= a for a, b2 in zip(points, points[1:])):
            if len(set(points)) < len(points):
                raise CfgFormatError(f"line {number}: duplicate point index")
            raise CfgFormatError(f"line {number}: points are not ascending")
        if points[-1] >= v:
            raise CfgFormatError(f"line {number}: point {points[-1]} is not below v={v}")
        if points in seen:
            raise CfgFormatError(f"line {number}: repeats the line on line {seen[points]}")
        seen[points] = number
        lines.append(points)

    if header is None:
        raise CfgFormatError("missing 'cfg <v> <b>' header")
    if len(lines) != header[1]:
        raise CfgFormatError(f"expected {header[1]} lines, found {len(lines)}")
    try:
        return IncidenceStructure(header[0], tuple(lines))
    except StructureError as exc:  # pragma: no cover - parser checks the same rules
        raise CfgFormatError(str(exc)) from exc


def format_cfg(structure: IncidenceStructure) -> str:
    rows = [f"cfg {structure.point_count} {structure.b}"]
    rows.extend(" ".join(str(p) for p in line) for line in structure.lines)
    return "\n".join(rows) + "\n"


def read_cfg(path: str | PathLike[str]) -> IncidenceStructure:
    with open(path, encoding="utf-8", newline="") as handle:
        return parse_cfg(handle.read())


def write_cfg(path: str | PathLike[str], structure: IncidenceStructure) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(format_cfg(structure))
