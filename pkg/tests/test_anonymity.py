from itertools import combinations

import networkx as nx
import pytest

from tests.conftest import LINEAR_SPACES, TD_PARAMETERS, ZOO
from upir_lab import constructions
from upir_lab.anonymity import (
    Mode,
    anonymity_partition,
    check_characterization,
    has_unique_neighborhoods,
    is_transversal_design,
    is_triangle_free,
    mode_for,
    mode_neighborhood,
    pentagonal_report,
    structural_anonymity_set,
)
from upir_lab.errors import AnonymityLevelError
from upir_lab.incidence import collinearity_graph, deficiency


def test_fano_partitions(fano):
    open_partition = anonymity_partition(fano, Mode.OPEN)
    assert open_partition.parts == tuple((p,) for p in range(7))
    assert open_partition.level == 1
    closed_partition = anonymity_partition(fano, Mode.CLOSED)
    assert closed_partition.parts == (tuple(range(7)),)
    assert closed_partition.level == 7


def test_example_36_partition_is_consecutive_triples():
    partition = anonymity_partition(constructions.example_36(), Mode.OPEN)
    assert partition.parts == tuple((3 * i, 3 * i + 1, 3 * i + 2) for i in range(12))
    assert partition.level == 3
    assert partition.part_of(31) == (30, 31, 32)


def test_pappus_partition_is_the_groups(pappus):
    partition = anonymity_partition(pappus, Mode.OPEN)
    assert partition.parts == ((0, 1, 2), (3, 4, 5), (6, 7, 8))


def test_part_of_unknown_point():
    with pytest.raises(IndexError):
        anonymity_partition(constructions.square(), Mode.OPEN).part_of(4)


@pytest.mark.parametrize("name", LINEAR_SPACES)
def test_linear_spaces_have_unique_neighborhoods_and_shared_closed_ones(name):
    config = ZOO[name]()
    assert has_unique_neighborhoods(config, Mode.OPEN)
    assert anonymity_partition(config, Mode.CLOSED).level == config.v


@pytest.mark.parametrize("k, n", TD_PARAMETERS)
def test_transversal_designs_are_n_anonymous(k, n):
    design = constructions.transversal_design(k, n)
    partition = anonymity_partition(design.config, Mode.OPEN)
    assert partition.level == n
    assert set(partition.parts) == set(design.groups)


def test_deficiency_one_square():
    square = constructions.cycle(4)
    assert has_unique_neighborhoods(square, Mode.CLOSED)
    assert not has_unique_neighborhoods(square, Mode.OPEN)
    assert anonymity_partition(square, Mode.OPEN).parts == ((0, 2), (1, 3))


def test_pentagon_is_pentagonal_without_opposite_pairs():
    pentagon = constructions.pentagon()
    report = pentagonal_report(pentagon)
    assert report.is_pentagonal
    assert report.opposite_line_pairs == ()
    assert pentagon.lines[report.opposite_line[0]] == (2, 3)
    assert has_unique_neighborhoods(pentagon, Mode.OPEN)
    assert has_unique_neighborhoods(pentagon, Mode.CLOSED)


def test_non_pentagonal_configurations(fano, pappus):
    assert not pentagonal_report(fano).is_pentagonal
    report = pentagonal_report(pappus)
    assert not report.is_pentagonal
    assert set(report.opposite_line) == {None}


def test_triangles():
    assert is_triangle_free(constructions.pentagon())
    assert is_triangle_free(constructions.cycle(6))
    assert not is_triangle_free(constructions.fano_plane())
    assert not is_triangle_free(constructions.pappus())
    assert not is_triangle_free(constructions.cycle(3))


def test_structural_predicates_across_zoo(zoo_config):
    open_unique = has_unique_neighborhoods(zoo_config, Mode.OPEN)
    closed_unique = has_unique_neighborhoods(zoo_config, Mode.CLOSED)
    if is_triangle_free(zoo_config) and zoo_config.k > 2:
        assert open_unique
    report = pentagonal_report(zoo_config)
    if report.is_pentagonal:
        assert open_unique
        if not report.opposite_line_pairs:
            assert closed_unique
    if deficiency(zoo_config) == 1:
        assert closed_unique
        assert anonymity_partition(zoo_config, Mode.OPEN).level >= 2


def test_partition_invariants_across_zoo(zoo_config):
    graph = collinearity_graph(zoo_config)
    for mode in Mode:
        partition = anonymity_partition(zoo_config, mode)
        assert sorted(p for part in partition.parts for p in part) == list(range(zoo_config.v))
        assert min(part[0] for part in partition.parts) == 0
        assert [part[0] for part in partition.parts] == sorted(part[0] for part in partition.parts)
        assert any(len(part) == partition.level for part in partition.parts)
        neighborhoods = [mode_neighborhood(zoo_config, part[0], mode) for part in partition.parts]
        assert len(set(neighborhoods)) == len(partition.parts)
        for part in partition.parts:
            assert {mode_neighborhood(zoo_config, p, mode) for p in part} == {
                mode_neighborhood(zoo_config, part[0], mode)
            }
            if mode is Mode.OPEN:
                assert nx.is_empty(graph.subgraph(part))
            for p in part:
                assert set(part) <= structural_anonymity_set(zoo_config, p, mode)


def test_characterization_of_example_36():
    report = check_characterization(constructions.example_36())
    assert (report.n, report.m, report.r, report.k) == (3, 12, 6, 3)
    assert report.parts_non_collinear
    assert report.r_at_least_n and report.m_at_least_k
    assert not report.r_equals_n and not report.m_equals_k
    assert not report.is_optimal


@pytest.mark.parametrize("k, n", [(3, 3), (4, 5)])
def test_characterization_of_transversal_designs(k, n):
    report = check_characterization(constructions.transversal_design(k, n).config)
    assert (report.n, report.m) == (n, k)
    assert report.r_equals_n and report.m_equals_k
    assert report.is_optimal


def test_characterization_requires_anonymity(fano):
    with pytest.raises(AnonymityLevelError):
        check_characterization(fano)


def test_transversal_design_recognition(fano, pappus):
    recovered = is_transversal_design(pappus)
    assert recovered is not None
    assert recovered.groups == ((0, 1, 2), (3, 4, 5), (6, 7, 8))
    assert is_transversal_design(constructions.example_36()) is None
    assert is_transversal_design(fano) is None
    assert is_transversal_design(constructions.transversal_design(4, 5).config) is not None


def test_structural_anonymity_set(fano, pappus):
    assert structural_anonymity_set(fano, 0, Mode.OPEN) == {0}
    assert structural_anonymity_set(fano, 3, Mode.CLOSED) == set(range(7))
    assert structural_anonymity_set(pappus, 4, Mode.OPEN) == {3, 4, 5}
    with pytest.raises(IndexError):
        structural_anonymity_set(fano, 9, Mode.OPEN)


def test_mode_for():
    assert mode_for("upir1") is Mode.OPEN
    assert mode_for("UPIR2") is Mode.CLOSED
    with pytest.raises(ValueError, match="unknown protocol"):
        mode_for("upir3")


def test_neighborhood_classes_are_independent_sets(zoo_config):
    partition = anonymity_partition(zoo_config, Mode.OPEN)
    for part in partition.parts:
        for p, q in combinations(part, 2):
            assert (p, q) not in zoo_config.line_of_pair
