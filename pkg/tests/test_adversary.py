import pytest

from tests.conftest import ZOO
from upir_lab import constructions
from upir_lab.adversary import (
    attack_until_identified,
    confusion_certificate,
    default_patience,
    intersect_candidates,
    intersection_attack,
    single_query_anonymity,
)
from upir_lab.anonymity import Mode, anonymity_partition, mode_neighborhood, structural_anonymity_set
from upir_lab.errors import ParameterError, UnknownQueryError
from upir_lab.protocol import Protocol, QueryModel, init_community, run

SEEDS = range(100)


def _heavy_trace(config, protocol, steps=300, seed=3, owner=0):
    return run(init_community(config, QueryModel.heavy_repeater(owner), seed), protocol, steps)


def test_intersection_attack_identifies_fano_owner(fano):
    report = intersection_attack(fano, _heavy_trace(fano, Protocol.UPIR1), "rare-0", Mode.OPEN)
    assert report.observed_proxies == frozenset(range(1, 7))
    assert report.candidate_set == {0}
    assert report.confusion_achieved == 1
    assert report.true_owner == 0
    assert report.owner_in_candidates


def test_intersection_attack_stops_at_group_on_pappus(pappus):
    report = intersection_attack(
        pappus, _heavy_trace(pappus, Protocol.UPIR1, owner=4), "rare-4", Mode.OPEN
    )
    assert report.candidate_set == {3, 4, 5}
    assert report.structural_bound == {3, 4, 5}


def test_closed_attack_on_fano_learns_nothing(fano):
    report = intersection_attack(fano, _heavy_trace(fano, Protocol.UPIR2), "rare-0", Mode.CLOSED)
    assert report.confusion_achieved == 7
    assert 0 in report.observed_proxies


def test_colluding_proxies_only_see_their_forwards(fano):
    trace = _heavy_trace(fano, Protocol.UPIR1)
    report = intersection_attack(fano, trace, "rare-0", Mode.OPEN, colluders=[1, 2])
    assert report.observed_proxies == {1, 2}
    assert report.candidate_set == intersect_candidates(fano, [1, 2], Mode.OPEN)
    assert report.observations == sum(r.proxy in (1, 2) for r in trace.server_log)
    with pytest.raises(UnknownQueryError, match="no colluding proxy"):
        intersection_attack(fano, trace, "rare-0", Mode.OPEN, colluders=[0])


def test_unknown_query(fano):
    with pytest.raises(UnknownQueryError, match="never forwarded"):
        intersection_attack(fano, _heavy_trace(fano, Protocol.UPIR1, 20), "rare-5", Mode.OPEN)


def test_report_to_dict(fano):
    report = intersection_attack(fano, _heavy_trace(fano, Protocol.UPIR1), "rare-0", Mode.OPEN)
    data = report.to_dict()
    assert data["mode"] == "open"
    assert data["candidate_set"] == [0]
    assert data["observed_proxies"] == [1, 2, 3, 4, 5, 6]
    assert data["confusion_achieved"] == 1


def test_single_query_anonymity(fano):
    assert len(single_query_anonymity(fano, 0, Mode.OPEN)) == 6
    assert len(single_query_anonymity(constructions.example_36(), 5, Mode.OPEN)) == 12
    assert single_query_anonymity(constructions.cycle(4), 0, Mode.CLOSED) == {0, 1, 3}
    with pytest.raises(IndexError):
        single_query_anonymity(fano, 7, Mode.OPEN)


def test_confusion_certificates(fano):
    assert confusion_certificate(fano, Protocol.UPIR1) == 1
    assert confusion_certificate(fano, Protocol.UPIR2) == 7
    assert confusion_certificate(constructions.example_36(), Protocol.UPIR1) == 3


def test_certificate_matches_partition_level(zoo_config):
    assert confusion_certificate(zoo_config, Protocol.UPIR1) == anonymity_partition(
        zoo_config, Mode.OPEN
    ).level
    assert confusion_certificate(zoo_config, Protocol.UPIR2) == anonymity_partition(
        zoo_config, Mode.CLOSED
    ).level


def test_default_patience():
    assert default_patience(1) == 10
    assert default_patience(6) == 147
    assert default_patience(7) == 182


def test_attack_rejects_bad_arguments(fano):
    with pytest.raises(IndexError):
        attack_until_identified(fano, Protocol.UPIR1, 7, 10, 0)
    with pytest.raises(ParameterError):
        attack_until_identified(fano, Protocol.UPIR1, 0, 0, 0)


def test_attack_identifies_fano_owner_across_seeds(fano):
    identified = 0
    for seed in SEEDS:
        attack = attack_until_identified(fano, Protocol.UPIR1, 0, 500, seed)
        if attack.identified and attack.final.candidate_set == {0}:
            identified += 1
    assert identified >= 99


def test_attack_on_pappus_stops_at_the_group(pappus):
    for seed in SEEDS:
        attack = attack_until_identified(pappus, Protocol.UPIR1, 4, 500, seed)
        assert attack.final.confusion_achieved == 3
        assert not attack.identified


def test_closed_attack_on_fano_never_shrinks(fano):
    for seed in SEEDS:
        attack = attack_until_identified(fano, Protocol.UPIR2, 0, 500, seed)
        assert attack.final.confusion_achieved == 7


def test_pentagon_closed_neighborhoods_are_unique():
    pentagon = constructions.pentagon()
    attack = attack_until_identified(pentagon, Protocol.UPIR2, 2, 500, 1)
    assert attack.identified
    assert attack.final.candidate_set == {2}


def test_patience_bounds_the_run(pappus):
    attack = attack_until_identified(pappus, Protocol.UPIR1, 0, 5000, 8, patience=5)
    assert attack.steps_used < 5000
    short = attack_until_identified(pappus, Protocol.UPIR1, 0, 3, 8)
    assert short.steps_used == 3


def test_attack_is_deterministic(pappus):
    first = attack_until_identified(pappus, Protocol.UPIR2, 1, 300, 12)
    second = attack_until_identified(pappus, Protocol.UPIR2, 1, 300, 12)
    assert first == second


@pytest.mark.parametrize("name", sorted(ZOO))
@pytest.mark.parametrize("protocol", list(Protocol))
def test_attack_trajectory_invariants(name, protocol):
    config = ZOO[name]()
    mode = Mode.OPEN if protocol is Protocol.UPIR1 else Mode.CLOSED
    owner = config.v // 2
    bound = structural_anonymity_set(config, owner, mode)
    attack = attack_until_identified(config, protocol, owner, 3000, 5)
    previous = None
    for report in attack.trajectory:
        assert report.owner_in_candidates
        assert report.candidate_set >= bound
        assert report.structural_bound == bound
        if previous is not None:
            assert report.candidate_set <= previous.candidate_set
            assert report.observed_proxies > previous.observed_proxies
        previous = report
    final = attack.final
    if final.observed_proxies == mode_neighborhood(config, owner, mode):
        assert final.candidate_set == bound
    if final.confusion_achieved > 1:
        assert final.candidate_set == bound


def test_attack_logs_outcome(fano, caplog):
    caplog.set_level("INFO")
    attack_until_identified(fano, Protocol.UPIR1, 0, 500, 4)
    assert "Attack on user 0 (upir1, seed 4)" in caplog.text
