"""Curious-server intersection attacks on the UPIR protocols.

The adversary links queries by ``query_id`` and sees which user forwarded each
copy. Intersecting the neighborhoods (UPIR 1) or closed neighborhoods (UPIR 2)
of the observed proxies shrinks the set of possible owners down to, at best,
the owner's anonymity part.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Any, Iterable

from upir_lab.anonymity import (
    Mode,
    anonymity_partition,
    mode_for,
    mode_neighborhood,
    structural_anonymity_set,
)
from upir_lab.errors import ParameterError, UnknownQueryError
from upir_lab.incidence import Configuration
from upir_lab.protocol import (
    Protocol,
    QueryModel,
    SimulationTrace,
    advance,
    init_community,
    resolve_self_submission,
)


@dataclass(frozen=True)
class AttackReport:
    mode: Mode
    target_query_id: str
    observed_proxies: frozenset[int]
    candidate_set: frozenset[int]
    true_owner: int | None
    owner_in_candidates: bool | None
    structural_bound: frozenset[int]
    observations: int

    @property
    def confusion_achieved(self) -> int:
        return len(self.candidate_set)

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": Mode(self.mode).value,
            "target_query_id": self.target_query_id,
            "observed_proxies": sorted(self.observed_proxies),
            "candidate_set": sorted(self.candidate_set),
            "confusion_achieved": self.confusion_achieved,
            "true_owner": self.true_owner,
            "owner_in_candidates": self.owner_in_candidates,
            "structural_bound": sorted(self.structural_bound),
            "observations": self.observations,
        }


def intersect_candidates(
    config: Configuration, proxies: Iterable[int], mode: Mode
) -> frozenset[int]:
    return reduce(
        frozenset.intersection, (mode_neighborhood(config, p, mode) for p in proxies)
    )


def _report(
    config: Configuration,
    mode: Mode,
    query_id: str,
    proxies: frozenset[int],
    candidates: frozenset[int],
    owner: int | None,
    observations: int,
) -> AttackReport:
    bound = frozenset() if owner is None else structural_anonymity_set(config, owner, mode)
    return AttackReport(
        mode=mode,
        target_query_id=query_id,
        observed_proxies=proxies,
        candidate_set=candidates,
        true_owner=owner,
        owner_in_candidates=None if owner is None else owner in candidates,
        structural_bound=bound,
        observations=observations,
    )


def intersection_attack(
    config: Configuration,
    trace: SimulationTrace,
    query_id: str,
    mode: Mode,
    colluders: Iterable[int] | None = None,
) -> AttackReport:
    """Intersect the (closed) neighborhoods of every proxy seen forwarding ``query_id``.

    With ``colluders`` the adversary only learns the forwards made by those
    users, as when a group of proxies pools what it saw.
    """
    mode = Mode(mode)
    records = [record for record in trace.server_log if record.query_id == query_id]
    if not records:
        raise UnknownQueryError(f"query {query_id!r} was never forwarded to the server")
    if colluders is not None:
        allowed = set(colluders)
        records = [record for record in records if record.proxy in allowed]
        if not records:
            raise UnknownQueryError(f"no colluding proxy forwarded query {query_id!r}")
    proxies = frozenset(record.proxy for record in records)
    owners = {record.owner for record in trace.truth_log if record.query_id == query_id}
    owner = owners.pop() if len(owners) == 1 else None
    return _report(
        config,
        mode,
        query_id,
        proxies,
        intersect_candidates(config, proxies, mode),
        owner,
        len(records),
    )


def single_query_anonymity(config: Configuration, proxy: int, mode: Mode) -> frozenset[int]:
    """Anonymity set of the owner of one unlinked query forwarded by ``proxy``."""
    return mode_neighborhood(config, proxy, mode)


def confusion_certificate(config: Configuration, protocol: Protocol) -> int:
    """Guaranteed worst-case confusion for linked query sequences; 1 means vulnerable."""
    return anonymity_partition(config, mode_for(protocol)).level


def default_patience(pool: int) -> int:
    """Ten times the expected number of forwards before all ``pool`` proxies show up."""
    harmonic = sum(Fraction(1, i) for i in range(1, pool + 1))
    return math.ceil(10 * pool * harmonic)


@dataclass(frozen=True)
class AttackRun:
    steps_used: int
    trajectory: tuple[AttackReport, ...]

    @property
    def final(self) -> AttackReport | None:
        return self.trajectory[-1] if self.trajectory else None

    @property
    def identified(self) -> bool:
        final = self.final
        return (
            final is not None
            and final.confusion_achieved == 1
            and bool(final.owner_in_candidates)
        )


def attack_until_identified(
    config: Configuration,
    protocol: Protocol,
    owner: int,
    max_steps: int,
    seed: int,
    *,
    self_submission: str | float | None = None,
    patience: int | None = None,
    background: float = 0.0,
) -> AttackRun:
    """Simulate a heavy repeater and attack their rare query as proxies appear.

    A report is appended whenever a new proxy is observed. The run stops once
    the candidate set is a single point, after ``patience`` forwarded copies
    without the candidate set shrinking, or at ``max_steps``.
    """
    protocol = Protocol(protocol)
    mode = mode_for(protocol)
    if not 0 <= owner < config.v:
        raise IndexError(f"owner {owner} outside [0, {config.v})")
    if max_steps < 1:
        raise ParameterError(f"max_steps must be at least 1 (got {max_steps})")

    model = QueryModel.heavy_repeater(owner, background)
    query_id = model.rare_query_id(owner)
    community = init_community(config, model, seed)
    x = None
    if protocol is Protocol.UPIR2:
        x = resolve_self_submission(config, self_submission)
    pool = config.r * (config.k - 1) + (1 if mode is Mode.CLOSED else 0)
    if patience is None:
        patience = default_patience(pool)

    proxies: set[int] = set()
    candidates: frozenset[int] | None = None
    trajectory: list[AttackReport] = []
    observations = 0
    since_shrink = 0
    seen = 0
    while community.step < max_steps:
        advance(community, protocol, x)
        for record in community.server_log[seen:]:
            if record.query_id != query_id:
                continue
            observations += 1
            since_shrink += 1
            if record.proxy in proxies:
                continue
            proxies.add(record.proxy)
            reachable = mode_neighborhood(config, record.proxy, mode)
            narrowed = reachable if candidates is None else candidates & reachable
            if narrowed != candidates:
                since_shrink = 0
            candidates = narrowed
            trajectory.append(
                _report(
                    config, mode, query_id, frozenset(proxies), candidates, owner, observations
                )
            )
        seen = len(community.server_log)
        if candidates is not None and (len(candidates) == 1 or since_shrink >= patience):
            break

    attack = AttackRun(community.step, tuple(trajectory))
    final = attack.final
    logging.info(
        "Attack on user %d (%s, seed %d) stopped after %d steps with confusion %s",
        owner,
        protocol.value,
        seed,
        attack.steps_used,
        final.confusion_achieved if final else "n/a",
    )
    return attack
