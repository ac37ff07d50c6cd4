"""Discrete-time simulation of the peer-to-peer UPIR protocols.

Users are the points of a configuration and every line is a communication
space: a FIFO queue only the users on that line may read or write. Each global
step activates every user once, in a seeded random order. A message written
during a step becomes readable from the next step on, so every hop costs at
least one step.

The trace keeps two views of the same run: ``truth_log`` holds the real
profiles (who issued what) and ``server_log`` the apparent profiles (who
forwarded what to the server). Only ``step``, ``proxy`` and ``query_id`` of a
server record are visible to the server; ``serial`` exists to join the two
logs during evaluation.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Iterable, Iterator, Mapping, NamedTuple

import numpy as np
from scipy import stats

from upir_lab import __version__
from upir_lab.anonymity import Mode
from upir_lab.errors import NoDataError, ParameterError, TraceFormatError
from upir_lab.incidence import Configuration, closed_neighborhood, neighborhood


class Protocol(str, Enum):
    UPIR1 = "upir1"
    UPIR2 = "upir2"


class MessageKind(str, Enum):
    QUERY = "query"
    ANSWER = "answer"


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    query_id: str
    owner: int
    serial: int
    written_step: int
    addressee: int | None = None
    payload: str = ""


@dataclass
class CommunicationSpace:
    line: int
    queue: list[Message] = field(default_factory=list)


@dataclass(frozen=True)
class QueryStream:
    """Per-activation query behaviour of one user.

    With probability ``repeat`` the user issues their rare repeated query;
    otherwise, with probability ``background``, a one-off query.
    """

    repeat: float = 0.0
    background: float = 0.0
    rare_query_id: str | None = None

    def __post_init__(self) -> None:
        for name in ("repeat", "background"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParameterError(f"{name} probability must be in [0, 1] (got {value})")


@dataclass(frozen=True)
class QueryModel:
    default: QueryStream = QueryStream(background=0.5)
    users: Mapping[int, QueryStream] = field(default_factory=dict)

    def stream(self, user: int) -> QueryStream:
        return self.users.get(user, self.default)

    def rare_query_id(self, user: int) -> str:
        return self.stream(user).rare_query_id or f"rare-{user}"

    @classmethod
    def heavy_repeater(cls, owner: int, background: float = 0.0) -> QueryModel:
        """``owner`` reissues their rare query on every activation."""
        return cls(QueryStream(background=background), {owner: QueryStream(repeat=1.0)})

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> QueryModel:
        """Build a model from ``{"default": {...}, "users": {"3": {...}}}``."""
        unknown = set(data) - {"default", "users"}
        if unknown:
            raise ParameterError(f"unknown query model keys: {', '.join(sorted(unknown))}")
        try:
            default = QueryStream(**data.get("default", {"background": 0.5}))
            users = {
                int(user): QueryStream(**stream)
                for user, stream in data.get("users", {}).items()
            }
        except TypeError as exc:
            raise ParameterError(f"invalid query stream: {exc}") from exc
        return cls(default, users)


class TruthRecord(NamedTuple):
    seq: int
    step: int
    owner: int
    query_id: str
    serial: int
    line: int
    addressee: int


class ServerRecord(NamedTuple):
    seq: int
    step: int
    proxy: int
    query_id: str
    serial: int


class Event(NamedTuple):
    step: int
    user: int
    line: int
    action: str


@dataclass(frozen=True)
class TraceParams:
    protocol: Protocol
    self_submission: float | None
    steps: int
    seed: int
    v: int
    b: int
    in_flight: int
    version: str = __version__


@dataclass(frozen=True)
class SimulationTrace:
    params: TraceParams
    server_log: tuple[ServerRecord, ...]
    truth_log: tuple[TruthRecord, ...]
    events: tuple[Event, ...] = ()


@dataclass
class Community:
    config: Configuration
    model: QueryModel
    seed: int
    spaces: list[CommunicationSpace]
    user_rngs: list[np.random.Generator]
    scheduler: np.random.Generator
    step: int = 0
    issued: int = 0
    seq: int = 0
    server_log: list[ServerRecord] = field(default_factory=list)
    truth_log: list[TruthRecord] = field(default_factory=list)
    events: list[Event] = field(default_factory=list)

    def in_flight(self) -> int:
        """Queries written to a communication space but not yet forwarded."""
        return sum(
            message.kind is MessageKind.QUERY
            for space in self.spaces
            for message in space.queue
        )

    def trace(self, protocol: Protocol, self_submission: float | None) -> SimulationTrace:
        params = TraceParams(
            protocol=Protocol(protocol),
            self_submission=self_submission,
            steps=self.step,
            seed=self.seed,
            v=self.config.v,
            b=self.config.b,
            in_flight=self.in_flight(),
        )
        return SimulationTrace(
            params, tuple(self.server_log), tuple(self.truth_log), tuple(self.events)
        )


def init_community(
    config: Configuration, model: QueryModel | None = None, seed: int = 0
) -> Community:
    """Map users to points and lines to empty communication spaces."""
    children = np.random.SeedSequence(seed).spawn(config.v + 1)
    community = Community(
        config=config,
        model=model or QueryModel(),
        seed=seed,
        spaces=[CommunicationSpace(line) for line in range(config.b)],
        user_rngs=[np.random.default_rng(child) for child in children[1:]],
        scheduler=np.random.default_rng(children[0]),
    )
    logging.debug(
        "Community of %d users over %d communication spaces (seed %d)",
        config.v,
        config.b,
        seed,
    )
    return community


def resolve_self_submission(config: Configuration, policy: str | float | None) -> float:
    """Turn ``auto``, ``naive`` or an explicit probability into a float.

    ``auto`` spreads a user's queries uniformly over their closed
    neighborhood; ``naive`` picks uniformly among all points of the line.
    """
    if policy is None or policy == "auto":
        return 1.0 / (config.r * (config.k - 1) + 1)
    if policy == "naive":
        return 1.0 / config.k
    try:
        x = float(policy)
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"self-submission must be auto, naive or a float (got {policy!r})") from exc
    if not 0.0 <= x <= 1.0:
        raise ParameterError(f"self-submission must be in [0, 1] (got {x})")
    return x


def _server_answer(query_id: str) -> str:
    return f"answer:{query_id}"


def _next_query(community: Community, user: int) -> str | None:
    stream = community.model.stream(user)
    rng = community.user_rngs[user]
    if stream.repeat and rng.random() < stream.repeat:
        return community.model.rare_query_id(user)
    if stream.background and rng.random() < stream.background:
        return f"once-{user}-{community.issued}"
    return None


def _record(community: Community, user: int, line: int, action: str) -> None:
    community.events.append(Event(community.step, user, line, action))


def _activate(community: Community, user: int, self_submission: float | None) -> None:
    config = community.config
    if not 0 <= user < config.v:
        raise IndexError(f"user {user} outside [0, {config.v})")
    rng = community.user_rngs[user]

    through = config.lines_through[user]
    line = through[int(rng.integers(len(through)))]
    space = community.spaces[line]
    _record(community, user, line, "read")

    kept: list[Message] = []
    answers: list[Message] = []
    for message in space.queue:
        if message.written_step == community.step:
            kept.append(message)
        elif message.kind is MessageKind.QUERY and message.addressee == user:
            community.server_log.append(
                ServerRecord(community.seq, community.step, user, message.query_id, message.serial)
            )
            community.seq += 1
            answers.append(
                Message(
                    MessageKind.ANSWER,
                    message.query_id,
                    message.owner,
                    message.serial,
                    community.step,
                    payload=_server_answer(message.query_id),
                )
            )
            _record(community, user, line, "forward")
        elif message.kind is MessageKind.ANSWER and message.owner == user:
            _record(community, user, line, "collect")
        else:
            kept.append(message)
    space.queue = kept + answers

    query_id = _next_query(community, user)
    if query_id is None:
        return
    if self_submission is not None and rng.random() < self_submission:
        addressee = user
    else:
        others = [p for p in config.lines[line] if p != user]
        addressee = others[int(rng.integers(len(others)))]
    serial = community.issued
    community.issued += 1
    space.queue.append(
        Message(MessageKind.QUERY, query_id, user, serial, community.step, addressee)
    )
    community.truth_log.append(
        TruthRecord(community.seq, community.step, user, query_id, serial, line, addressee)
    )
    community.seq += 1
    _record(community, user, line, "post")


def step_upir1(community: Community, user: int) -> None:
    """One activation of the protocol without self-submission.

    ``community.step`` is left alone: messages written now become readable
    only after the caller increments it, as :func:`advance` does.
    """
    _activate(community, user, None)


def step_upir2(community: Community, user: int, x: float | None = None) -> None:
    """One activation where the user addresses their own query with probability ``x``.

    Like :func:`step_upir1`, this does not advance ``community.step``.
    """
    _activate(community, user, resolve_self_submission(community.config, x))


def advance(community: Community, protocol: Protocol, self_submission: float | None) -> None:
    """Activate every user once, in a freshly shuffled order."""
    order = community.scheduler.permutation(community.config.v)
    if Protocol(protocol) is Protocol.UPIR1:
        for user in order:
            _activate(community, int(user), None)
    else:
        for user in order:
            _activate(community, int(user), self_submission)
    community.step += 1


def run(
    community: Community,
    protocol: Protocol,
    steps: int,
    self_submission: str | float | None = None,
) -> SimulationTrace:
    if steps < 1:
        raise ParameterError(f"steps must be at least 1 (got {steps})")
    protocol = Protocol(protocol)
    x = None
    if protocol is Protocol.UPIR2:
        x = resolve_self_submission(community.config, self_submission)
    logging.info(
        "Running %s for %d steps on %s (seed %d)",
        protocol.value,
        steps,
        community.config.parameters,
        community.seed,
    )
    for _ in range(steps):
        advance(community, protocol, x)
    trace = community.trace(protocol, x)
    logging.info(
        "Issued %d queries, forwarded %d, %d in flight",
        len(trace.truth_log),
        len(trace.server_log),
        trace.params.in_flight,
    )
    return trace


def proxy_counts(
    trace: SimulationTrace, owner: int, query_id: str | None = None
) -> Counter[int]:
    owned = {
        record.serial
        for record in trace.truth_log
        if record.owner == owner and (query_id is None or record.query_id == query_id)
    }
    return Counter(record.proxy for record in trace.server_log if record.serial in owned)


def proxy_distribution(
    trace: SimulationTrace, owner: int, query_id: str | None = None
) -> dict[int, float]:
    """Empirical distribution of the proxies that forwarded ``owner``'s queries."""
    counts = proxy_counts(trace, owner, query_id)
    total = sum(counts.values())
    if not total:
        raise NoDataError(f"user {owner} has no forwarded query")
    return {proxy: count / total for proxy, count in sorted(counts.items())}


@dataclass(frozen=True)
class UniformityReport:
    counts: dict[int, int]
    statistic: float
    p_value: float
    owner_frequency: float
    outside_support: int


def proxy_uniformity(
    trace: SimulationTrace, config: Configuration, owner: int, mode: Mode
) -> UniformityReport:
    """Chi-square test of the owner's proxies against uniform over N or CN."""
    counts = proxy_counts(trace, owner)
    total = sum(counts.values())
    if not total:
        raise NoDataError(f"user {owner} has no forwarded query")
    if Mode(mode) is Mode.OPEN:
        support = sorted(neighborhood(config, owner))
    else:
        support = sorted(closed_neighborhood(config, owner))
    observed = [counts.get(p, 0) for p in support]
    statistic, p_value = stats.chisquare(observed)
    return UniformityReport(
        counts=dict(sorted(counts.items())),
        statistic=float(statistic),
        p_value=float(p_value),
        owner_frequency=counts.get(owner, 0) / total,
        outside_support=total - sum(observed),
    )


def real_profile(trace: SimulationTrace, user: int) -> tuple[str, ...]:
    return tuple(record.query_id for record in trace.truth_log if record.owner == user)


def apparent_profile(trace: SimulationTrace, user: int) -> tuple[str, ...]:
    return tuple(record.query_id for record in trace.server_log if record.proxy == user)


def params_to_dict(params: TraceParams) -> dict[str, Any]:
    data = asdict(params)
    data["protocol"] = Protocol(params.protocol).value
    return data


def trace_to_jsonl(trace: SimulationTrace) -> Iterator[str]:
    """Serialize a trace as JSON lines: a params header, then records by ``seq``."""
    yield json.dumps({"type": "params", **params_to_dict(trace.params)}, sort_keys=True)
    records: list[tuple[str, NamedTuple]] = [("truth", r) for r in trace.truth_log]
    records.extend(("server", r) for r in trace.server_log)
    records.sort(key=lambda item: item[1].seq)
    for kind, record in records:
        yield json.dumps({"type": kind, **record._asdict()}, sort_keys=True)


def trace_from_jsonl(lines: Iterable[str]) -> SimulationTrace:
    params: TraceParams | None = None
    truth: list[TruthRecord] = []
    server: list[ServerRecord] = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
            kind = data.pop("type")
            if kind == "params":
                data["protocol"] = Protocol(data["protocol"])
                params = TraceParams(**data)
            elif kind == "truth":
                truth.append(TruthRecord(**data))
            elif kind == "server":
                server.append(ServerRecord(**data))
            else:
                kind = None
        except (KeyError, TypeError, ValueError) as exc:
            raise TraceFormatError(f"record {number}: {exc}") from exc
        if kind is None:
            raise TraceFormatError(f"record {number}: unknown record type")
    if params is None:
        raise TraceFormatError("trace has no params record")
    return SimulationTrace(params, tuple(server), tuple(truth))
