"""Shared generators and oracles used across the test suite."""

from __future__ import annotations

import random

from open5gsim.switch import FlowEntry, match_context
from open5gsim.wire import (
    BearerKind,
    ConfigTlv,
    ErrorMsg,
    FlowAction,
    FlowMatch,
    FlowMod,
    FlowModBody,
    FlowModCommand,
    GtpTunnel,
    Hello,
    PortMod,
    PortModBody,
    PortModCommand,
    RadioBearer,
    SigTunnel,
)


def random_ip(rng: random.Random) -> bytes:
    return bytes(rng.randrange(256) for _ in range(4))


def random_port_spec(rng: random.Random):
    variant = rng.randrange(4)
    if variant == 0:  # common SRB0 port
        tlvs = random_tlvs(rng)
        return RadioBearer(0, 0, BearerKind.SRB, tlvs)
    if variant == 1:  # dedicated bearer
        if rng.random() < 0.5:
            kind, bearer = BearerKind.SRB, rng.choice([0, 3, 4])
        else:
            kind, bearer = BearerKind.DRB, rng.randrange(32)
        return RadioBearer(rng.randint(1, 65523), bearer, kind, random_tlvs(rng))
    if variant == 2:
        return GtpTunnel(random_ip(rng), random_ip(rng), rng.randrange(1 << 16), rng.randrange(1 << 32))
    return SigTunnel(random_ip(rng), rng.randrange(1 << 32))


def random_tlvs(rng: random.Random) -> tuple[ConfigTlv, ...]:
    return tuple(
        ConfigTlv(rng.randrange(1 << 16), rng.randbytes(rng.randrange(9)))
        for _ in range(rng.randrange(4))
    )


def random_match(rng: random.Random) -> FlowMatch:
    fields = {}
    while not fields:
        if rng.random() < 0.5:
            fields["crnti"] = rng.randrange(65524)
            fields["bearer_id"] = rng.randrange(256)
        if rng.random() < 0.3:
            fields["in_port"] = rng.randrange(1 << 32)
        if rng.random() < 0.3:
            fields["ip_dst"] = random_ip(rng)
        if rng.random() < 0.3:
            fields["ip_proto"] = rng.randrange(256)
        if rng.random() < 0.3:
            fields["l4_dst"] = rng.randrange(1 << 16)
    return FlowMatch(**fields)


def random_message(rng: random.Random, force_type: int | None = None):
    """One random valid Open5G message; covers every type and spec variant."""
    xid = rng.randrange(1 << 32)
    choice = force_type if force_type is not None else rng.randrange(4)
    if choice == 0:
        return Hello(xid)
    if choice == 1:
        return ErrorMsg(xid, rng.randrange(1 << 16), rng.randbytes(rng.randrange(16)))
    if choice == 2:
        command = rng.choice([PortModCommand.CREATE, PortModCommand.MODIFY, PortModCommand.DELETE])
        spec = None if command == PortModCommand.DELETE else random_port_spec(rng)
        return PortMod(xid, PortModBody(command, rng.randrange(1 << 32), spec))
    command = rng.choice([FlowModCommand.ADD, FlowModCommand.DELETE])
    return FlowMod(
        xid,
        FlowModBody(
            command,
            rng.randrange(1 << 16),
            random_match(rng),
            FlowAction(rng.randrange(1 << 32)),
        ),
    )


def oracle_match(entries: list[FlowEntry], ctx) -> FlowAction | None:
    """Naive linear scan with the documented tie-break: highest priority,
    then earliest entry_id. Independent of FlowTable.match."""
    best = None
    for entry in entries:
        if not match_context(entry.match, ctx):
            continue
        if best is None or (entry.priority, -entry.entry_id) > (best.priority, -best.entry_id):
            best = entry
    return best.action if best else None


# Small domains so random tables and contexts actually collide
_CRNTIS = [1, 2, 61]
_BEARERS = [0, 1, 2, 3]
_PORTS = [1, 2, 3, 4, 5]
_IPS = [bytes([10, 0, 1, 1]), bytes([10, 0, 1, 2])]
_PROTOS = [6, 17]
_L4S = [23, 34, 43]


def random_collision_match(rng: random.Random) -> FlowMatch:
    fields = {}
    while not fields:
        if rng.random() < 0.5:
            fields["crnti"] = rng.choice(_CRNTIS)
            fields["bearer_id"] = rng.choice(_BEARERS)
        if rng.random() < 0.3:
            fields["in_port"] = rng.choice(_PORTS)
        if rng.random() < 0.4:
            fields["ip_dst"] = rng.choice(_IPS)
        if rng.random() < 0.4:
            fields["ip_proto"] = rng.choice(_PROTOS)
        if rng.random() < 0.4:
            fields["l4_dst"] = rng.choice(_L4S)
    return FlowMatch(**fields)


def random_entries(rng: random.Random, count: int) -> list[FlowEntry]:
    return [
        FlowEntry(
            entry_id=i + 1,
            priority=rng.choice([100, 110, 120]),
            match=random_collision_match(rng),
            action=FlowAction(rng.choice(_PORTS)),
        )
        for i in range(count)
    ]


def random_context(rng: random.Random):
    from open5gsim.switch import PacketContext

    return PacketContext(
        in_port=rng.choice(_PORTS + [None]),
        crnti=rng.choice(_CRNTIS + [None, 9]),
        bearer_id=rng.choice(_BEARERS + [None, 9]),
        ip_dst=rng.choice(_IPS + [None]),
        ip_proto=rng.choice(_PROTOS + [None]),
        l4_dst=rng.choice(_L4S + [None]),
    )
