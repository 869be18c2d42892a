"""Scenario file format: topology + script + settings in plain text.

Sections start with a bracketed header. [node], [ue], and [session] may
repeat; key lines are `key = value`. The [script] section holds one stimulus
per line: `<tick> <stimulus> <args...>`. Unknown sections, keys, or values
are rejected with the offending line number.

Example:

    [settings]
    seed = 0

    [node]
    name = gnb1
    rat = NR
    ngu_ip = 10.0.0.1

    [ue]
    name = ue1
    attach = gnb1

    [session]
    ue = ue1
    id = 1
    drbs = 1,2
    flow = 1 10.0.1.1 tcp 43 drb=1

    [script]
    0 ue_power_on ue1
    40 send_uplink_data ue1 1 68656c6c6f
    41 inject_downlink_data ue1 10.0.1.2 tcp 34 6869
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass

from .controller import QosFlowSpec, SessionSpec
from .errors import SimulationError
from .netsim import NodeSpec, Settings, Stimulus, Topology, UeSpec
from .node import Rat
from .wire import ip_bytes, ip_str


class ParseError(SimulationError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Scenario:
    topology: Topology
    script: tuple[Stimulus, ...]
    settings: Settings


_PROTO_NAMES = {"tcp": 6, "udp": 17, "icmp": 1}
_PROTO_BY_NUM = {v: k for k, v in _PROTO_NAMES.items()}

_SECTION_KEYS = {
    "settings": {"seed", "admission_cap", "max_events"},
    "node": {"name", "rat", "ngu_ip"},
    "ue": {"name", "attach"},
    "session": {"ue", "id", "drbs", "flow"},
}

_STIMULI_ARITY = {"ue_power_on": 1, "send_uplink_data": 3, "inject_downlink_data": 5}


def _parse_proto(token: str, lineno: int) -> int:
    if token in _PROTO_NAMES:
        return _PROTO_NAMES[token]
    try:
        return int(token)
    except ValueError:
        raise ParseError(lineno, f"unknown protocol {token!r}") from None


def _parse_int(token: str, lineno: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(lineno, f"bad {what} {token!r}") from None


def _parse_ip(token: str, lineno: int) -> str:
    try:
        ipaddress.IPv4Address(token)
    except ipaddress.AddressValueError:
        raise ParseError(lineno, f"bad IPv4 address {token!r}") from None
    return token


class _SectionAccumulator:
    def __init__(self):
        self.nodes: list[NodeSpec] = []
        self.ues: list[UeSpec] = []
        self.sessions: list[tuple[str, SessionSpec]] = []  # (ue name, spec)
        self.settings_kv: dict[str, int] = {}
        self.script: list[Stimulus] = []

    def finish_section(self, name: str, start_line: int, pairs: list[tuple[int, str, str]]) -> None:
        got = {k for _, k, _ in pairs}
        if name == "settings":
            for lineno, key, value in pairs:
                if key in self.settings_kv:
                    raise ParseError(lineno, f"duplicate settings key {key!r}")
                self.settings_kv[key] = _parse_int(value, lineno, key)
            return
        if name == "node":
            kv = _unique_pairs(pairs)
            _require(got, {"name", "rat", "ngu_ip"}, start_line, "node")
            lineno, rat_value = kv["rat"]
            try:
                rat = Rat(rat_value)
            except ValueError:
                raise ParseError(lineno, f"unknown RAT {rat_value!r}") from None
            _parse_ip(kv["ngu_ip"][1], kv["ngu_ip"][0])
            self.nodes.append(NodeSpec(kv["name"][1], rat, kv["ngu_ip"][1]))
            return
        if name == "ue":
            kv = _unique_pairs(pairs)
            _require(got, {"name", "attach"}, start_line, "ue")
            self.ues.append(UeSpec(kv["name"][1], kv["attach"][1]))
            return
        # session
        kv = _unique_pairs(pairs, repeatable={"flow"})
        _require(got, {"ue", "id", "drbs"}, start_line, "session")
        session_id = _parse_int(kv["id"][1], kv["id"][0], "session id")
        drb_line, drb_value = kv["drbs"]
        drbs = tuple(_parse_int(t.strip(), drb_line, "drb") for t in drb_value.split(","))
        flows = []
        for lineno, key, value in pairs:
            if key != "flow":
                continue
            tokens = value.split()
            if len(tokens) != 5 or not tokens[4].startswith("drb="):
                raise ParseError(lineno, "flow wants: <id> <ip_dst> <proto> <l4_dst> drb=<n>")
            flows.append(
                QosFlowSpec(
                    flow_id=_parse_int(tokens[0], lineno, "flow id"),
                    ip_dst=ip_bytes(_parse_ip(tokens[1], lineno)),
                    ip_proto=_parse_proto(tokens[2], lineno),
                    l4_dst=_parse_int(tokens[3], lineno, "l4 port"),
                    drb=_parse_int(tokens[4][4:], lineno, "drb"),
                )
            )
        self.sessions.append((kv["ue"][1], SessionSpec(session_id, drbs, tuple(flows))))

    def add_script_line(self, lineno: int, line: str) -> None:
        tokens = line.split()
        tick = _parse_int(tokens[0], lineno, "tick")
        if len(tokens) < 2:
            raise ParseError(lineno, "script line wants: <tick> <stimulus> <args...>")
        kind = tokens[1]
        args = tokens[2:]
        if kind not in _STIMULI_ARITY:
            raise ParseError(lineno, f"unknown stimulus {kind!r}")
        if len(args) != _STIMULI_ARITY[kind]:
            raise ParseError(lineno, f"{kind} wants {_STIMULI_ARITY[kind]} arguments")
        if kind == "ue_power_on":
            parsed = (args[0],)
        elif kind == "send_uplink_data":
            parsed = (args[0], _parse_int(args[1], lineno, "bearer"), _parse_hex(args[2], lineno))
        else:
            parsed = (
                args[0],
                _parse_ip(args[1], lineno),
                _parse_proto(args[2], lineno),
                _parse_int(args[3], lineno, "l4 port"),
                _parse_hex(args[4], lineno),
            )
        self.script.append(Stimulus(tick, kind, parsed))


def _parse_hex(token: str, lineno: int) -> bytes:
    try:
        return bytes.fromhex(token)
    except ValueError:
        raise ParseError(lineno, f"bad hex payload {token!r}") from None


def _unique_pairs(pairs, repeatable: set[str] = frozenset()) -> dict[str, tuple[int, str]]:
    kv: dict[str, tuple[int, str]] = {}
    for lineno, key, value in pairs:
        if key in repeatable:
            continue
        if key in kv:
            raise ParseError(lineno, f"duplicate key {key!r}")
        kv[key] = (lineno, value)
    return kv


def _require(got: set[str], want: set[str], lineno: int, what: str) -> None:
    missing = want - got
    if missing:
        raise ParseError(lineno, f"{what} section missing keys: {', '.join(sorted(missing))}")


def parse_scenario(text: str) -> Scenario:
    acc = _SectionAccumulator()
    section: str | None = None
    section_line = 0
    pairs: list[tuple[int, str, str]] = []

    def flush():
        if section is not None and section != "script":
            acc.finish_section(section, section_line, pairs)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            flush()
            section = line[1:-1].strip()
            section_line = lineno
            pairs = []
            if section != "script" and section not in _SECTION_KEYS:
                raise ParseError(lineno, f"unknown section {section!r}")
            continue
        if section is None:
            raise ParseError(lineno, "content before any section header")
        if section == "script":
            acc.add_script_line(lineno, line)
            continue
        if "=" not in line:
            raise ParseError(lineno, "expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _SECTION_KEYS[section]:
            raise ParseError(lineno, f"unknown key {key!r} in [{section}]")
        pairs.append((lineno, key, value))
    flush()

    ue_names = {u.name for u in acc.ues}
    sessions_by_ue: dict[str, list[SessionSpec]] = {name: [] for name in ue_names}
    for ue_name, spec in acc.sessions:
        if ue_name not in ue_names:
            raise ParseError(0, f"session references unknown UE {ue_name!r}")
        sessions_by_ue[ue_name].append(spec)
    ues = tuple(
        UeSpec(u.name, u.attach, tuple(sessions_by_ue[u.name])) for u in acc.ues
    )

    settings = Settings(
        seed=acc.settings_kv.get("seed", 0),
        admission_cap=acc.settings_kv.get("admission_cap", 8),
        max_events=acc.settings_kv.get("max_events", 10000),
    )
    topology = Topology(tuple(acc.nodes), ues, seed=settings.seed)
    return Scenario(topology, tuple(acc.script), settings)


def serialize_scenario(scenario: Scenario) -> str:
    out = []
    s = scenario.settings
    out.append("[settings]")
    out.append(f"seed = {s.seed}")
    out.append(f"admission_cap = {s.admission_cap}")
    out.append(f"max_events = {s.max_events}")
    for node in scenario.topology.nodes:
        out.append("")
        out.append("[node]")
        out.append(f"name = {node.name}")
        out.append(f"rat = {node.rat.value}")
        out.append(f"ngu_ip = {node.ngu_ip}")
    for ue in scenario.topology.ues:
        out.append("")
        out.append("[ue]")
        out.append(f"name = {ue.name}")
        out.append(f"attach = {ue.attach}")
        for session in ue.sessions:
            out.append("")
            out.append("[session]")
            out.append(f"ue = {ue.name}")
            out.append(f"id = {session.session_id}")
            out.append("drbs = " + ",".join(str(d) for d in session.drbs))
            for f in session.flows:
                proto = _PROTO_BY_NUM.get(f.ip_proto, str(f.ip_proto))
                out.append(f"flow = {f.flow_id} {ip_str(f.ip_dst)} {proto} {f.l4_dst} drb={f.drb}")
    out.append("")
    out.append("[script]")
    for stim in scenario.script:
        if stim.kind == "ue_power_on":
            out.append(f"{stim.tick} ue_power_on {stim.args[0]}")
        elif stim.kind == "send_uplink_data":
            ue, bearer, payload = stim.args
            out.append(f"{stim.tick} send_uplink_data {ue} {bearer} {payload.hex()}")
        else:
            ue, ip_dst, proto_num, l4_dst, payload = stim.args
            proto = _PROTO_BY_NUM.get(proto_num, str(proto_num))
            out.append(
                f"{stim.tick} inject_downlink_data {ue} {ip_dst} {proto} {l4_dst} {payload.hex()}"
            )
    return "\n".join(out) + "\n"


def load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        return parse_scenario(fh.read())
