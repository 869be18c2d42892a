"""Deterministic discrete-event harness.

Topology = controller + data-plane nodes + UEs + AMF/UPF stubs. Every link
has a fixed one-tick delay and FIFO ordering, so a given (topology, script,
seed) always produces the same trace. Each send becomes one trace record;
an Open5G configuration batch counts as a single record.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from . import wire
from .controller import (
    ConfigBatch,
    Controller,
    NgapOut,
    RrcDownlink,
    SessionSpec,
    SRB1_BEARER,
    session_spec_to_doc,
)
from .errors import (
    BudgetExceededError,
    NotIdleError,
    ScriptError,
    UnknownUeError,
    WireDecodeError,
)
from .messages import (
    NGAP_INITIAL_CONTEXT_SETUP_REQUEST,
    NGAP_INITIAL_CONTEXT_SETUP_RESPONSE,
    NGAP_INITIAL_UE_MESSAGE,
    RRC_RECONFIGURATION,
    RRC_RECONFIGURATION_COMPLETE,
    RRC_SECURITY_MODE_COMMAND,
    RRC_SECURITY_MODE_COMPLETE,
    RRC_SETUP,
    RRC_SETUP_COMPLETE,
    RRC_SETUP_REQUEST,
    NgapMessage,
    RrcMessage,
    ngap_from_bytes,
    ngap_to_bytes,
    rrc_from_bytes,
    rrc_to_bytes,
)
from .node import DataPlaneNode, Rat
from .wire import GtpTunnel, RadioBearer, SigTunnel
from .trace import EventTrace, TraceRecord, fnv1a64

UPF_IP = "10.9.0.1"

_SRB_CHANNEL = {0: "SRB0", 3: "SRB1", 4: "SRB2"}
_CHANNEL_BEARER = {v: k for k, v in _SRB_CHANNEL.items()}


def srb_channel(bearer_id: int) -> str:
    return _SRB_CHANNEL.get(bearer_id, "RADIO_DATA")


# ---------------------------------------------------------------------------
# Topology


@dataclass(frozen=True)
class NodeSpec:
    name: str
    rat: Rat
    ngu_ip: str


@dataclass(frozen=True)
class UeSpec:
    name: str
    attach: str
    sessions: tuple[SessionSpec, ...] = ()


@dataclass(frozen=True)
class Topology:
    nodes: tuple[NodeSpec, ...]
    ues: tuple[UeSpec, ...]
    seed: int = 0


@dataclass(frozen=True)
class Stimulus:
    tick: int
    kind: str  # ue_power_on | send_uplink_data | inject_downlink_data
    args: tuple


@dataclass(frozen=True)
class Settings:
    seed: int = 0
    admission_cap: int = 8
    max_events: int = 10000


# ---------------------------------------------------------------------------
# UE behavior model: the reactive responder role of the initial-access flow


class UeSim:
    def __init__(self, name: str, ue_tmp_id: int, attach: str):
        self.name = name
        self.ue_tmp_id = ue_tmp_id
        self.attach = attach
        self.state = "IDLE"
        self.crnti: int | None = None
        self.sessions: list[dict] = []
        self.received: list[tuple[int, bytes]] = []

    def power_on(self) -> list[tuple[int, RrcMessage]]:
        if self.state != "IDLE":
            raise NotIdleError(f"{self.name} is {self.state}")
        self.state = "AWAIT_SETUP"
        return [(0, RrcMessage(RRC_SETUP_REQUEST, {"ue_tmp_id": self.ue_tmp_id}))]

    def on_rrc(self, bearer_id: int, msg: RrcMessage) -> list[tuple[int, RrcMessage]]:
        if msg.kind == RRC_SETUP and self.state == "AWAIT_SETUP":
            self.crnti = msg.fields["crnti"]
            self.state = "AWAIT_SECURITY"
            nas = f"nas-registration:{self.name}".encode().hex()
            srb1 = msg.fields.get("srb1_bearer", SRB1_BEARER)
            return [(srb1, RrcMessage(RRC_SETUP_COMPLETE, {"nas": nas}))]
        if msg.kind == RRC_SECURITY_MODE_COMMAND and self.state == "AWAIT_SECURITY":
            self.state = "AWAIT_RECONFIG"
            return [(bearer_id, RrcMessage(RRC_SECURITY_MODE_COMPLETE, {}))]
        if msg.kind == RRC_RECONFIGURATION and self.state == "AWAIT_RECONFIG":
            self.sessions = msg.fields.get("sessions", [])
            self.state = "CONNECTED"
            return [(bearer_id, RrcMessage(RRC_RECONFIGURATION_COMPLETE, {}))]
        return []  # unexpected downlink: ignore

    def on_data(self, bearer_id: int, packet: bytes) -> None:
        self.received.append((bearer_id, packet))


# ---------------------------------------------------------------------------
# Core stubs


class AmfStub:
    """Answers InitialUeMessage with the UE's preconfigured session specs."""

    def __init__(self, session_specs: dict[int, tuple[SessionSpec, ...]]):
        self.session_specs = session_specs
        self.context_responses: list[NgapMessage] = []

    def handle(self, msg: NgapMessage) -> NgapMessage | None:
        if msg.kind == NGAP_INITIAL_UE_MESSAGE:
            ue_tmp_id = msg.fields.get("ue_tmp_id")
            if ue_tmp_id not in self.session_specs:
                raise UnknownUeError(f"ue_tmp_id {ue_tmp_id}")
            sessions = [session_spec_to_doc(s) for s in self.session_specs[ue_tmp_id]]
            security = f"sec-{ue_tmp_id}".encode().hex()
            return NgapMessage(
                NGAP_INITIAL_CONTEXT_SETUP_REQUEST,
                {"ue_tmp_id": ue_tmp_id, "sessions": sessions, "security_info": security},
            )
        if msg.kind == NGAP_INITIAL_CONTEXT_SETUP_RESPONSE:
            self.context_responses.append(msg)
            return None
        raise ScriptError(f"AMF cannot handle {msg.kind}")


class UpfStub:
    def __init__(self):
        self.received: list[tuple[int, bytes]] = []  # uplink (teid, payload)
        self.bad_frames = 0
        # (ue_tmp_id, session_id) -> (node_id, teid)
        self.sessions: dict[tuple[int, int], tuple[str, int]] = {}

    def register_session(self, ue_tmp_id: int, session_id: int, node_id: str, teid: int) -> None:
        self.sessions[(ue_tmp_id, session_id)] = (node_id, teid)

    def on_uplink(self, frame: bytes) -> None:
        try:
            teid, payload = wire.decap_gtpu(frame)
        except WireDecodeError:
            self.bad_frames += 1
            return
        self.received.append((teid, payload))

    def downlink(self, ue_tmp_id: int, packet: bytes) -> tuple[str, bytes]:
        """Wrap an injected pseudo-IP packet toward the UE's serving node."""
        for (uid, _session_id), (node_id, teid) in sorted(self.sessions.items()):
            if uid == ue_tmp_id:
                return node_id, wire.encap_gtpu(packet, teid)
        raise ScriptError(f"no configured session for ue_tmp_id {ue_tmp_id}")


# ---------------------------------------------------------------------------
# Simulator


@dataclass
class _Delivery:
    src: str
    dst: str
    channel: str
    kind: str
    payload: bytes
    crnti: int | None = None
    bearer_id: int | None = None
    ue_tmp_id: int | None = None


class Simulator:
    def __init__(self, topology: Topology, script: list[Stimulus], settings: Settings | None = None):
        self.topology = topology
        self.script = list(script)
        self.settings = settings or Settings(seed=topology.seed)

        self.controller = Controller(admission_cap=self.settings.admission_cap)
        self.nodes: dict[str, DataPlaneNode] = {}
        node_names = set()
        for spec in topology.nodes:
            node_names.add(spec.name)
            self.nodes[spec.name] = DataPlaneNode(spec.name, spec.rat, wire.ip_bytes(spec.ngu_ip))
            self.controller.register_node(spec.name, spec.rat, spec.ngu_ip, UPF_IP)

        self.ues: dict[str, UeSim] = {}
        self.ue_by_tmp_id: dict[int, UeSim] = {}
        session_specs: dict[int, tuple[SessionSpec, ...]] = {}
        for i, spec in enumerate(topology.ues):
            if spec.attach not in node_names:
                raise ScriptError(f"ue {spec.name} attaches to unknown node {spec.attach}")
            ue = UeSim(spec.name, i + 1, spec.attach)
            self.ues[spec.name] = ue
            self.ue_by_tmp_id[ue.ue_tmp_id] = ue
            session_specs[ue.ue_tmp_id] = spec.sessions

        self.amf = AmfStub(session_specs)
        self.upf = UpfStub()

        for stim in self.script:
            if stim.kind not in ("ue_power_on", "send_uplink_data", "inject_downlink_data"):
                raise ScriptError(f"unknown stimulus {stim.kind!r}")
            if stim.args[0] not in self.ues:
                raise ScriptError(f"stimulus references unknown UE {stim.args[0]!r}")

        self.records: list[TraceRecord] = []
        self.table_snapshots: list[tuple[int, dict[str, list[str]]]] = []
        self.uplink_injected = 0
        self.downlink_injected = 0
        self._heap: list = []
        self._seq = 0
        self._step = 0
        self._now = 0

    # -- plumbing -----------------------------------------------------------

    def _push(self, time: int, item) -> None:
        heapq.heappush(self._heap, (time, self._seq, item))
        self._seq += 1

    def _send(self, delivery: _Delivery) -> None:
        self._step += 1
        self.records.append(
            TraceRecord(
                self._step,
                self._now,
                delivery.src,
                delivery.dst,
                delivery.channel,
                delivery.kind,
                fnv1a64(delivery.payload),
            )
        )
        self._push(self._now + 1, delivery)

    def _snapshot_tables(self, step_no: int) -> None:
        self.table_snapshots.append(
            (step_no, {name: render_flow_table(node) for name, node in self.nodes.items()})
        )

    # -- run ------------------------------------------------------------------

    def run(self) -> EventTrace:
        for spec in self.topology.nodes:
            self._emit_controller(self.controller.bootstrap_node(spec.name))
        for stim in self.script:
            self._push(stim.tick, stim)

        processed = 0
        while self._heap:
            processed += 1
            if processed > self.settings.max_events:
                raise BudgetExceededError(f"exceeded {self.settings.max_events} events")
            time, _seq, item = heapq.heappop(self._heap)
            self._now = time
            if isinstance(item, Stimulus):
                self._process_stimulus(item)
            else:
                step_no = self._find_step(item)
                self._process_delivery(item)
                if step_no is not None:
                    self._snapshot_tables(step_no)
        return EventTrace(list(self.records))

    def _find_step(self, delivery: _Delivery) -> int | None:
        # deliveries are processed in send (step) order; track via a cursor
        if not hasattr(self, "_delivery_cursor"):
            self._delivery_cursor = 0
        self._delivery_cursor += 1
        return self._delivery_cursor

    # -- stimuli ----------------------------------------------------------------

    def _process_stimulus(self, stim: Stimulus) -> None:
        ue = self.ues[stim.args[0]]
        if stim.kind == "ue_power_on":
            for bearer, msg in ue.power_on():
                self._send_ue_rrc(ue, bearer, msg)
        elif stim.kind == "send_uplink_data":
            _, bearer_id, payload = stim.args
            self.uplink_injected += 1
            self._send(
                _Delivery(
                    ue.name,
                    ue.attach,
                    "RADIO_DATA",
                    "Data",
                    payload,
                    crnti=ue.crnti if ue.crnti is not None else 0,
                    bearer_id=bearer_id,
                )
            )
        else:  # inject_downlink_data
            _, ip_dst, ip_proto, l4_dst, payload = stim.args
            packet = wire.pack_ip_packet(wire.ip_bytes(ip_dst), ip_proto, l4_dst, payload)
            node_id, frame = self.upf.downlink(ue.ue_tmp_id, packet)
            self.downlink_injected += 1
            self._send(_Delivery("upf", node_id, "NGU", "GPDU", frame))

    def _send_ue_rrc(self, ue: UeSim, bearer: int, msg: RrcMessage) -> None:
        payload = rrc_to_bytes(msg)
        if bearer == 0:
            payload = wire.pack_envelope(ue.ue_tmp_id, payload)
            crnti = 0
        else:
            crnti = ue.crnti
        self._send(
            _Delivery(
                ue.name,
                ue.attach,
                srb_channel(bearer),
                msg.kind,
                payload,
                crnti=crnti,
                bearer_id=bearer,
            )
        )

    # -- controller emissions -----------------------------------------------------

    def _emit_controller(self, emissions) -> None:
        for em in emissions:
            if isinstance(em, ConfigBatch):
                self._send(_Delivery("src", em.node_id, "OPEN5G", em.label, em.to_bytes()))
            elif isinstance(em, RrcDownlink):
                payload = rrc_to_bytes(em.msg)
                if em.srb_bearer == 0:
                    payload = wire.pack_envelope(em.ue_tmp_id, payload)
                frame = wire.encap_sig(payload, em.tunnel_id)
                self._send(
                    _Delivery("src", em.node_id, srb_channel(em.srb_bearer), em.msg.kind, frame)
                )
            elif isinstance(em, NgapOut):
                self._send(_Delivery("src", "amf", "NGAP", em.msg.kind, ngap_to_bytes(em.msg)))

    # -- deliveries -----------------------------------------------------------------

    def _process_delivery(self, d: _Delivery) -> None:
        if d.dst in self.nodes:
            self._node_receive(self.nodes[d.dst], d)
        elif d.dst == "src":
            self._src_receive(d)
        elif d.dst == "amf":
            reply = self.amf.handle(ngap_from_bytes(d.payload))
            if reply is not None:
                self._send(_Delivery("amf", "src", "NGAP", reply.kind, ngap_to_bytes(reply)))
        elif d.dst == "upf":
            self.upf.on_uplink(d.payload)
        elif d.dst in self.ues:
            self._ue_receive(self.ues[d.dst], d)

    def _node_receive(self, node: DataPlaneNode, d: _Delivery) -> None:
        if d.channel == "OPEN5G":
            emissions = node.handle_open5g(d.payload)
        elif d.channel == "NGU":
            emissions = node.ingress_ngu(d.payload)
        elif d.src == "src":
            emissions = node.ingress_sigtunnel(d.payload)
        else:  # radio ingress from a UE
            emissions = node.ingress_radio(d.crnti, d.bearer_id, d.payload)

        for em in emissions:
            if em.kind == "open5g":
                self._send(_Delivery(node.node_id, "src", "OPEN5G", "Error", em.payload))
            elif em.kind == "sig":
                kind = d.kind  # the node forwards the message unmodified
                self._send(
                    _Delivery(
                        node.node_id,
                        "src",
                        srb_channel(em.bearer_id) if em.bearer_id is not None else "SRB0",
                        kind,
                        em.payload,
                    )
                )
            elif em.kind == "ngu":
                self._send(_Delivery(node.node_id, "upf", "NGU", "GPDU", em.payload))
            elif em.kind == "radio":
                ue = self._resolve_ue(node.node_id, em.crnti, em.ue_tmp_id)
                if ue is None:
                    node.drop_count += 1
                    continue
                channel = srb_channel(em.bearer_id)
                kind = d.kind if channel != "RADIO_DATA" else "Data"
                self._send(
                    _Delivery(
                        node.node_id,
                        ue.name,
                        channel,
                        kind,
                        em.payload,
                        bearer_id=em.bearer_id,
                    )
                )

    def _resolve_ue(self, node_id: str, crnti: int | None, ue_tmp_id: int | None) -> UeSim | None:
        if ue_tmp_id is not None:
            ue = self.ue_by_tmp_id.get(ue_tmp_id)
            return ue if ue is not None and ue.attach == node_id else None
        for ue in self.ues.values():
            if ue.attach == node_id and ue.crnti == crnti:
                return ue
        return None

    def _src_receive(self, d: _Delivery) -> None:
        if d.channel == "OPEN5G":
            msg = wire.decode_message(d.payload)
            self.controller.on_node_error(d.src, msg.code, msg.detail)
            return
        if d.channel == "NGAP":
            emissions = self.controller.on_ngap(ngap_from_bytes(d.payload))
            self._emit_controller(emissions)
            self._register_upf_sessions()
            return
        # signaling tunnel uplink
        tunnel_id, payload = wire.decap_sig(d.payload)
        info = self.controller.tunnel_info.get(tunnel_id)
        ue_tmp_id = None
        if info is not None and info.ue_tmp_id is None:
            ue_tmp_id, payload = wire.unpack_envelope(payload)
        rrc = rrc_from_bytes(payload)
        emissions = self.controller.on_rrc_uplink(d.src, tunnel_id, ue_tmp_id, rrc)
        self._emit_controller(emissions)

    def _register_upf_sessions(self) -> None:
        for ue in self.controller.ue_contexts.values():
            for session in ue.pdu_sessions:
                self.upf.register_session(ue.ue_tmp_id, session.session_id, ue.node_id, session.teid)

    def _ue_receive(self, ue: UeSim, d: _Delivery) -> None:
        if d.channel == "RADIO_DATA":
            ue.on_data(d.bearer_id, d.payload)
            return
        bearer = _CHANNEL_BEARER[d.channel]
        for reply_bearer, msg in ue.on_rrc(bearer, rrc_from_bytes(d.payload)):
            self._send_ue_rrc(ue, reply_bearer, msg)

    # -- inspection -------------------------------------------------------------

    def table_at_step(self, node_id: str, at_step: int) -> list[str]:
        rows: list[str] = []
        for step_no, tables in self.table_snapshots:
            if step_no > at_step:
                break
            rows = tables[node_id]
        return rows


def render_flow_table(node: DataPlaneNode) -> list[str]:
    """Render (match, action) rows in priority then installation order."""
    rows = []
    for entry in node.table.ordered_entries():
        rows.append(f"{entry.priority} [{_match_str(entry)}] -> [{_action_str(entry, node)}]")
    return rows


def _match_str(entry) -> str:
    m = entry.match
    parts = []
    if m.in_port is not None:
        parts.append(f"in_port={m.in_port}")
    if m.crnti is not None:
        parts.append(f"crnti={m.crnti}")
    if m.bearer_id is not None:
        parts.append(f"bearer={m.bearer_id}")
    if m.ip_dst is not None:
        parts.append(f"ip_dst={wire.ip_str(m.ip_dst)}")
    if m.ip_proto is not None:
        parts.append(f"proto={m.ip_proto}")
    if m.l4_dst is not None:
        parts.append(f"l4_dst={m.l4_dst}")
    return ",".join(parts)


def _action_str(entry, node: DataPlaneNode) -> str:
    port = node.registry.get(entry.action.out_port)
    if port is None:
        return f"output port={entry.action.out_port}"
    spec = port.spec
    if isinstance(spec, RadioBearer):
        return f"output radio(crnti={spec.crnti},bearer={spec.bearer_id})"
    if isinstance(spec, GtpTunnel):
        return f"output gtp(udp={spec.udp_port},teid={spec.teid})"
    if isinstance(spec, SigTunnel):
        return f"output sig(tunnel={spec.tunnel_id})"
    return f"output port={entry.action.out_port}"


def run_scenario(topology: Topology, script: list[Stimulus], settings: Settings | None = None) -> EventTrace:
    return Simulator(topology, script, settings).run()
