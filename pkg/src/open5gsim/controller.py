"""The SDN RAN controller (SRC).

Hosts three roles behind one state machine: the Open5G configuration point
(emits PORT_MOD/FLOW_MOD batches), per-UE RRC handling, and the NG-AP
endpoint toward the AMF. All identifiers are allocated deterministically so
identical inputs produce identical command streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from . import wire
from .errors import (
    AlreadyBootstrappedError,
    InvalidSessionError,
    ProtocolViolationError,
    UnknownTunnelError,
    UnknownUeError,
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
)
from .node import Rat
from .wire import (
    BearerKind,
    ConfigTlv,
    FlowAction,
    FlowMatch,
    FlowMod,
    FlowModBody,
    FlowModCommand,
    GtpTunnel,
    LayerTlv,
    Open5GMessage,
    PortMod,
    PortModBody,
    PortModCommand,
    RadioBearer,
    SigTunnel,
)

# Signaling bearer numbering follows the flow table's literal labels
SRB0_BEARER = 0
SRB1_BEARER = 3
SRB2_BEARER = 4

# Flow priorities chosen so a table dump lists dedicated data entries first,
# matching the reference table's row order.
PRIO_UPLINK_DATA = 120
PRIO_DOWNLINK_FLOW = 110
PRIO_SIGNALING = 100

CRNTI_FIRST = 0x003D

# Per-RAT radio layer configuration; contents are opaque to the protocol.
_RAT_LAYERS = {
    Rat.NR: (LayerTlv.SDAP, LayerTlv.PDCP, LayerTlv.RLC, LayerTlv.MAC, LayerTlv.PHY),
    Rat.LTE: (LayerTlv.PDCP, LayerTlv.RLC, LayerTlv.MAC, LayerTlv.PHY),
    Rat.WLAN: (LayerTlv.MAC, LayerTlv.PHY),
}


def default_layer_config(rat: Rat) -> tuple[ConfigTlv, ...]:
    return tuple(ConfigTlv(int(t), f"{rat.value.lower()}-{t.name.lower()}-default".encode()) for t in _RAT_LAYERS[rat])


class RrcState(Enum):
    IDLE = "IDLE"
    SETUP_REQUESTED = "SETUP_REQUESTED"
    CONNECTED = "CONNECTED"
    SECURED = "SECURED"
    CONFIGURED = "CONFIGURED"
    FAILED = "FAILED"


@dataclass(frozen=True)
class QosFlowSpec:
    flow_id: int
    ip_dst: bytes
    ip_proto: int
    l4_dst: int
    drb: int  # bearer id of the serving DRB


@dataclass(frozen=True)
class SessionSpec:
    session_id: int
    drbs: tuple[int, ...]
    flows: tuple[QosFlowSpec, ...]


@dataclass
class PduSessionCtx:
    session_id: int
    drb_ports: dict[int, int]  # bearer_id -> radio port id
    ngu_port_id: int
    teid: int
    udp_port: int
    flows: tuple[QosFlowSpec, ...]


@dataclass
class UeContext:
    ue_tmp_id: int
    node_id: str
    crnti: int
    rrc_state: RrcState = RrcState.SETUP_REQUESTED
    srb_ports: dict[int, int] = field(default_factory=dict)  # bearer -> radio port
    srb_sig_ports: dict[int, int] = field(default_factory=dict)  # bearer -> tunnel port
    srb_tunnels: dict[int, int] = field(default_factory=dict)  # bearer -> tunnel id
    pdu_sessions: list[PduSessionCtx] = field(default_factory=list)
    security_info: str = ""
    security_mode_sent: bool = False


@dataclass
class TunnelInfo:
    node_id: str
    srb_bearer: int
    ue_tmp_id: int | None  # None for the shared SRB0 tunnel


@dataclass
class _NodeState:
    node_id: str
    rat: Rat
    ngu_ip: bytes
    upf_ip: bytes
    bootstrapped: bool = False
    next_port_id: int = 1
    next_crnti: int = CRNTI_FIRST
    next_xid: int = 1
    ue_count: int = 0
    srb0_port_id: int = 0
    srb0_sig_port_id: int = 0
    srb0_tunnel_id: int = 0


# Controller emissions (mapped onto links by the harness)


@dataclass
class ConfigBatch:
    node_id: str
    label: str
    messages: list[Open5GMessage]

    def to_bytes(self) -> bytes:
        return b"".join(wire.encode_message(m) for m in self.messages)


@dataclass
class RrcDownlink:
    node_id: str
    tunnel_id: int
    srb_bearer: int
    ue_tmp_id: int | None  # set only for SRB0 (envelope demux)
    msg: RrcMessage


@dataclass
class NgapOut:
    msg: NgapMessage


Emission = ConfigBatch | RrcDownlink | NgapOut


class Controller:
    def __init__(self, controller_ip: str = "10.255.0.1", admission_cap: int = 8, admit_fn=None):
        self.controller_ip = wire.ip_bytes(controller_ip)
        self.admission_cap = admission_cap
        self.admit_fn = admit_fn
        self.nodes: dict[str, _NodeState] = {}
        self.ue_contexts: dict[int, UeContext] = {}
        self.tunnel_info: dict[int, TunnelInfo] = {}
        self._next_tunnel_id = 1
        self._next_teid = 1
        self._next_udp_port = 2152

    # -- allocators ----------------------------------------------------------

    def _alloc_port(self, node: _NodeState) -> int:
        port_id = node.next_port_id
        node.next_port_id += 1
        return port_id

    def _alloc_xid(self, node: _NodeState) -> int:
        xid = node.next_xid
        node.next_xid += 1
        return xid

    def _alloc_tunnel(self, node_id: str, srb_bearer: int, ue_tmp_id: int | None) -> int:
        tunnel_id = self._next_tunnel_id
        self._next_tunnel_id += 1
        self.tunnel_info[tunnel_id] = TunnelInfo(node_id, srb_bearer, ue_tmp_id)
        return tunnel_id

    # -- topology ------------------------------------------------------------

    def register_node(self, node_id: str, rat: Rat, ngu_ip: str, upf_ip: str) -> None:
        self.nodes[node_id] = _NodeState(node_id, rat, wire.ip_bytes(ngu_ip), wire.ip_bytes(upf_ip))

    # -- admission -----------------------------------------------------------

    def admit_ue(self, node_id: str, request: RrcMessage | None = None) -> bool:
        if self.admit_fn is not None:
            return self.admit_fn(node_id, request)
        return self.nodes[node_id].ue_count < self.admission_cap

    # -- step 1: system startup ----------------------------------------------

    def bootstrap_node(self, node_id: str) -> list[Emission]:
        node = self.nodes[node_id]
        if node.bootstrapped:
            raise AlreadyBootstrappedError(node_id)
        node.bootstrapped = True

        radio_port = self._alloc_port(node)
        sig_port = self._alloc_port(node)
        tunnel_id = self._alloc_tunnel(node_id, SRB0_BEARER, None)
        node.srb0_port_id = radio_port
        node.srb0_sig_port_id = sig_port
        node.srb0_tunnel_id = tunnel_id

        messages = [
            PortMod(
                self._alloc_xid(node),
                PortModBody(
                    PortModCommand.CREATE,
                    radio_port,
                    RadioBearer(0, SRB0_BEARER, BearerKind.SRB, default_layer_config(node.rat)),
                ),
            ),
            PortMod(
                self._alloc_xid(node),
                PortModBody(
                    PortModCommand.CREATE,
                    sig_port,
                    SigTunnel(self.controller_ip, tunnel_id),
                ),
            ),
            FlowMod(
                self._alloc_xid(node),
                FlowModBody(
                    FlowModCommand.ADD,
                    PRIO_SIGNALING,
                    FlowMatch(crnti=0, bearer_id=SRB0_BEARER),
                    FlowAction(sig_port),
                ),
            ),
            FlowMod(
                self._alloc_xid(node),
                FlowModBody(
                    FlowModCommand.ADD,
                    PRIO_SIGNALING,
                    FlowMatch(in_port=sig_port),
                    FlowAction(radio_port),
                ),
            ),
        ]
        return [ConfigBatch(node_id, "CreatePortsSrb0", messages)]

    # -- SRB pair helper -------------------------------------------------------

    def _srb_pair(self, node: _NodeState, ue: UeContext, bearer: int) -> list[Open5GMessage]:
        """Dedicated SRB: radio port + controller tunnel port + both flow entries."""
        radio_port = self._alloc_port(node)
        sig_port = self._alloc_port(node)
        tunnel_id = self._alloc_tunnel(node.node_id, bearer, ue.ue_tmp_id)
        ue.srb_ports[bearer] = radio_port
        ue.srb_sig_ports[bearer] = sig_port
        ue.srb_tunnels[bearer] = tunnel_id
        return [
            PortMod(
                self._alloc_xid(node),
                PortModBody(
                    PortModCommand.CREATE,
                    radio_port,
                    RadioBearer(ue.crnti, bearer, BearerKind.SRB, default_layer_config(node.rat)),
                ),
            ),
            PortMod(
                self._alloc_xid(node),
                PortModBody(
                    PortModCommand.CREATE,
                    sig_port,
                    SigTunnel(self.controller_ip, tunnel_id),
                ),
            ),
            FlowMod(
                self._alloc_xid(node),
                FlowModBody(
                    FlowModCommand.ADD,
                    PRIO_SIGNALING,
                    FlowMatch(crnti=ue.crnti, bearer_id=bearer),
                    FlowAction(sig_port),
                ),
            ),
            FlowMod(
                self._alloc_xid(node),
                FlowModBody(
                    FlowModCommand.ADD,
                    PRIO_SIGNALING,
                    FlowMatch(in_port=sig_port),
                    FlowAction(radio_port),
                ),
            ),
        ]

    # -- uplink RRC ------------------------------------------------------------

    def on_rrc_uplink(
        self,
        node_id: str,
        tunnel_id: int,
        ue_tmp_id: int | None,
        rrc: RrcMessage,
    ) -> list[Emission]:
        info = self.tunnel_info.get(tunnel_id)
        if info is None or info.node_id != node_id:
            raise UnknownTunnelError(f"tunnel {tunnel_id} at {node_id}")
        if info.ue_tmp_id is not None:
            ue_tmp_id = info.ue_tmp_id

        if rrc.kind == RRC_SETUP_REQUEST:
            return self._on_setup_request(node_id, ue_tmp_id, rrc)

        ue = self.ue_contexts.get(ue_tmp_id)
        if ue is None:
            raise UnknownUeError(f"ue_tmp_id {ue_tmp_id}")

        if rrc.kind == RRC_SETUP_COMPLETE:
            if ue.rrc_state != RrcState.SETUP_REQUESTED:
                raise ProtocolViolationError(f"{rrc.kind} in {ue.rrc_state.value}")
            ue.rrc_state = RrcState.CONNECTED
            return [
                NgapOut(
                    NgapMessage(
                        NGAP_INITIAL_UE_MESSAGE,
                        {"ue_tmp_id": ue.ue_tmp_id, "nas": rrc.fields["nas"]},
                    )
                )
            ]

        if rrc.kind == RRC_SECURITY_MODE_COMPLETE:
            if ue.rrc_state != RrcState.CONNECTED or not ue.security_mode_sent:
                raise ProtocolViolationError(f"{rrc.kind} in {ue.rrc_state.value}")
            ue.rrc_state = RrcState.SECURED
            reconfig = RrcMessage(
                RRC_RECONFIGURATION,
                {
                    "sessions": [
                        {"session_id": s.session_id, "drbs": sorted(s.drb_ports)}
                        for s in ue.pdu_sessions
                    ]
                },
            )
            return [
                RrcDownlink(node_id, ue.srb_tunnels[SRB1_BEARER], SRB1_BEARER, None, reconfig)
            ]

        if rrc.kind == RRC_RECONFIGURATION_COMPLETE:
            if ue.rrc_state != RrcState.SECURED:
                raise ProtocolViolationError(f"{rrc.kind} in {ue.rrc_state.value}")
            ue.rrc_state = RrcState.CONFIGURED
            response = NgapMessage(
                NGAP_INITIAL_CONTEXT_SETUP_RESPONSE,
                {
                    "ue_tmp_id": ue.ue_tmp_id,
                    "sessions": [s.session_id for s in ue.pdu_sessions],
                },
            )
            return [NgapOut(response)]

        raise ProtocolViolationError(f"unexpected uplink {rrc.kind}")

    def _on_setup_request(self, node_id: str, ue_tmp_id: int | None, rrc: RrcMessage) -> list[Emission]:
        if ue_tmp_id is None:
            raise ProtocolViolationError("RrcSetupRequest without UE identity")
        if ue_tmp_id in self.ue_contexts:
            raise ProtocolViolationError(f"ue_tmp_id {ue_tmp_id} already in procedure")
        if not self.admit_ue(node_id, rrc):
            return []
        node = self.nodes[node_id]
        crnti = node.next_crnti
        node.next_crnti += 1
        node.ue_count += 1
        ue = UeContext(ue_tmp_id, node_id, crnti)
        self.ue_contexts[ue_tmp_id] = ue

        batch = ConfigBatch(node_id, "CreatePortsSrb1", self._srb_pair(node, ue, SRB1_BEARER))
        setup = RrcMessage(RRC_SETUP, {"crnti": crnti, "srb1_bearer": SRB1_BEARER})
        return [
            batch,
            RrcDownlink(node_id, node.srb0_tunnel_id, SRB0_BEARER, ue_tmp_id, setup),
        ]

    # -- session configuration ---------------------------------------------------

    def build_session_config(
        self, ue: UeContext, session: SessionSpec
    ) -> tuple[list[PortModBody], list[FlowModBody]]:
        """Port and flow commands realizing one PDU session at the serving node."""
        drb_set = set(session.drbs)
        for flow in session.flows:
            if flow.drb not in drb_set:
                raise InvalidSessionError(
                    f"flow {flow.flow_id} maps to absent DRB {flow.drb}"
                )
        node = self.nodes[ue.node_id]

        port_mods: list[PortModBody] = []
        flow_mods: list[FlowModBody] = []

        drb_ports: dict[int, int] = {}
        for bearer in session.drbs:
            port_id = self._alloc_port(node)
            drb_ports[bearer] = port_id
            port_mods.append(
                PortModBody(
                    PortModCommand.CREATE,
                    port_id,
                    RadioBearer(ue.crnti, bearer, BearerKind.DRB, default_layer_config(node.rat)),
                )
            )

        ngu_port = self._alloc_port(node)
        teid = self._next_teid
        self._next_teid += 1
        udp_port = self._next_udp_port
        self._next_udp_port += 1
        port_mods.append(
            PortModBody(
                PortModCommand.CREATE,
                ngu_port,
                GtpTunnel(node.ngu_ip, node.upf_ip, udp_port, teid),
            )
        )

        for bearer in session.drbs:
            flow_mods.append(
                FlowModBody(
                    FlowModCommand.ADD,
                    PRIO_UPLINK_DATA,
                    FlowMatch(crnti=ue.crnti, bearer_id=bearer),
                    FlowAction(ngu_port),
                )
            )
        for flow in session.flows:
            flow_mods.append(
                FlowModBody(
                    FlowModCommand.ADD,
                    PRIO_DOWNLINK_FLOW,
                    FlowMatch(ip_dst=flow.ip_dst, ip_proto=flow.ip_proto, l4_dst=flow.l4_dst),
                    FlowAction(drb_ports[flow.drb]),
                )
            )

        ue.pdu_sessions.append(
            PduSessionCtx(session.session_id, drb_ports, ngu_port, teid, udp_port, session.flows)
        )
        return port_mods, flow_mods

    # -- NG-AP -----------------------------------------------------------------

    def on_ngap(self, msg: NgapMessage) -> list[Emission]:
        if msg.kind != NGAP_INITIAL_CONTEXT_SETUP_REQUEST:
            raise ProtocolViolationError(f"unexpected NGAP {msg.kind}")
        ue = self.ue_contexts.get(msg.fields.get("ue_tmp_id"))
        if ue is None:
            raise UnknownUeError(f"ue_tmp_id {msg.fields.get('ue_tmp_id')}")
        if ue.rrc_state != RrcState.CONNECTED or ue.security_mode_sent:
            raise ProtocolViolationError(f"{msg.kind} in {ue.rrc_state.value}")
        node = self.nodes[ue.node_id]
        ue.security_info = msg.fields.get("security_info", "")

        messages: list[Open5GMessage] = []

        # SRB2: dedicated radio port paired onto the existing SRB1 tunnel
        srb2_port = self._alloc_port(node)
        ue.srb_ports[SRB2_BEARER] = srb2_port
        ue.srb_tunnels[SRB2_BEARER] = ue.srb_tunnels[SRB1_BEARER]
        srb1_sig_port = ue.srb_sig_ports[SRB1_BEARER]
        messages.append(
            PortMod(
                self._alloc_xid(node),
                PortModBody(
                    PortModCommand.CREATE,
                    srb2_port,
                    RadioBearer(ue.crnti, SRB2_BEARER, BearerKind.SRB, default_layer_config(node.rat)),
                ),
            )
        )
        messages.append(
            FlowMod(
                self._alloc_xid(node),
                FlowModBody(
                    FlowModCommand.ADD,
                    PRIO_SIGNALING,
                    FlowMatch(crnti=ue.crnti, bearer_id=SRB2_BEARER),
                    FlowAction(srb1_sig_port),
                ),
            )
        )

        for session_doc in msg.fields.get("sessions", []):
            session = session_spec_from_doc(session_doc)
            port_mods, flow_mods = self.build_session_config(ue, session)
            messages.extend(PortMod(self._alloc_xid(node), b) for b in port_mods)
            messages.extend(FlowMod(self._alloc_xid(node), b) for b in flow_mods)

        batch = ConfigBatch(ue.node_id, "CreatePortsSrb2Drbs", messages)
        ue.security_mode_sent = True
        command = RrcMessage(RRC_SECURITY_MODE_COMMAND, {"security_info": ue.security_info})
        return [
            batch,
            RrcDownlink(ue.node_id, ue.srb_tunnels[SRB1_BEARER], SRB1_BEARER, None, command),
        ]

    # -- node errors -------------------------------------------------------------

    def on_node_error(self, node_id: str, code: int, detail: bytes) -> None:
        """A node reported a failed command: abort in-flight procedures there."""
        for ue in self.ue_contexts.values():
            if ue.node_id == node_id and ue.rrc_state not in (
                RrcState.CONFIGURED,
                RrcState.FAILED,
            ):
                ue.rrc_state = RrcState.FAILED


# -- session spec (de)serialization helpers ------------------------------------


def session_spec_to_doc(spec: SessionSpec) -> dict:
    return {
        "session_id": spec.session_id,
        "drbs": list(spec.drbs),
        "flows": [
            {
                "flow_id": f.flow_id,
                "ip_dst": wire.ip_str(f.ip_dst),
                "ip_proto": f.ip_proto,
                "l4_dst": f.l4_dst,
                "drb": f.drb,
            }
            for f in spec.flows
        ],
    }


def session_spec_from_doc(doc: dict) -> SessionSpec:
    return SessionSpec(
        session_id=doc["session_id"],
        drbs=tuple(doc["drbs"]),
        flows=tuple(
            QosFlowSpec(
                flow_id=f["flow_id"],
                ip_dst=wire.ip_bytes(f["ip_dst"]),
                ip_proto=f["ip_proto"],
                l4_dst=f["l4_dst"],
                drb=f["drb"],
            )
            for f in doc["flows"]
        ),
    )
