"""Emulated data-plane nodes (d-gNB, d-eNB, d-WT).

A node consumes Open5G commands and moves packets between its radio side,
NG-U side, and controller signaling tunnels. It never sends Open5G traffic
back to the controller except a single ERROR per failed command; radio-layer
processing is a no-op annotated by each port's configuration TLVs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from . import wire
from .errors import Open5GError, UnsupportedLayerError, WireDecodeError
from .switch import FlowTable, PacketContext, PortRegistry
from .wire import (
    ErrorMsg,
    FlowMod,
    GtpTunnel,
    Hello,
    LayerTlv,
    PortMod,
    PortModCommand,
    RadioBearer,
    SigTunnel,
)


class Rat(Enum):
    NR = "NR"
    LTE = "LTE"
    WLAN = "WLAN"


# d-WT has no SDAP/PDCP; its radio stack is MAC/PHY (plus GRE toward the UE)
_WLAN_FORBIDDEN_TLVS = {int(LayerTlv.SDAP), int(LayerTlv.PDCP)}


@dataclass
class Emission:
    """One egress produced while handling an ingress event or command."""

    kind: str  # "open5g" | "sig" | "ngu" | "radio"
    payload: bytes
    crnti: int | None = None
    bearer_id: int | None = None
    ue_tmp_id: int | None = None
    tunnel_id: int | None = None


@dataclass
class DataPlaneNode:
    node_id: str
    rat: Rat
    ngu_ip: bytes
    drop_count: int = 0
    registry: PortRegistry = field(default_factory=PortRegistry)
    table: FlowTable = field(default_factory=FlowTable)

    # -- controller channel ------------------------------------------------

    def _apply(self, msg) -> None:
        if isinstance(msg, Hello):
            return
        if isinstance(msg, ErrorMsg):
            return  # nodes never act on controller-side errors
        if isinstance(msg, PortMod):
            body = msg.body
            if (
                self.rat == Rat.WLAN
                and body.command != PortModCommand.DELETE
                and isinstance(body.port_spec, RadioBearer)
            ):
                for tlv in body.port_spec.layer_config:
                    if tlv.tlv_type in _WLAN_FORBIDDEN_TLVS:
                        raise UnsupportedLayerError(
                            f"tlv {tlv.tlv_type} not supported on WLAN radio stack"
                        )
            port = self.registry.apply_port_mod(body)
            if body.command == PortModCommand.DELETE:
                self.table.drop_port_references(port)
        elif isinstance(msg, FlowMod):
            self.table.apply_flow_mod(msg.body, self.registry)

    def handle_open5g(self, data: bytes) -> list[Emission]:
        """Apply a (possibly batched) command byte stream.

        Valid commands produce no response at all; the first failure produces
        exactly one ERROR message and stops processing of the batch.
        """
        try:
            for msg in wire.iter_messages(data):
                self._apply(msg)
        except Open5GError as exc:
            xid = 0
            if not isinstance(exc, WireDecodeError):
                # the offending message decoded fine; echo its xid
                xid = getattr(msg, "xid", 0)
            err = ErrorMsg(xid=xid, code=exc.code, detail=str(exc).encode()[:64])
            return [Emission("open5g", wire.encode_message(err))]
        return []

    # -- packet paths --------------------------------------------------------

    def _forward(self, action_port_id: int, payload: bytes, ingress_bearer: int | None) -> list[Emission]:
        port = self.registry.get(action_port_id)
        if port is None:
            self.drop_count += 1
            return []
        spec = port.spec
        if isinstance(spec, GtpTunnel):
            return [Emission("ngu", wire.encap_gtpu(payload, spec.teid))]
        if isinstance(spec, SigTunnel):
            return [
                Emission(
                    "sig",
                    wire.encap_sig(payload, spec.tunnel_id),
                    tunnel_id=spec.tunnel_id,
                    bearer_id=ingress_bearer,
                )
            ]
        # radio egress
        if spec.crnti == 0:
            # common SRB0 port: target UE rides in the payload envelope
            ue_tmp_id, msg = wire.unpack_envelope(payload)
            return [Emission("radio", msg, bearer_id=spec.bearer_id, ue_tmp_id=ue_tmp_id)]
        return [Emission("radio", payload, crnti=spec.crnti, bearer_id=spec.bearer_id)]

    def ingress_radio(self, crnti: int, bearer_id: int, payload: bytes) -> list[Emission]:
        ctx = PacketContext(crnti=crnti, bearer_id=bearer_id, payload=payload)
        port = self.registry.radio_port(crnti, bearer_id)
        if port is not None:
            ctx.in_port = port.port_id
        action = self.table.match(ctx)
        if action is None:
            self.drop_count += 1
            return []
        return self._forward(action.out_port, payload, bearer_id)

    def ingress_ngu(self, frame: bytes) -> list[Emission]:
        try:
            teid, packet = wire.decap_gtpu(frame)
            ip_dst, ip_proto, l4_dst, _ = wire.unpack_ip_packet(packet)
        except WireDecodeError:
            self.drop_count += 1
            return []
        ctx = PacketContext(ip_dst=ip_dst, ip_proto=ip_proto, l4_dst=l4_dst, payload=packet)
        port = self.registry.gtp_port(teid)
        if port is not None:
            ctx.in_port = port.port_id
        action = self.table.match(ctx)
        if action is None:
            self.drop_count += 1
            return []
        return self._forward(action.out_port, packet, None)

    def ingress_sigtunnel(self, frame: bytes) -> list[Emission]:
        try:
            tunnel_id, payload = wire.decap_sig(frame)
        except WireDecodeError:
            self.drop_count += 1
            return []
        port = self.registry.sig_port(tunnel_id)
        if port is None:
            self.drop_count += 1
            return []
        ctx = PacketContext(in_port=port.port_id, payload=payload)
        action = self.table.match(ctx)
        if action is None:
            self.drop_count += 1
            return []
        try:
            return self._forward(action.out_port, payload, None)
        except WireDecodeError:
            # bad SRB0 envelope
            self.drop_count += 1
            return []
