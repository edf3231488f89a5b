"""Client-side ends of the virtual USB and NFC channels.

A link turns CTAP bytes into wire units, hands them to the device simulator,
records every unit in the shared trace and reassembles the reply.
"""

from __future__ import annotations

import random

from . import apdu as ap
from .ctaphid import (
    BROADCAST_CID,
    CtapHidFrame,
    HidCommand,
    HidError,
    Reassembler,
    ctaphid_send,
    parse_init_response,
)
from .devices import HidDevice, NfcDevice
from .trace import TransportFrame


class TransportFailure(RuntimeError):
    """The wire refused the message (CTAPHID ERROR, bad status word...)."""

    def __init__(self, message: str, code=None):
        super().__init__(message)
        self.code = code


class HidLink:
    transport = "usb"

    def __init__(self, device: HidDevice, clock, trace=None, seed=0):
        self.device = device
        self.clock = clock
        self.trace = trace if trace is not None else []
        self.rng = random.Random(f"hidlink:{seed}")
        self.cid = None
        self.capabilities = None

    def _record(self, t, direction, raw):
        self.trace.append(TransportFrame(t, "usb", direction, raw))

    def _send_frames(self, frames, client_id):
        t = self.clock.now
        replies = []
        for f in frames:
            raw = f.to_bytes()
            self._record(t, "c2a", raw)
            replies += self.device.receive(raw, t, client_id)
        replies.sort(key=lambda r: r[0])
        return replies

    def connect(self, client_id: str = "platform") -> int:
        nonce = self.rng.randbytes(8)
        replies = self._send_frames(ctaphid_send(BROADCAST_CID, nonce, HidCommand.INIT), client_id)
        asm = Reassembler()
        for t, raw in replies:
            self._record(t, "a2c", raw)
            msg = asm.feed(CtapHidFrame.parse(raw))
            if msg is not None and msg.payload[:8] == nonce:
                info = parse_init_response(msg.payload)
                self.cid, self.capabilities = info["channel_id"], info
        if self.cid is None:
            raise TransportFailure("INIT got no answer")
        return self.cid

    def transact(self, data: bytes, client_id: str = "platform", command=HidCommand.CBOR) -> bytes:
        if self.cid is None:
            self.connect(client_id)
        replies = self._send_frames(ctaphid_send(self.cid, data, command), client_id)
        asm = Reassembler()
        result, error = None, None
        for t, raw in replies:
            self._record(t, "a2c", raw)
            self.clock.advance_to(t)
            frame = CtapHidFrame.parse(raw)
            if frame.channel_id != self.cid:
                continue
            if frame.kind == "init" and frame.command == HidCommand.KEEPALIVE:
                continue
            if frame.kind == "init" and frame.command == HidCommand.ERROR:
                code = frame.data[0]
                error = HidError(code) if code in HidError._value2member_map_ else code
                continue
            msg = asm.feed(frame)
            if msg is not None:
                result = msg.payload
        if error is not None:
            name = error.name if isinstance(error, HidError) else f"0x{error:02x}"
            raise TransportFailure(f"CTAPHID error {name}", error)
        if result is None:
            raise TransportFailure("no response")
        return result


class NfcLink:
    transport = "nfc"

    def __init__(self, device: NfcDevice, clock, trace=None):
        self.device = device
        self.clock = clock
        self.trace = trace if trace is not None else []
        self.connected = False

    def _exchange(self, apdu: ap.Apdu, client_id: str) -> ap.ApduResponse:
        t = self.clock.now
        raw = apdu.to_bytes()
        self.trace.append(TransportFrame(t, "nfc", "c2a", raw))
        done, resp = self.device.receive(raw, t, client_id)
        self.trace.append(TransportFrame(done, "nfc", "a2c", resp))
        self.clock.advance_to(done)
        return ap.ApduResponse.parse(resp)

    def connect(self, client_id: str = "platform", power_cycle: bool = True):
        if power_cycle:
            self.device.enter_field()
        resp = self._exchange(ap.select_apdu(), client_id)
        if resp.sw != ap.SW_OK:
            raise TransportFailure(f"SELECT failed with {resp.sw:04X}", resp.sw)
        self.connected = True

    def transact(self, data: bytes, client_id: str = "platform") -> bytes:
        if not self.connected:
            self.connect(client_id)
        apdus = ap.apdu_wrap(data)
        for a in apdus[:-1]:
            resp = self._exchange(a, client_id)
            if resp.sw != ap.SW_OK:
                raise TransportFailure(f"chained APDU refused with {resp.sw:04X}", resp.sw)
        first = self._exchange(apdus[-1], client_id)
        try:
            return ap.collect_response(first, lambda a: self._exchange(a, client_id))
        except ap.BadStatusWord as exc:
            raise TransportFailure(str(exc), exc.sw) from None
