"""Device-side transport simulators wrapping an Authenticator.

Both take raw wire units (64-byte reports, APDU bytes) stamped with a logical
time and return the device's replies with their own timestamps.  The
``button`` is the physical user holding the key: it becomes the UP granter
for every request, whichever client sent it.
"""

from __future__ import annotations

import random
from typing import Callable, Optional

from ..authenticator import Authenticator, TransportContext
from ..authenticator.device import Phase
from . import apdu as ap
from .ctaphid import (
    BROADCAST_CID,
    CAP_CBOR,
    CAP_NMSG,
    CAP_WINK,
    KEEPALIVE_INTERVAL_MS,
    ChannelBusy,
    CtapHidFrame,
    FramingError,
    HidCommand,
    HidError,
    KeepaliveStatus,
    Reassembler,
    SeqGap,
    ctaphid_send,
    error_frame,
    init_response_payload,
    keepalive_frame,
)


def keepalive_times(start: int, phases: list[Phase]):
    """(time, status) for every 100 ms tick strictly inside the busy period."""
    out = []
    for ph in phases:
        status = KeepaliveStatus.WAITING if ph.kind == "waiting" else KeepaliveStatus.PROCESSING
        ticks = -(-(ph.start - start) // KEEPALIVE_INTERVAL_MS)
        t = start + max(1, ticks) * KEEPALIVE_INTERVAL_MS
        while t < ph.start + ph.duration:
            out.append((t, status))
            t += KEEPALIVE_INTERVAL_MS
    return out


class HidDevice:
    transport = "usb"

    def __init__(self, authenticator: Authenticator, button: Optional[Callable] = None, seed=0):
        self.auth = authenticator
        self.button = button
        self.rng = random.Random(f"hid:{seed}")
        self.channels: set[int] = set()
        self.assemblers: dict[int, Reassembler] = {}
        self.busy_until = -1
        self.busy_cid = None
        self.winks = 0

    def plug_in(self):
        self.auth.power_on()
        self.channels.clear()
        self.assemblers.clear()
        self.busy_until, self.busy_cid = -1, None

    def ctaphid_init(self, channel: int = BROADCAST_CID, nonce: bytes = b"\x00" * 8) -> dict:
        """Allocate (or re-sync) a channel; returns the fields of the INIT reply."""
        if channel == BROADCAST_CID:
            cid = self.rng.randrange(1, BROADCAST_CID)
            while cid in self.channels:
                cid = self.rng.randrange(1, BROADCAST_CID)
            self.channels.add(cid)
        else:
            cid = channel
            self.assemblers.pop(cid, None)
        caps = CAP_CBOR | CAP_NMSG | CAP_WINK
        return {"channel_id": cid, "capabilities": caps,
                "payload": init_response_payload(nonce, cid, caps)}

    def _reply(self, cid: int, cmd: int, payload: bytes, t: int):
        return [(t, f.to_bytes()) for f in ctaphid_send(cid, payload, cmd)]

    def receive(self, report: bytes, t: int, client_id: str = "platform") -> list[tuple[int, bytes]]:
        try:
            frame = CtapHidFrame.parse(report)
        except FramingError:
            return []
        cid = frame.channel_id
        if cid != BROADCAST_CID and cid not in self.channels:
            return [(t, error_frame(cid, HidError.INVALID_CHANNEL).to_bytes())]
        if frame.kind == "init" and frame.command == HidCommand.INIT:
            info = self.ctaphid_init(cid, frame.data[:8])
            return self._reply(cid, HidCommand.INIT, info["payload"], t)
        if cid == BROADCAST_CID:
            return [(t, error_frame(cid, HidError.INVALID_CHANNEL).to_bytes())]
        if t < self.busy_until and cid != self.busy_cid:
            return [(t, error_frame(cid, HidError.CHANNEL_BUSY).to_bytes())]
        asm = self.assemblers.setdefault(cid, Reassembler())
        try:
            msg = asm.feed(frame)
        except SeqGap:
            return [(t, error_frame(cid, HidError.INVALID_SEQ).to_bytes())]
        except ChannelBusy:
            return [(t, error_frame(cid, HidError.CHANNEL_BUSY).to_bytes())]
        except FramingError:
            return [(t, error_frame(cid, HidError.INVALID_LEN).to_bytes())]
        if msg is None:
            return []
        return self._dispatch(msg, t, client_id)

    def _dispatch(self, msg, t: int, client_id: str):
        cid = msg.channel_id
        if msg.command == HidCommand.PING:
            return self._reply(cid, HidCommand.PING, msg.payload, t)
        if msg.command == HidCommand.WINK:
            # C2 owns the LED; wink is disabled while feedback is on
            if not self.auth.config.has("C2"):
                self.winks += 1
            return self._reply(cid, HidCommand.WINK, b"", t)
        if msg.command == HidCommand.CANCEL:
            return []
        if msg.command == HidCommand.LOCK:
            return self._reply(cid, HidCommand.LOCK, b"", t)
        if msg.command != HidCommand.CBOR:
            return [(t, error_frame(cid, HidError.INVALID_CMD).to_bytes())]
        self.auth.clock.advance_to(t)
        ctx = TransportContext("usb", client_id, self.button, self.auth.state.powered_on_at)
        out, phases = self.auth.handle_bytes(msg.payload, ctx)
        elapsed = sum(p.duration for p in phases)
        self.busy_until, self.busy_cid = t + elapsed, cid
        frames = [(kt, keepalive_frame(cid, status).to_bytes())
                  for kt, status in keepalive_times(t, phases)]
        return frames + self._reply(cid, HidCommand.CBOR, out, t + elapsed)


class NfcDevice:
    transport = "nfc"

    def __init__(self, authenticator: Authenticator, button: Optional[Callable] = None):
        self.auth = authenticator
        self.button = button
        self.selected = False
        self._chain: list[ap.Apdu] = []
        self._pending: list[ap.ApduResponse] = []

    def enter_field(self):
        """Coming into reader range powers the key up."""
        self.auth.power_on()
        self.selected = False
        self._chain, self._pending = [], []

    def receive(self, raw: bytes, t: int, client_id: str = "platform") -> tuple[int, bytes]:
        """Returns (completion time, response APDU bytes)."""
        try:
            cmd = ap.Apdu.parse(raw)
        except ap.ApduError:
            return t, ap.ApduResponse(b"", ap.SW_WRONG_LENGTH).to_bytes()
        if cmd.ins == ap.INS_SELECT:
            if cmd.data == ap.FIDO_AID:
                self.selected = True
                return t, ap.ApduResponse(b"FIDO_2_0", ap.SW_OK).to_bytes()
            self.selected = False
            return t, ap.ApduResponse(b"", ap.SW_NOT_FOUND).to_bytes()
        if not self.selected:
            return t, ap.ApduResponse(b"", ap.SW_CONDITIONS).to_bytes()
        if cmd.ins == ap.INS_GET_RESPONSE:
            if not self._pending:
                return t, ap.ApduResponse(b"", ap.SW_CONDITIONS).to_bytes()
            return t, self._pending.pop(0).to_bytes()
        if cmd.ins != ap.INS_NFCCTAP_MSG:
            return t, ap.ApduResponse(b"", ap.SW_INS_UNSUPPORTED).to_bytes()
        if cmd.cla & ~ap.CLA_CHAIN != ap.CLA_CTAP:
            return t, ap.ApduResponse(b"", ap.SW_CLA_UNSUPPORTED).to_bytes()
        self._chain.append(cmd)
        if cmd.chain:
            return t, ap.ApduResponse(b"", ap.SW_OK).to_bytes()
        chain, self._chain = self._chain, []
        ctap = ap.apdu_unwrap(chain)
        self.auth.clock.advance_to(t)
        ctx = TransportContext("nfc", client_id, self.button, self.auth.state.powered_on_at)
        out, phases = self.auth.handle_bytes(ctap, ctx)
        done = t + sum(p.duration for p in phases)
        pieces = ap.split_response(out, min(cmd.le or 256, 256))
        self._pending = pieces[1:]
        return done, pieces[0].to_bytes()
