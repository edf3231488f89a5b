"""CTAPHID framing: 64-byte reports, one init packet plus numbered continuations."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Optional

REPORT_SIZE = 64
INIT_DATA = REPORT_SIZE - 7
CONT_DATA = REPORT_SIZE - 5
MAX_SEQ = 0x7F
MAX_PAYLOAD = INIT_DATA + (MAX_SEQ + 1) * CONT_DATA  # 7609
BROADCAST_CID = 0xFFFFFFFF
PROTOCOL_VERSION = 2
KEEPALIVE_INTERVAL_MS = 100


class HidCommand(IntEnum):
    PING = 0x81
    MSG = 0x83
    LOCK = 0x84
    INIT = 0x86
    WINK = 0x88
    CBOR = 0x90
    CANCEL = 0x91
    KEEPALIVE = 0xBB
    ERROR = 0xBF


class HidError(IntEnum):
    INVALID_CMD = 0x01
    INVALID_PAR = 0x02
    INVALID_LEN = 0x03
    INVALID_SEQ = 0x04
    MSG_TIMEOUT = 0x05
    CHANNEL_BUSY = 0x06
    LOCK_REQUIRED = 0x0A
    INVALID_CHANNEL = 0x0B
    OTHER = 0x7F


class KeepaliveStatus(IntEnum):
    PROCESSING = 1
    WAITING = 2  # called UPNEEDED in the CTAP standard


CAP_WINK = 0x01
CAP_CBOR = 0x04
CAP_NMSG = 0x08


class FramingError(ValueError):
    pass


class SeqGap(FramingError):
    pass


class ChannelBusy(FramingError):
    pass


@dataclass(frozen=True)
class CtapHidFrame:
    channel_id: int
    kind: str  # "init" or "cont"
    command: Optional[int]
    seq: Optional[int]
    bcnt: Optional[int]  # total message length, init packets only
    data: bytes  # the full data area of the report, padding included

    def to_bytes(self) -> bytes:
        if self.kind == "init":
            head = struct.pack(">IBH", self.channel_id, self.command, self.bcnt)
        else:
            head = struct.pack(">IB", self.channel_id, self.seq)
        raw = head + self.data
        return raw + b"\x00" * (REPORT_SIZE - len(raw))

    @classmethod
    def parse(cls, raw: bytes) -> "CtapHidFrame":
        if len(raw) != REPORT_SIZE:
            raise FramingError(f"report must be {REPORT_SIZE} bytes, got {len(raw)}")
        cid = struct.unpack(">I", raw[:4])[0]
        if raw[4] & 0x80:
            bcnt = struct.unpack(">H", raw[5:7])[0]
            return cls(cid, "init", raw[4], None, bcnt, raw[7:])
        return cls(cid, "cont", None, raw[4], None, raw[5:])

    @property
    def command_name(self) -> str:
        try:
            return HidCommand(self.command).name
        except ValueError:
            return f"0x{self.command:02x}"


def continuation_count(length: int) -> int:
    return max(0, -(-(length - INIT_DATA) // CONT_DATA))


def ctaphid_send(channel_id: int, payload: bytes, command: int = HidCommand.CBOR) -> list[CtapHidFrame]:
    if len(payload) > MAX_PAYLOAD:
        raise FramingError(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    frames = [CtapHidFrame(channel_id, "init", int(command), None, len(payload),
                           payload[:INIT_DATA].ljust(INIT_DATA, b"\x00"))]
    rest = payload[INIT_DATA:]
    seq = 0
    while rest:
        frames.append(CtapHidFrame(channel_id, "cont", None, seq, None,
                                   rest[:CONT_DATA].ljust(CONT_DATA, b"\x00")))
        rest = rest[CONT_DATA:]
        seq += 1
    return frames


@dataclass
class HidMessage:
    channel_id: int
    command: int
    payload: bytes


class Reassembler:
    """Feeds frames one at a time; yields a HidMessage when one completes.

    Only one message may be in flight: an init packet from a different channel
    while a message is incomplete raises ChannelBusy.  An init packet on the
    same channel aborts the pending message (resync), as CTAPHID requires.
    """

    def __init__(self):
        self._cid = None
        self._cmd = None
        self._need = 0
        self._buf = b""
        self._seq = 0

    @property
    def pending(self) -> bool:
        return self._cid is not None

    def reset(self):
        self._cid = None
        self._buf = b""

    def feed(self, frame: CtapHidFrame) -> Optional[HidMessage]:
        if frame.kind == "init":
            if self._cid is not None and frame.channel_id != self._cid:
                raise ChannelBusy(f"channel 0x{self._cid:08x} has a message in flight")
            if frame.bcnt > MAX_PAYLOAD:
                raise FramingError("declared length exceeds maximum payload")
            self._cid, self._cmd, self._need, self._seq = frame.channel_id, frame.command, frame.bcnt, 0
            self._buf = frame.data[:frame.bcnt]
        else:
            if self._cid is None:
                raise SeqGap("continuation packet without an init packet")
            if frame.channel_id != self._cid:
                raise ChannelBusy("continuation from another channel")
            if frame.seq != self._seq:
                self.reset()
                raise SeqGap(f"expected seq {self._seq}, got {frame.seq}")
            self._seq += 1
            self._buf += frame.data[:self._need - len(self._buf)]
        if len(self._buf) >= self._need:
            msg = HidMessage(self._cid, self._cmd, self._buf)
            self.reset()
            return msg
        return None


def ctaphid_recv(frames: Iterable[CtapHidFrame]) -> bytes:
    """Reassemble exactly one message; trailing frames are an error."""
    asm = Reassembler()
    msg = None
    for frame in frames:
        if msg is not None:
            raise FramingError("frames continue past the end of the message")
        msg = asm.feed(frame)
    if msg is None:
        raise SeqGap("message incomplete")
    return msg.payload


def keepalive_frame(channel_id: int, status: KeepaliveStatus) -> CtapHidFrame:
    return ctaphid_send(channel_id, bytes([int(status)]), HidCommand.KEEPALIVE)[0]


def error_frame(channel_id: int, code: HidError) -> CtapHidFrame:
    return ctaphid_send(channel_id, bytes([int(code)]), HidCommand.ERROR)[0]


def init_response_payload(nonce: bytes, new_cid: int, caps: int,
                          version=(1, 0, 0)) -> bytes:
    return nonce + struct.pack(">IBBBBB", new_cid, PROTOCOL_VERSION, *version, caps)


def parse_init_response(payload: bytes) -> dict:
    if len(payload) < 17:
        raise FramingError("INIT response too short")
    cid, proto, major, minor, build, caps = struct.unpack(">IBBBBB", payload[8:17])
    return {
        "nonce": payload[:8],
        "channel_id": cid,
        "protocol": proto,
        "version": (major, minor, build),
        "capabilities": caps,
        "wink": bool(caps & CAP_WINK),
        "cbor": bool(caps & CAP_CBOR),
        "nmsg": bool(caps & CAP_NMSG),
    }
