"""ISO7816-4 short APDUs carrying CTAP over NFC."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

FIDO_AID = bytes.fromhex("A0000006472F0001")
MAX_DATA = 255
CLA_CTAP = 0x80
CLA_CHAIN = 0x10
INS_SELECT = 0xA4
INS_NFCCTAP_MSG = 0x10
INS_GET_RESPONSE = 0xC0

SW_OK = 0x9000
SW_WRONG_LENGTH = 0x6700
SW_CONDITIONS = 0x6985
SW_NOT_FOUND = 0x6A82
SW_INS_UNSUPPORTED = 0x6D00
SW_CLA_UNSUPPORTED = 0x6E00


class ApduError(ValueError):
    pass


class BadStatusWord(ApduError):
    def __init__(self, sw: int):
        super().__init__(f"status word {sw:04X}")
        self.sw = sw


class BrokenChain(ApduError):
    pass


@dataclass(frozen=True)
class Apdu:
    cla: int
    ins: int
    p1: int = 0
    p2: int = 0
    data: bytes = b""
    le: Optional[int] = None  # 1..256; 256 is sent as 0x00

    @property
    def chain(self) -> bool:
        return bool(self.cla & CLA_CHAIN)

    def to_bytes(self) -> bytes:
        if len(self.data) > MAX_DATA:
            raise ApduError("short APDU data field is at most 255 bytes")
        out = bytes([self.cla, self.ins, self.p1, self.p2])
        if self.data:
            out += bytes([len(self.data)]) + self.data
        if self.le is not None:
            if not 1 <= self.le <= 256:
                raise ApduError("Le must be in 1..256")
            out += bytes([self.le % 256])
        return out

    @classmethod
    def parse(cls, raw: bytes) -> "Apdu":
        if len(raw) < 4:
            raise ApduError("APDU shorter than its header")
        cla, ins, p1, p2 = raw[:4]
        body = raw[4:]
        if not body:
            return cls(cla, ins, p1, p2)
        if len(body) == 1:
            return cls(cla, ins, p1, p2, b"", body[0] or 256)
        lc = body[0]
        if lc == 0:
            raise ApduError("extended-length APDUs are not supported")
        if len(body) == 1 + lc:
            return cls(cla, ins, p1, p2, body[1:])
        if len(body) == 2 + lc:
            return cls(cla, ins, p1, p2, body[1:1 + lc], body[-1] or 256)
        raise ApduError("Lc does not match the body length")


@dataclass(frozen=True)
class ApduResponse:
    data: bytes
    sw: int

    def to_bytes(self) -> bytes:
        return self.data + self.sw.to_bytes(2, "big")

    @classmethod
    def parse(cls, raw: bytes) -> "ApduResponse":
        if len(raw) < 2:
            raise ApduError("response shorter than a status word")
        return cls(raw[:-2], int.from_bytes(raw[-2:], "big"))

    @property
    def more_data(self) -> Optional[int]:
        """Bytes still waiting behind a 61xx, or None."""
        if self.sw >> 8 == 0x61:
            return (self.sw & 0xFF) or 256
        return None


def select_apdu() -> Apdu:
    return Apdu(0x00, INS_SELECT, 0x04, 0x00, FIDO_AID, 256)


def get_response_apdu(le: int = 256) -> Apdu:
    return Apdu(0x00, INS_GET_RESPONSE, 0, 0, b"", le)


def apdu_wrap(ctap_bytes: bytes) -> list[Apdu]:
    chunks = [ctap_bytes[i:i + MAX_DATA] for i in range(0, len(ctap_bytes), MAX_DATA)] or [b""]
    out = [Apdu(CLA_CTAP | CLA_CHAIN, INS_NFCCTAP_MSG, 0, 0, c) for c in chunks[:-1]]
    out.append(Apdu(CLA_CTAP, INS_NFCCTAP_MSG, 0, 0, chunks[-1], 256))
    return out


def apdu_unwrap(apdus) -> bytes:
    if not apdus:
        raise BrokenChain("empty chain")
    for a in apdus[:-1]:
        if not a.chain or a.ins != INS_NFCCTAP_MSG:
            raise BrokenChain("chain broken before the final APDU")
    last = apdus[-1]
    if last.chain or last.ins != INS_NFCCTAP_MSG:
        raise BrokenChain("final APDU still has the chaining bit set")
    return b"".join(a.data for a in apdus)


def split_response(data: bytes, le: int = 256) -> list[ApduResponse]:
    """Device side: cut a long response into 61xx pieces ending with 9000."""
    pieces = [data[i:i + le] for i in range(0, len(data), le)] or [b""]
    out = []
    for i, piece in enumerate(pieces):
        if i == len(pieces) - 1:
            out.append(ApduResponse(piece, SW_OK))
        else:
            remaining = len(data) - le * (i + 1)
            out.append(ApduResponse(piece, 0x6100 | min(remaining, 256) % 256))
    return out


def collect_response(first: ApduResponse, transmit: Callable[[Apdu], ApduResponse]) -> bytes:
    """Client side: follow 61xx with GET RESPONSE until 9000."""
    data, resp = first.data, first
    while resp.more_data is not None:
        resp = transmit(get_response_apdu(resp.more_data))
        data += resp.data
    if resp.sw != SW_OK:
        raise BadStatusWord(resp.sw)
    return data
