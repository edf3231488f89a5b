"""Turn a raw frame trace back into named CTAP traffic.

Every trace line becomes exactly one record.  CTAPHID reports are reassembled
per channel and direction, APDU chains and 61xx response runs are stitched
together, and the frame that completes a message carries its decoded
command (or status), subcommand and a short parameter summary.  Runs of
WAITING keepalives are reported as the time the key sat waiting for a touch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from typing import Optional

from ..codec import Command, decode_request, decode_response
from ..codec.messages import _pretty
from ..transports import apdu as ap
from ..transports.ctaphid import (
    CtapHidFrame,
    FramingError,
    HidCommand,
    HidError,
    KeepaliveStatus,
    Reassembler,
    parse_init_response,
)
from ..transports.trace import TraceFormatError, parse_trace_lines

PARAM_NAMES = {
    Command.MAKE_CREDENTIAL: {1: "clientDataHash", 2: "rp", 3: "user", 4: "pubKeyCredParams",
                              5: "excludeList", 6: "extensions", 7: "options", 8: "pinUvAuthParam",
                              9: "pinUvAuthProtocol"},
    Command.GET_ASSERTION: {1: "rpId", 2: "clientDataHash", 3: "allowList", 4: "extensions",
                            5: "options", 6: "pinUvAuthParam", 7: "pinUvAuthProtocol"},
    Command.CLIENT_PIN: {1: "pinUvAuthProtocol", 2: "subCommand", 3: "keyAgreement", 4: "pinUvAuthParam",
                         5: "newPinEnc", 6: "pinHashEnc", 0x20: "scope"},
    Command.CREDENTIAL_MANAGEMENT: {1: "subCommand", 2: "subCommandParams", 3: "pinUvAuthProtocol",
                                    4: "pinUvAuthParam"},
}
# keys that only repeat the subcommand already shown
_SUBCOMMAND_KEYS = {Command.CLIENT_PIN: 2, Command.CREDENTIAL_MANAGEMENT: 1}


@dataclass
class DissectedRecord:
    line: int
    timestamp: Optional[int] = None
    transport: Optional[str] = None
    direction: Optional[str] = None
    frame: Optional[str] = None
    channel: Optional[str] = None
    command: Optional[str] = None
    subcommand: Optional[str] = None
    status: Optional[str] = None
    keepalive: Optional[str] = None
    params: Optional[dict] = None
    capabilities: Optional[dict] = None
    up_wait_ms: Optional[int] = None
    note: Optional[str] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    def to_text(self) -> str:
        if self.error is not None:
            return f"line {self.line}: parse error: {self.error}"
        arrow = "->" if self.direction == "c2a" else "<-"
        head = f"{self.timestamp:>9} {self.transport} {arrow} {self.frame:<16}"
        parts = []
        if self.command:
            parts.append(f"{self.command}({self.subcommand})" if self.subcommand else self.command)
        if self.status:
            parts.append(f"status {self.status}")
        if self.keepalive:
            parts.append(f"KEEPALIVE({self.keepalive})")
        if self.params:
            parts.append(" ".join(f"{k}={v}" for k, v in self.params.items()))
        if self.capabilities:
            caps = [k for k in ("wink", "cbor", "nmsg") if self.capabilities.get(k)]
            parts.append(f"channel {self.capabilities['channel_id']:08x} caps " + ",".join(caps))
        if self.up_wait_ms is not None:
            parts.append(f"[waited {self.up_wait_ms} ms for touch]")
        if self.note:
            parts.append(f"({self.note})")
        return (head + " " + " ".join(parts)).rstrip()


def describe(value, depth: int = 0) -> str:
    """A short, stable rendering of one CBOR value."""
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, bytes):
        return f"h'{value[:4].hex()}..'[{len(value)}]" if len(value) > 8 else f"h'{value.hex()}'"
    if isinstance(value, list):
        if depth >= 1:
            return f"[{len(value)} items]"
        return "[" + ", ".join(describe(v, depth + 1) for v in value[:4]) + (", .." if len(value) > 4 else "") + "]"
    if isinstance(value, dict):
        if depth >= 2:
            return f"{{{len(value)} keys}}"
        return "{" + ", ".join(f"{k}: {describe(v, depth + 1)}" for k, v in value.items()) + "}"
    return repr(value)


def summarize_request(req) -> dict:
    if req.params is None:
        return {}
    names = PARAM_NAMES.get(req.command, {})
    skip = _SUBCOMMAND_KEYS.get(req.command)
    return {names.get(k, str(k)): describe(v) for k, v in req.params.items() if k != skip}


def summarize_response(resp) -> dict:
    if resp.payload is None:
        return {}
    return {str(k): describe(v) for k, v in resp.payload.items()}


def _fill_request(rec: DissectedRecord, data: bytes):
    req = decode_request(data)
    rec.command = _pretty(req.command.name)
    if req.subcommand is not None:
        rec.subcommand = _pretty(req.subcommand.name)
    rec.params = summarize_request(req) or None
    return req


def _fill_response(rec: DissectedRecord, data: bytes, answering: Optional[str]):
    resp = decode_response(data)
    rec.status = resp.status.name
    rec.params = summarize_response(resp) or None
    if answering:
        rec.note = f"reply to {answering}"


class Dissector:
    """Stateful: feed trace lines in order, one record comes out per line."""

    def __init__(self):
        self._asm = {}           # (direction, cid) -> Reassembler
        self._waiting = {}       # cid -> first WAITING timestamp
        self._last_request = {}  # cid or "nfc" -> request name
        self._chain = []         # c2a APDUs awaiting the last link
        self._resp = b""         # a2c data collected across 61xx
        self._last_apdu = None

    def feed(self, lineno: int, frame) -> DissectedRecord:
        if isinstance(frame, TraceFormatError):
            return DissectedRecord(lineno, error=str(frame))
        rec = DissectedRecord(lineno, frame.timestamp, frame.transport, frame.direction)
        try:
            if frame.transport == "usb":
                self._usb(rec, frame)
            else:
                self._nfc(rec, frame)
        except (FramingError, ap.ApduError, ValueError) as exc:
            rec.error = f"{type(exc).__name__}: {exc}"
        return rec

    # -- CTAPHID ---------------------------------------------------------------

    def _usb(self, rec: DissectedRecord, frame):
        hid = CtapHidFrame.parse(frame.raw)
        cid = hid.channel_id
        rec.channel = f"{cid:08x}"
        key = (frame.direction, cid)
        asm = self._asm.setdefault(key, Reassembler())
        if hid.kind == "init":
            rec.frame = hid.command_name
            if hid.command == HidCommand.KEEPALIVE:
                status = KeepaliveStatus(hid.data[0])
                rec.keepalive = status.name
                if status is KeepaliveStatus.WAITING:
                    self._waiting.setdefault(cid, frame.timestamp)
                return
            if hid.command == HidCommand.ERROR:
                rec.status = HidError(hid.data[0]).name
                self._close_wait(rec, cid, frame.timestamp)
                return
            if hid.command == HidCommand.CBOR and hid.bcnt and frame.direction == "c2a":
                try:
                    rec.command = _pretty(Command(hid.data[0]).name)
                except ValueError:
                    pass
        else:
            rec.frame = f"CONT[{hid.seq}]"
        msg = asm.feed(hid)
        if msg is None:
            if hid.kind == "init":
                rec.note = "first fragment"
            return
        if frame.direction == "a2c":
            self._close_wait(rec, cid, frame.timestamp)
        self._message(rec, msg.command, msg.payload, frame.direction, cid)

    def _close_wait(self, rec, cid, t):
        start = self._waiting.pop(cid, None)
        if start is not None:
            rec.up_wait_ms = t - start

    def _message(self, rec, command, payload: bytes, direction: str, cid):
        if command == HidCommand.INIT:
            if direction == "a2c":
                caps = parse_init_response(payload)
                rec.capabilities = {"channel_id": caps["channel_id"], "protocol": caps["protocol"],
                                    "version": ".".join(map(str, caps["version"])), "wink": caps["wink"],
                                    "cbor": caps["cbor"], "nmsg": caps["nmsg"]}
            else:
                rec.params = {"nonce": describe(payload)}
            return
        if command != HidCommand.CBOR:
            return
        if direction == "c2a":
            req = _fill_request(rec, payload)
            self._last_request[cid] = req.name()
        else:
            _fill_response(rec, payload, self._last_request.pop(cid, None))

    # -- ISO7816 ---------------------------------------------------------------

    def _nfc(self, rec: DissectedRecord, frame):
        if frame.direction == "c2a":
            cmd = ap.Apdu.parse(frame.raw)
            self._last_apdu = cmd
            if cmd.ins == ap.INS_SELECT:
                rec.frame = "SELECT"
                rec.note = "FIDO applet" if cmd.data == ap.FIDO_AID else f"aid {cmd.data.hex()}"
            elif cmd.ins == ap.INS_GET_RESPONSE:
                rec.frame = "GET_RESPONSE"
            elif cmd.ins == ap.INS_NFCCTAP_MSG:
                self._chain.append(cmd)
                if cmd.chain:
                    rec.frame = "MSG(chained)"
                    rec.note = f"fragment {len(self._chain)}"
                else:
                    rec.frame = "MSG"
                    data, self._chain = ap.apdu_unwrap(self._chain), []
                    req = _fill_request(rec, data)
                    self._last_request["nfc"] = req.name()
            else:
                rec.frame = f"INS_{cmd.ins:02X}"
            return
        resp = ap.ApduResponse.parse(frame.raw)
        rec.frame = f"SW {resp.sw:04X}"
        last = self._last_apdu
        if last is not None and last.ins == ap.INS_SELECT:
            rec.note = resp.data.decode("ascii", "replace") if resp.sw == ap.SW_OK else "select failed"
            return
        if last is not None and last.ins == ap.INS_NFCCTAP_MSG and last.chain:
            rec.note = "chain ack"
            return
        self._resp += resp.data
        if resp.more_data is not None:
            rec.note = f"{resp.more_data} more bytes"
            return
        data, self._resp = self._resp, b""
        if resp.sw == ap.SW_OK and data:
            _fill_response(rec, data, self._last_request.pop("nfc", None))
        else:
            rec.note = "no CTAP payload"


def dissect_lines(lines) -> list:
    d = Dissector()
    return [d.feed(n, f) for n, f in parse_trace_lines(lines)]


def dissect_file(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return dissect_lines(fh.read().splitlines())


def render(records, machine: bool = False) -> str:
    if machine:
        return "".join(r.to_json() + "\n" for r in records)
    return "".join(r.to_text() + "\n" for r in records)


def sequence(records) -> list:
    """Compact view used by tests: INIT, CBOR(MakeCredential), KEEPALIVE(WAITING), CBOR(status OK)..."""
    out = []
    for r in records:
        if r.error is not None:
            out.append("ERROR")
        elif r.keepalive:
            out.append(f"KEEPALIVE({r.keepalive})")
        elif r.command and r.note != "first fragment":
            name = f"{r.command}({r.subcommand})" if r.subcommand else r.command
            out.append(f"{'CBOR' if r.transport == 'usb' else 'MSG'}({name})")
        elif r.status and r.transport == "usb" and r.frame == "ERROR":
            out.append(f"ERROR({r.status})")
        elif r.status:
            out.append(f"CBOR(status {r.status})" if r.transport == "usb" else f"MSG(status {r.status})")
        elif r.frame == "INIT":
            out.append("INIT")
    return out
