"""Typed CTAP requests and responses and their byte encodings."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

from . import cbor
from .constants import (
    GET_NEXT_ASSERTION_BYTE,
    PARAMETERLESS,
    SUBCOMMAND_ENUM,
    SUBCOMMAND_KEY,
    Command,
    GetAssertionSub,
    Status,
)


class UnknownCommand(ValueError):
    pass


class UnknownStatus(ValueError):
    pass


class UnknownSubcommand(ValueError):
    pass


class InvalidMessage(ValueError):
    """Structurally valid CBOR that breaks a request/response invariant."""


@dataclass(frozen=True, eq=False)
class CtapRequest:
    command: Command
    params: Optional[dict] = None
    subcommand: Optional[IntEnum] = None

    def __post_init__(self):
        cmd = self.command
        if cmd in PARAMETERLESS:
            if self.params is not None or self.subcommand is not None:
                raise InvalidMessage(f"{cmd.name} takes no parameters")
            return
        if cmd is Command.GET_ASSERTION and self.subcommand is GetAssertionSub.GET_NEXT_ASSERTION:
            if self.params is not None:
                raise InvalidMessage("GetNextAssertion takes no parameters")
            return
        if self.params is None:
            raise InvalidMessage(f"{cmd.name} requires a parameter map")
        if not isinstance(self.params, dict):
            raise InvalidMessage("parameters must be a map")
        key = SUBCOMMAND_KEY.get(cmd)
        if key is None:
            if self.subcommand is not None:
                raise InvalidMessage(f"{cmd.name} has no subcommands")
            return
        raw = self.params.get(key)
        if self.subcommand is None or raw is None or int(raw) != int(self.subcommand):
            raise InvalidMessage(f"{cmd.name} subcommand field and map key disagree")

    @classmethod
    def build(cls, command: Command, params: Optional[dict] = None,
              subcommand: Optional[IntEnum] = None) -> "CtapRequest":
        """Construct a request, inserting the subcommand key where the command has one."""
        key = SUBCOMMAND_KEY.get(command)
        if key is not None and subcommand is not None:
            params = dict(params or {})
            params[key] = int(subcommand)
        return cls(command, params, subcommand)

    @property
    def is_get_next_assertion(self) -> bool:
        return self.subcommand is GetAssertionSub.GET_NEXT_ASSERTION

    def name(self) -> str:
        if self.subcommand is not None:
            return f"{_pretty(self.command.name)}({_pretty(self.subcommand.name)})"
        return _pretty(self.command.name)

    def __eq__(self, other):
        if not isinstance(other, CtapRequest):
            return NotImplemented
        return (self.command == other.command and self.subcommand == other.subcommand
                and cbor.strict_equal(self.params, other.params))

    def __hash__(self):
        return hash((self.command, self.subcommand))


@dataclass(frozen=True, eq=False)
class CtapResponse:
    status: Status
    payload: Optional[dict] = None

    def __post_init__(self):
        if self.payload is not None:
            if self.status is not Status.OK:
                raise InvalidMessage("only OK responses carry a payload")
            if not isinstance(self.payload, dict):
                raise InvalidMessage("response payload must be a map")

    @property
    def ok(self) -> bool:
        return self.status is Status.OK

    def __eq__(self, other):
        if not isinstance(other, CtapResponse):
            return NotImplemented
        return self.status == other.status and cbor.strict_equal(self.payload, other.payload)

    def __hash__(self):
        return hash(self.status)


def _pretty(enum_name: str) -> str:
    return "".join(part.capitalize() for part in enum_name.split("_"))


def encode_request(req: CtapRequest) -> bytes:
    if req.is_get_next_assertion:
        return bytes([GET_NEXT_ASSERTION_BYTE])
    out = bytes([int(req.command)])
    if req.params is not None:
        out += cbor.encode(req.params)
    return out


def decode_request(data: bytes) -> CtapRequest:
    if not data:
        raise cbor.MalformedCbor("empty request")
    code, body = data[0], data[1:]
    if code == GET_NEXT_ASSERTION_BYTE:
        if body:
            raise cbor.MalformedCbor("GetNextAssertion carries no payload")
        return CtapRequest(Command.GET_ASSERTION, None, GetAssertionSub.GET_NEXT_ASSERTION)
    try:
        command = Command(code)
    except ValueError:
        raise UnknownCommand(f"unknown command byte 0x{code:02x}") from None
    if command in PARAMETERLESS:
        if body:
            raise cbor.MalformedCbor(f"{command.name} carries no payload")
        return CtapRequest(command)
    if not body:
        raise InvalidMessage(f"{command.name} requires a parameter map")
    params = cbor.decode(body)
    if not isinstance(params, dict):
        raise cbor.MalformedCbor("request parameters must be a CBOR map")
    key = SUBCOMMAND_KEY.get(command)
    subcommand = None
    if key is not None:
        raw = params.get(key)
        if not isinstance(raw, int) or isinstance(raw, bool):
            raise InvalidMessage(f"{command.name} is missing its subcommand")
        try:
            subcommand = SUBCOMMAND_ENUM[command](raw)
        except ValueError:
            raise UnknownSubcommand(f"unknown {command.name} subcommand 0x{raw:02x}") from None
    return CtapRequest(command, params, subcommand)


def encode_response(resp: CtapResponse) -> bytes:
    out = bytes([int(resp.status)])
    if resp.payload is not None:
        out += cbor.encode(resp.payload)
    return out


def decode_response(data: bytes) -> CtapResponse:
    if not data:
        raise cbor.MalformedCbor("empty response")
    try:
        status = Status(data[0])
    except ValueError:
        raise UnknownStatus(f"unknown status byte 0x{data[0]:02x}") from None
    body = data[1:]
    if not body:
        return CtapResponse(status)
    if status is not Status.OK:
        raise cbor.MalformedCbor("error responses carry no payload")
    payload = cbor.decode(body)
    if not isinstance(payload, dict):
        raise cbor.MalformedCbor("response payload must be a CBOR map")
    return CtapResponse(status, payload)
