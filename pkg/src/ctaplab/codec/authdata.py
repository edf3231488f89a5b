"""Parsing of the authenticatorData blob returned by MakeCredential/GetAssertion."""

import struct
from dataclasses import dataclass
from typing import Optional

from . import cbor

FLAG_UP, FLAG_UV, FLAG_AT, FLAG_ED = 0x01, 0x04, 0x40, 0x80


class AuthDataError(ValueError):
    pass


@dataclass
class AuthData:
    rp_id_hash: bytes
    flags: int
    sign_count: int
    aaguid: Optional[bytes] = None
    cred_id: Optional[bytes] = None
    public_key: Optional[dict] = None
    extensions: Optional[dict] = None

    @property
    def up(self) -> bool:
        return bool(self.flags & FLAG_UP)

    @property
    def uv(self) -> bool:
        return bool(self.flags & FLAG_UV)


def parse_auth_data(raw: bytes) -> AuthData:
    if len(raw) < 37:
        raise AuthDataError("authenticator data shorter than 37 bytes")
    rp_hash, flags, count = raw[:32], raw[32], struct.unpack(">I", raw[33:37])[0]
    out = AuthData(rp_hash, flags, count)
    rest = raw[37:]
    try:
        if flags & FLAG_AT:
            if len(rest) < 18:
                raise AuthDataError("truncated attested credential data")
            out.aaguid = rest[:16]
            n = struct.unpack(">H", rest[16:18])[0]
            out.cred_id = rest[18:18 + n]
            if len(out.cred_id) != n:
                raise AuthDataError("truncated credential id")
            out.public_key, used = cbor.decode_prefix(rest[18 + n:])
            rest = rest[18 + n + used:]
        if flags & FLAG_ED:
            out.extensions, used = cbor.decode_prefix(rest)
            rest = rest[used:]
    except cbor.CborError as exc:
        raise AuthDataError(str(exc)) from exc
    if rest:
        raise AuthDataError(f"{len(rest)} trailing bytes in authenticator data")
    return out
