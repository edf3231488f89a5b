"""Request builders for the client side, including the PIN/UV protocol v1 ceremony.

These only build and unwrap messages; ``ClientSession`` decides when to send them.
"""

from __future__ import annotations

from typing import Optional

from ..authenticator import pinproto
from ..authenticator.state import CredProtect
from ..codec import ClientPinSub, Command, CredMgmtSub, CtapRequest, GetAssertionSub, Status, cbor

PIN_PROTOCOL = 1
SCOPE_KEY = 0x20


class CtapError(Exception):
    """An authenticator answered a flow's request with a non-OK status."""

    def __init__(self, status: Status, request: Optional[CtapRequest] = None):
        where = f" to {request.name()}" if request is not None else ""
        super().__init__(f"{status.name}{where}")
        self.status = status
        self.request = request


def platform_agreement(rng, authenticator_cose: dict):
    """Client half of the ECDH: returns (our COSE key, shared secret)."""
    priv = pinproto.private_key(pinproto.random_scalar(rng))
    shared = pinproto.shared_secret(priv, pinproto.public_from_cose(authenticator_cose))
    return pinproto.cose_public(priv.public_key(), pinproto.COSE_ECDH_ES_HKDF_256), shared


def client_pin(sub: ClientPinSub, params: Optional[dict] = None, scope: Optional[str] = None) -> CtapRequest:
    p = {1: PIN_PROTOCOL}
    p.update(params or {})
    if scope is not None:
        p[SCOPE_KEY] = scope
    return CtapRequest.build(Command.CLIENT_PIN, p, sub)


def key_agreement() -> CtapRequest:
    return client_pin(ClientPinSub.KEY_AGREEMENT)


def get_retries() -> CtapRequest:
    return client_pin(ClientPinSub.GET_RETRIES)


def get_pin_token(platform_cose, shared, pin: str, scope=None) -> CtapRequest:
    return client_pin(ClientPinSub.GET_PIN_TOKEN,
                      {3: platform_cose, 6: pinproto.encrypt(shared, pinproto.pin_hash(pin))}, scope)


def set_pin(platform_cose, shared, pin: str, scope=None) -> CtapRequest:
    new_enc = pinproto.encrypt(shared, pinproto.pad_pin(pin))
    return client_pin(ClientPinSub.SET_PIN,
                      {3: platform_cose, 4: pinproto.authenticate(shared, new_enc), 5: new_enc}, scope)


def change_pin(platform_cose, shared, old: str, new: str, scope=None) -> CtapRequest:
    new_enc = pinproto.encrypt(shared, pinproto.pad_pin(new))
    hash_enc = pinproto.encrypt(shared, pinproto.pin_hash(old))
    return client_pin(ClientPinSub.CHANGE_PIN, {
        3: platform_cose,
        4: pinproto.authenticate(shared, new_enc + hash_enc),
        5: new_enc,
        6: hash_enc,
    }, scope)


def decrypt_token(shared: bytes, payload: dict) -> bytes:
    return pinproto.decrypt(shared, payload[2])


def make_credential(cdh: bytes, rp_id: str, user_id: bytes, user_name: str, rk: bool,
                    protect: Optional[CredProtect] = None, token: Optional[bytes] = None,
                    blob: Optional[bytes] = None, exclude=None) -> CtapRequest:
    p = {
        1: cdh,
        2: {"id": rp_id, "name": rp_id},
        3: {"id": user_id, "name": user_name},
        4: [{"alg": pinproto.COSE_ES256, "type": "public-key"}],
    }
    if exclude:
        p[5] = [{"id": c, "type": "public-key"} for c in exclude]
    ext = {}
    if protect is not None:
        ext["credProtect"] = int(protect)
    if blob is not None:
        ext["credBlob"] = blob
    if ext:
        p[6] = ext
    p[7] = {"rk": rk}
    if token is not None:
        p[8] = pinproto.authenticate(token, cdh)
        p[9] = PIN_PROTOCOL
    return CtapRequest.build(Command.MAKE_CREDENTIAL, p)


def get_assertion(rp_id: str, cdh: bytes, up: bool = True, token: Optional[bytes] = None,
                  allow=None, ext: Optional[dict] = None) -> CtapRequest:
    p = {1: rp_id, 2: cdh}
    if allow:
        p[3] = [{"id": c, "type": "public-key"} for c in allow]
    if ext:
        p[4] = ext
    p[5] = {"up": up}
    if token is not None:
        p[6] = pinproto.authenticate(token, cdh)
        p[7] = PIN_PROTOCOL
    return CtapRequest.build(Command.GET_ASSERTION, p)


def get_next_assertion() -> CtapRequest:
    return CtapRequest(Command.GET_ASSERTION, None, GetAssertionSub.GET_NEXT_ASSERTION)


def cred_mgmt(sub: CredMgmtSub, sub_params: Optional[dict] = None, token: Optional[bytes] = None) -> CtapRequest:
    p = {}
    if sub_params is not None:
        p[2] = sub_params
    if token is not None:
        msg = bytes([sub]) + (cbor.encode(sub_params) if sub_params is not None else b"")
        p[3] = PIN_PROTOCOL
        p[4] = pinproto.authenticate(token, msg)
    return CtapRequest.build(Command.CREDENTIAL_MANAGEMENT, p, sub)


def delete_credential(cred_id: bytes, token: Optional[bytes]) -> CtapRequest:
    return cred_mgmt(CredMgmtSub.DELETE_CREDENTIAL, {2: {"id": cred_id, "type": "public-key"}}, token)


def simple(command: Command) -> CtapRequest:
    """GetInfo, Reset or Selection."""
    return CtapRequest(command)
