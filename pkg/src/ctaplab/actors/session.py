"""The honest CTAP client: runs user flows over a pipeline."""

from __future__ import annotations

import random
from contextlib import nullcontext
from typing import Optional

from ..authenticator.state import TokenScope
from ..codec import Command, CredMgmtSub, CtapRequest, CtapResponse, Status
from ..authenticator.device import rp_id_hash
from . import client as cl
from .client import CtapError
from .relying_party import AssertionRecord, CredentialRecord, RelyingParty
from .user import (
    FLOW_INFO,
    FLOW_LOGIN,
    FLOW_LOGIN_UV,
    FLOW_MANAGE,
    FLOW_REGISTER,
    FLOW_RESET,
    FLOW_RESET_UV,
    FLOW_SELECTION,
    FLOW_SET_PIN,
    FLOW_VERIFY_PIN,
    FlowExpectation,
    UserModel,
)


class FlowDeclined(Exception):
    """The user would not type a PIN for this flow."""


class ClientSession:
    def __init__(self, pipeline, user: Optional[UserModel] = None, rng=None):
        self.pipeline = pipeline
        self.user = user
        self.rng = rng if rng is not None else random.Random(0)
        self.token: Optional[bytes] = None
        self.token_scope: Optional[str] = None

    @property
    def client_id(self) -> str:
        return self.pipeline.client_id

    @property
    def transport(self) -> str:
        return self.pipeline.transport

    def call(self, req: CtapRequest) -> CtapResponse:
        return self.pipeline.exchange(req)

    def expect(self, req: CtapRequest) -> dict:
        resp = self.call(req)
        if not resp.ok:
            raise CtapError(resp.status, req)
        return resp.payload or {}

    def _flow(self, exp: FlowExpectation):
        return self.user.flow(exp) if self.user is not None else nullcontext()

    # -- PIN ---------------------------------------------------------------

    def pin_ceremony(self, scope: Optional[str] = None, pin: Optional[str] = None) -> bytes:
        if pin is None:
            user = self.user
            if user is None:
                raise FlowDeclined("nobody is there to type the PIN")
            flow = user.active.name if user.active else None
            if not user.user_grant("uv", flow):
                raise FlowDeclined("user declined to enter the PIN")
            pin = user.destructive_pin if scope == TokenScope.DESTRUCTIVE else user.pin
        ka = self.expect(cl.key_agreement())
        try:
            cose, shared = cl.platform_agreement(self.rng, ka[1])
        except (KeyError, ValueError, TypeError):
            raise CtapError(Status.INVALID_PARAMETER, cl.key_agreement()) from None
        req = cl.get_pin_token(cose, shared, pin, scope)
        payload = self.expect(req)
        try:
            self.token = cl.decrypt_token(shared, payload)
        except (KeyError, ValueError, TypeError):
            raise CtapError(Status.PIN_AUTH_INVALID, req) from None
        self.token_scope = scope or TokenScope.NORMAL
        return self.token

    def _agreement(self):
        ka = self.expect(cl.key_agreement())
        return cl.platform_agreement(self.rng, ka[1])

    def set_pin_flow(self, pin: Optional[str] = None, scope: Optional[str] = None):
        if pin is None:
            pin = self.user.destructive_pin if scope == TokenScope.DESTRUCTIVE else self.user.pin
        with self._flow(FLOW_SET_PIN):
            cose, shared = self._agreement()
            self.expect(cl.set_pin(cose, shared, pin, scope))

    def change_pin_flow(self, old: str, new: str):
        with self._flow(FLOW_SET_PIN):
            cose, shared = self._agreement()
            self.expect(cl.change_pin(cose, shared, old, new))

    def verify_pin_flow(self) -> bytes:
        with self._flow(FLOW_VERIFY_PIN):
            return self.pin_ceremony()

    def retries(self) -> int:
        return self.expect(cl.get_retries())[3]

    # -- WebAuthn-ish flows ------------------------------------------------

    def register_flow(self, rp: RelyingParty, account: str = "alice") -> CredentialRecord:
        tmpl = rp.template
        with self._flow(FLOW_REGISTER):
            token = self.pin_ceremony()
            cdh = rp.challenge()
            req = cl.make_credential(cdh, rp.rp_id, rp.user_id_for(account), account,
                                     rk=tmpl.discoverable, protect=tmpl.cred_protect_extension,
                                     token=token)
            payload = self.expect(req)
            return rp.finish_registration(account, payload, cdh)

    def authenticate_flow(self, rp: RelyingParty, account: str = "alice") -> AssertionRecord:
        tmpl = rp.template
        with self._flow(FLOW_LOGIN_UV if tmpl.login_uses_uv else FLOW_LOGIN):
            token = self.pin_ceremony() if tmpl.login_uses_uv else None
            cdh = rp.challenge()
            allow = None if tmpl.discoverable else rp.allow_list(account)
            payload = self.expect(cl.get_assertion(rp.rp_id, cdh, True, token, allow))
            return rp.verify_assertion(None if tmpl.discoverable else account, payload, cdh)

    # -- device management flows -------------------------------------------

    def selection_flow(self) -> CtapResponse:
        with self._flow(FLOW_SELECTION):
            return self.call(cl.simple(Command.SELECTION))

    def info_flow(self) -> dict:
        with self._flow(FLOW_INFO):
            return self.expect(cl.simple(Command.GET_INFO))

    def reset_flow(self, with_uv: bool = False, scope: Optional[str] = None) -> CtapResponse:
        with self._flow(FLOW_RESET_UV if with_uv else FLOW_RESET):
            if with_uv:
                self.pin_ceremony(scope)
            return self.call(cl.simple(Command.RESET))

    def manage_flow(self, delete=(), scope: Optional[str] = None) -> dict:
        """List every discoverable credential; optionally delete some by id."""
        with self._flow(FLOW_MANAGE):
            token = self.pin_ceremony(scope)
            listing = enumerate_credentials(self.call, token)
            for cred_id in delete:
                self.expect(cl.delete_credential(cred_id, token))
            return listing


def enumerate_credentials(send, token: bytes) -> dict:
    """rp_id -> list of credential entries, via the four-step CredMgmt dance."""
    listing: dict = {}
    resp = send(cl.cred_mgmt(CredMgmtSub.GET_CREDS_METADATA, None, token))
    if not resp.ok:
        raise CtapError(resp.status)
    resp = send(cl.cred_mgmt(CredMgmtSub.ENUM_RPS_BEGIN, None, token))
    if resp.status is Status.NO_CREDENTIALS:
        return listing
    if not resp.ok:
        raise CtapError(resp.status)
    rps = [resp.payload[3]["id"]]
    for _ in range(resp.payload[5] - 1):
        nxt = send(cl.cred_mgmt(CredMgmtSub.ENUM_RPS_GET_NEXT_RP))
        if not nxt.ok:
            raise CtapError(nxt.status)
        rps.append(nxt.payload[3]["id"])
    for rp_id in rps:
        resp = send(cl.cred_mgmt(CredMgmtSub.ENUM_CREDS_BEGIN, {1: rp_id_hash(rp_id)}, token))
        if not resp.ok:
            raise CtapError(resp.status)
        entries = [resp.payload]
        for _ in range(resp.payload[9] - 1):
            nxt = send(cl.cred_mgmt(CredMgmtSub.ENUM_CREDS_GET_NEXT))
            if not nxt.ok:
                raise CtapError(nxt.status)
            entries.append(nxt.payload)
        listing[rp_id] = entries
    return listing
