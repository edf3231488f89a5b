"""Drive an Authenticator directly, without transports or actors."""

import hashlib

from ctaplab.actors import client as cl
from ctaplab.authenticator import Authenticator, TransportContext, pinproto, profile_config
from ctaplab.authenticator.state import CredProtect
from ctaplab.codec import Command, CtapRequest, Status

PLATFORM_SCALAR = pinproto.scalar_from_seed(hashlib.sha256(b"test platform").digest())
PLATFORM = pinproto.private_key(PLATFORM_SCALAR)
PLATFORM_COSE = pinproto.cose_public(PLATFORM.public_key(), pinproto.COSE_ECDH_ES_HKDF_256)
PIN = "1234"


def always(prompt):
    return True


def never(prompt):
    return False


class Desk:
    """An authenticator, a PIN-aware client and a button the test controls."""

    def __init__(self, profile="solo2-like", seed=0, transport="usb", grant=always, **overrides):
        self.auth = Authenticator(profile_config(profile, **overrides), seed=seed)
        self.transport = transport
        self.grant = grant
        self.client_id = "platform"
        self._users = 0

    def ctx(self, transport=None, grant=None, client_id=None):
        return TransportContext(transport or self.transport, client_id or self.client_id,
                                grant if grant is not None else self.grant, self.auth.state.powered_on_at)

    def send(self, req: CtapRequest, **ctx):
        return self.auth.handle_request(req, self.ctx(**ctx))

    def shared(self):
        ka = self.send(cl.key_agreement())
        if ka.status is not Status.OK:
            return None
        return pinproto.shared_secret(PLATFORM, pinproto.public_from_cose(ka.payload[1]))

    def set_pin(self, pin=PIN, scope=None):
        return self.send(cl.set_pin(PLATFORM_COSE, self.shared(), pin, scope)).status

    def try_pin(self, pin=PIN, scope=None):
        """(status, token or None)."""
        shared = self.shared()
        if shared is None:
            # ClientPin itself is refused while locked; the attempt fails the same way
            return self.send(cl.get_pin_token(PLATFORM_COSE, b"\0" * 32, pin, scope)).status, None
        resp = self.send(cl.get_pin_token(PLATFORM_COSE, shared, pin, scope))
        token = pinproto.decrypt(shared, resp.payload[2]) if resp.ok else None
        return resp.status, token

    def token(self, pin=PIN, scope=None):
        status, tok = self.try_pin(pin, scope)
        assert status is Status.OK, status
        return tok

    def register(self, rp_id="example.com", user=None, rk=True, protect=None, token=None, **ctx):
        if user is None:
            self._users += 1
            user = hashlib.sha256(f"user{self._users}".encode()).digest()[:16]
        tok = token if token is not None else self.token()
        req = cl.make_credential(b"\x11" * 32, rp_id, user, "alice", rk=rk, protect=protect, token=tok)
        return self.send(req, **ctx)

    def assertion(self, rp_id="example.com", up=True, token=None, allow=None, **ctx):
        return self.send(cl.get_assertion(rp_id, b"\x22" * 32, up, token, allow), **ctx)

    def info(self):
        return self.send(cl.simple(Command.GET_INFO)).payload

    def replug(self):
        self.auth.power_on()


def weak(desk: Desk, rp_id="weak.example", **kw):
    return desk.register(rp_id, protect=CredProtect.UV_OPTIONAL, **kw)


def strict(desk: Desk, rp_id="strict.example", **kw):
    return desk.register(rp_id, protect=CredProtect.UV_REQUIRED, **kw)
