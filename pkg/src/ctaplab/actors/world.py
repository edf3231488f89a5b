"""Wiring for one simulated desk: authenticator, transport, user, client and RPs."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from ..authenticator import Authenticator, AuthenticatorConfig
from ..transports import Pipeline, open_channel
from .relying_party import RelyingParty, RelyingPartyTemplate
from .session import ClientSession
from .user import UserModel


@dataclass
class World:
    auth: Authenticator
    device: object
    link: object
    pipeline: Pipeline
    user: UserModel
    session: ClientSession
    seed: object
    rps: dict = field(default_factory=dict)

    @classmethod
    def build(cls, config: AuthenticatorConfig, transport: str = "usb", seed=0,
              pin: str = "1234", destructive_pin: Optional[str] = None,
              trace: Optional[list] = None, user: Optional[UserModel] = None) -> "World":
        auth = Authenticator(config, seed=random.Random(f"{seed}:auth"))
        user = user or UserModel(pin=pin, destructive_pin=destructive_pin, clock=auth.clock)
        if user.clock is None:
            user.clock = auth.clock
        auth.feedback_listeners.append(user.observe)
        device, link = open_channel(auth, transport, button=user.up_granter, trace=trace, seed=seed)
        pipe = Pipeline(link)
        session = ClientSession(pipe, user, random.Random(f"{seed}:client"))
        return cls(auth, device, link, pipe, user, session, seed)

    @property
    def clock(self):
        return self.auth.clock

    @property
    def transport(self) -> str:
        return self.link.transport

    @property
    def trace(self) -> list:
        return self.link.trace

    def rp(self, tmpl: RelyingPartyTemplate) -> RelyingParty:
        if tmpl.name not in self.rps:
            self.rps[tmpl.name] = RelyingParty(tmpl, random.Random(f"{self.seed}:rp:{tmpl.name}"))
        return self.rps[tmpl.name]

    def replug(self):
        """Unplug and replug (USB) or tap the key again (NFC): a new power session."""
        if self.transport == "usb":
            self.device.plug_in()
            self.link.cid = None
            self.link.connect(self.pipeline.client_id)
        else:
            self.link.connect(self.pipeline.client_id, power_cycle=True)

    def client(self, client_id: str, hook=None, user: Optional[UserModel] = None, rng_tag="other") -> ClientSession:
        """Another client on the same link (an attacker's, typically)."""
        pipe = Pipeline(self.link, hook, client_id)
        return ClientSession(pipe, user, random.Random(f"{self.seed}:{rng_tag}"))

    def setup(self, templates, account: str = "alice", set_destructive: bool = False):
        """Set the PIN(s) and register one account per template."""
        self.session.set_pin_flow()
        if set_destructive:
            from ..authenticator.state import TokenScope
            self.session.set_pin_flow(scope=TokenScope.DESTRUCTIVE)
        records = []
        for t in templates:
            records.append(self.session.register_flow(self.rp(t), account))
        return records
