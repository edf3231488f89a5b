"""Mutable authenticator state.  Everything here is plain data so it can be
copied (exhaustive lockout search) and written to a snapshot file."""

import copy
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Optional

from . import pinproto

MAX_PIN_RETRIES = 8


class CredProtect(IntEnum):
    UV_OPTIONAL = 1
    UV_OPTIONAL_WITH_CRED_ID_LIST = 2
    UV_REQUIRED = 3

    @classmethod
    def parse(cls, value) -> "CredProtect":
        if isinstance(value, CredProtect):
            return value
        if isinstance(value, int):
            return cls(value)
        key = str(value).replace("-", "").replace("_", "").lower()
        names = {
            "uvoptional": cls.UV_OPTIONAL,
            "uvoptionalwithcredidlist": cls.UV_OPTIONAL_WITH_CRED_ID_LIST,
            "uvrequired": cls.UV_REQUIRED,
        }
        if key not in names:
            raise ValueError(f"unknown credProtect policy {value!r}")
        return names[key]

    @property
    def label(self) -> str:
        return {1: "UVOptional", 2: "UVOptionalWithCredIDList", 3: "UVRequired"}[self.value]


class TokenScope:
    NORMAL = "normal"
    DESTRUCTIVE = "destructive"


@dataclass
class Credential:
    cred_id: bytes
    rp_id: str
    user_id: bytes
    user_name: str
    private_key: bytes  # P-256 scalar
    protect_policy: CredProtect = CredProtect.UV_OPTIONAL
    cred_blob: Optional[bytes] = None
    discoverable: bool = True
    created_at: int = 0
    nonce: bytes = b""
    sign_count: int = 0

    def public_key(self):
        return pinproto.private_key(self.private_key).public_key()

    def cose_key(self) -> dict:
        return pinproto.cose_public(self.public_key())


@dataclass
class PinState:
    pin_hash: Optional[bytes] = None
    total_retries_remaining: int = MAX_PIN_RETRIES
    consecutive_failures_since_boot: int = 0
    soft_locked: bool = False
    hard_locked: bool = False
    # second slot, only meaningful with C4
    destructive_pin_hash: Optional[bytes] = None
    destructive_retries_remaining: int = MAX_PIN_RETRIES

    @property
    def is_set(self) -> bool:
        return self.pin_hash is not None


@dataclass
class PinUvToken:
    token: bytes
    issued_at: int
    session: int
    scope: str = TokenScope.NORMAL
    valid: bool = True


@dataclass
class EnumCursor:
    kind: str  # "rps", "creds" or "assertions"
    items: list
    index: int
    extra: dict = field(default_factory=dict)


@dataclass
class FeedbackEvent:
    blinks: int
    api: str  # short command name
    detail: str
    at: int


@dataclass
class AuthenticatorState:
    master_key: bytes
    key_agreement_key: bytes
    credentials: list = field(default_factory=list)
    pin: PinState = field(default_factory=PinState)
    powered_on_at: int = 0
    session: int = 1
    issued_token: Optional[PinUvToken] = None
    cm_enum_cursor: Optional[EnumCursor] = None
    assertion_cursor: Optional[EnumCursor] = None
    selection_call_log: list = field(default_factory=list)
    assertion_counters: dict = field(default_factory=dict)
    retired_ids: set = field(default_factory=set)
    feedback_log: list = field(default_factory=list)

    def discoverable(self) -> list:
        return [c for c in self.credentials if c.discoverable]

    def find(self, cred_id: bytes) -> Optional[Credential]:
        for c in self.credentials:
            if c.cred_id == cred_id:
                return c
        return None

    def copy(self) -> "AuthenticatorState":
        return copy.deepcopy(self)


@dataclass
class UpPrompt:
    """What a user sees when the authenticator asks for a button press."""
    api: str
    client_id: str
    transport: str
    at: int


@dataclass
class TransportContext:
    transport: str = "direct"  # usb | nfc | direct
    client_id: str = "platform"
    up_granter: Optional[Callable[[UpPrompt], bool]] = None
    session_powered_on_at: int = 0

    def __post_init__(self):
        if self.transport not in ("usb", "nfc", "direct"):
            raise ValueError(f"unknown transport {self.transport!r}")


def fresh_state(rng, now: int = 0) -> AuthenticatorState:
    return AuthenticatorState(
        master_key=rng.randbytes(32),
        key_agreement_key=pinproto.random_scalar(rng),
        powered_on_at=now,
    )
