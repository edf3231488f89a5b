"""Relying-party templates and a minimal challenge/sign/verify server."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import yaml

from ..authenticator import pinproto
from ..authenticator.state import CredProtect
from ..codec.authdata import AuthDataError, parse_auth_data

TEMPLATE_FILE = Path(__file__).parent / "templates" / "table5.yaml"


class CredentialKind(str, Enum):
    DISCOVERABLE = "discoverable"
    DISCOVERABLE_WEAK = "discoverable_weak"
    NON_DISCOVERABLE = "non_discoverable"

    @classmethod
    def parse(cls, text: str) -> "CredentialKind":
        short = {"disc": cls.DISCOVERABLE, "discweak": cls.DISCOVERABLE_WEAK,
                 "nondisc": cls.NON_DISCOVERABLE}
        key = str(text).strip()
        if key.lower() in short:
            return short[key.lower()]
        return cls(key)

    @property
    def label(self) -> str:
        return {"discoverable": "Disc", "discoverable_weak": "DiscWeak",
                "non_discoverable": "NonDisc"}[self.value]


@dataclass(frozen=True)
class RelyingPartyTemplate:
    name: str
    rp_id: str
    credential_kind: CredentialKind

    @property
    def discoverable(self) -> bool:
        return self.credential_kind is not CredentialKind.NON_DISCOVERABLE

    @property
    def protect_policy(self) -> CredProtect:
        # non-weak discoverable RPs ask for UVRequired; everything else keeps the default
        if self.credential_kind is CredentialKind.DISCOVERABLE:
            return CredProtect.UV_REQUIRED
        return CredProtect.UV_OPTIONAL

    @property
    def cred_protect_extension(self) -> Optional[CredProtect]:
        if self.credential_kind is CredentialKind.DISCOVERABLE:
            return CredProtect.UV_REQUIRED
        return None

    @property
    def login_uses_uv(self) -> bool:
        return self.credential_kind is CredentialKind.DISCOVERABLE


def load_templates(path=None) -> list[RelyingPartyTemplate]:
    raw = yaml.safe_load(Path(path or TEMPLATE_FILE).read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise ValueError("template file must hold a list")
    out = []
    for row in raw:
        try:
            out.append(RelyingPartyTemplate(str(row["name"]), str(row["rp_id"]),
                                            CredentialKind.parse(row["kind"])))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"bad template entry {row!r}") from exc
    names = [t.name for t in out]
    if len(set(names)) != len(names):
        raise ValueError("duplicate template names")
    return out


_BUILTIN = None


def builtin_templates() -> list[RelyingPartyTemplate]:
    global _BUILTIN
    if _BUILTIN is None:
        _BUILTIN = load_templates()
    return list(_BUILTIN)


def template(name: str) -> RelyingPartyTemplate:
    for t in builtin_templates():
        if t.name == name:
            return t
    raise KeyError(f"unknown relying-party template {name!r}")


@dataclass
class CredentialRecord:
    rp_id: str
    account: str
    cred_id: bytes
    user_id: bytes
    public_key: dict
    discoverable: bool
    protect_policy: CredProtect
    ok: bool = True


@dataclass
class AssertionRecord:
    rp_id: str
    account: str
    cred_id: Optional[bytes]
    user_id: Optional[bytes]
    verified: bool
    sign_count: int = 0
    uv: bool = False
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.verified


def _rp_hash(rp_id: str) -> bytes:
    return hashlib.sha256(rp_id.encode("utf-8")).digest()


class RelyingParty:
    """Bookkeeping for one RP: accounts, their user ids and registered keys."""

    def __init__(self, tmpl: RelyingPartyTemplate, rng):
        self.template = tmpl
        self.rng = rng
        self.user_ids: dict[str, bytes] = {}
        self.credentials: dict[str, CredentialRecord] = {}

    @property
    def rp_id(self) -> str:
        return self.template.rp_id

    def user_id_for(self, account: str) -> bytes:
        if account not in self.user_ids:
            self.user_ids[account] = self.rng.randbytes(32)
        return self.user_ids[account]

    def challenge(self) -> bytes:
        return hashlib.sha256(self.rng.randbytes(32)).digest()

    def allow_list(self, account: str) -> list:
        rec = self.credentials.get(account)
        return [rec.cred_id] if rec else []

    def finish_registration(self, account: str, payload: Optional[dict], cdh: bytes) -> CredentialRecord:
        bad = CredentialRecord(self.rp_id, account, b"", self.user_id_for(account), {},
                               self.template.discoverable, self.template.protect_policy, ok=False)
        try:
            ad = parse_auth_data(payload[2])
            sig = payload[3]["sig"]
        except (TypeError, KeyError, AuthDataError):
            return bad
        if ad.rp_id_hash != _rp_hash(self.rp_id) or ad.public_key is None or not ad.up:
            return bad
        try:
            pub = pinproto.public_from_cose(ad.public_key)
        except ValueError:
            return bad
        if not pinproto.verify(pub, sig, payload[2] + cdh):
            return bad
        policy = self.template.protect_policy
        if ad.extensions and "credProtect" in ad.extensions:
            policy = CredProtect(ad.extensions["credProtect"])
        rec = CredentialRecord(self.rp_id, account, ad.cred_id, self.user_id_for(account),
                               ad.public_key, self.template.discoverable, policy)
        self.credentials[account] = rec
        return rec

    def verify_assertion(self, account: Optional[str], payload: Optional[dict], cdh: bytes) -> AssertionRecord:
        def fail(reason, cred_id=None, user_id=None):
            return AssertionRecord(self.rp_id, account or "", cred_id, user_id, False, reason=reason)

        try:
            cred_id = payload[1]["id"]
            raw = payload[2]
            sig = payload[3]
            ad = parse_auth_data(raw)
        except (TypeError, KeyError, AuthDataError):
            return fail("malformed assertion")
        user_id = (payload.get(4) or {}).get("id")
        if account is None:
            account = next((a for a, u in self.user_ids.items() if u == user_id), None)
            if account is None:
                # identifiers rotated: fall back to matching the public key
                account = next((a for a, r in self.credentials.items()
                                if pinproto.verify(pinproto.public_from_cose(r.public_key), sig, raw + cdh)), None)
        rec = self.credentials.get(account) if account else None
        if rec is None:
            return fail("unknown account", cred_id, user_id)
        if ad.rp_id_hash != _rp_hash(self.rp_id):
            return fail("rp id hash mismatch", cred_id, user_id)
        if not ad.up:
            return fail("user presence flag missing", cred_id, user_id)
        if not pinproto.verify(pinproto.public_from_cose(rec.public_key), sig, raw + cdh):
            return fail("bad signature", cred_id, user_id)
        if cred_id != rec.cred_id:
            # a rotated credential id still verifies against the registered key
            rec.cred_id = cred_id
        return AssertionRecord(self.rp_id, account, cred_id, user_id, True, ad.sign_count, ad.uv)
