"""Authenticator configuration and the three built-in capability profiles."""

from dataclasses import dataclass, field, replace

from ..codec.constants import Countermeasure, parse_countermeasures

TRANSPORTS = ("usb", "nfc")


@dataclass(frozen=True)
class AuthenticatorConfig:
    profile: str = "custom"
    max_discoverable: int = 25
    supports_selection: bool = False
    transports: frozenset = frozenset(TRANSPORTS)
    countermeasures: frozenset = frozenset()
    cve_2024_35311: bool = False
    trusted_clients: frozenset = frozenset({"platform"})
    rotation_period: int = 10
    aaguid: bytes = b"\x00" * 16
    manufacturer: str = "lab"
    firmware_version: int = 1
    versions: tuple = ("FIDO_2_0", "FIDO_2_1")

    def __post_init__(self):
        if self.max_discoverable <= 0:
            raise ValueError("max_discoverable must be positive")
        if not self.transports or not set(self.transports) <= set(TRANSPORTS):
            raise ValueError(f"transports must be a non-empty subset of {TRANSPORTS}")
        if len(self.aaguid) != 16:
            raise ValueError("aaguid is 16 bytes")
        if self.rotation_period <= 0:
            raise ValueError("rotation_period must be positive")
        object.__setattr__(self, "transports", frozenset(self.transports))
        object.__setattr__(self, "countermeasures", parse_countermeasures(self.countermeasures))
        object.__setattr__(self, "trusted_clients", frozenset(self.trusted_clients))

    def has(self, cm) -> bool:
        return Countermeasure(str(cm)) in self.countermeasures

    def with_countermeasures(self, *cms) -> "AuthenticatorConfig":
        return replace(self, countermeasures=frozenset(self.countermeasures) | parse_countermeasures(cms))

    def evolve(self, **changes) -> "AuthenticatorConfig":
        return replace(self, **changes)


PROFILES = {
    # Yubico-like: small store, no Selection API
    "yubikey5-like": dict(max_discoverable=25, supports_selection=False, transports=("usb", "nfc"),
                          aaguid=bytes.fromhex("cb69481e8ff7403993ec0a2729a154a8"),
                          manufacturer="yubico-like", firmware_version=0x050207),
    "solo2-like": dict(max_discoverable=50, supports_selection=True, transports=("usb", "nfc"),
                       aaguid=bytes.fromhex("8876631bd4a0427f57730ec71c9e0279"),
                       manufacturer="solokeys-like", firmware_version=0x0964),
    "opensk-like": dict(max_discoverable=150, supports_selection=True, transports=("usb",),
                        aaguid=bytes.fromhex("664d9f67c2a74a0c8bdb6c2b44f7ae1e"),
                        manufacturer="opensk-like", firmware_version=0x0201),
}
PROFILE_ORDER = ["yubikey5-like", "solo2-like", "opensk-like"]


def profile_config(name: str, **overrides) -> AuthenticatorConfig:
    try:
        base = PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}") from None
    return AuthenticatorConfig(profile=name, **{**base, **overrides})
