"""Authenticator snapshots: one ``key: value`` line per field, secrets in hex,
a SHA-256 checksum line at the end.

Field list (in file order):

    format, config.*, clock.now, rng.state, master_key, key_agreement_key,
    powered_on_at, session, pin.*, token, cm_enum_cursor, assertion_cursor,
    selection_call_log, assertion_counters, retired_ids, feedback_log,
    credentials.count, cred.<i>.* for each credential, checksum

Text values are JSON strings; nested structures (cursors, feedback log) are
hex-encoded canonical CBOR.
"""

import hashlib
import json
import random
import struct
from pathlib import Path

from ..codec import cbor
from .clock import LogicalClock
from .config import AuthenticatorConfig
from .device import Authenticator
from .state import (
    AuthenticatorState,
    Credential,
    CredProtect,
    EnumCursor,
    FeedbackEvent,
    PinState,
    PinUvToken,
)

FORMAT = "1"


class SnapshotError(ValueError):
    pass


def _hex(b):
    return "-" if b is None else b.hex()


def _unhex(s):
    return None if s == "-" else bytes.fromhex(s)


def _bool(s):
    if s not in ("true", "false"):
        raise SnapshotError(f"bad boolean {s!r}")
    return s == "true"


def _b(v):
    return "true" if v else "false"


def _cursor_out(cur):
    if cur is None:
        return "-"
    return cbor.encode([cur.kind, cur.items, cur.index, cur.extra]).hex()


def _cursor_in(s):
    if s == "-":
        return None
    kind, items, index, extra = cbor.decode(bytes.fromhex(s))
    return EnumCursor(kind, list(items), index, dict(extra))


def _rng_out(rng: random.Random) -> str:
    version, words, gauss = rng.getstate()
    if gauss is not None:
        raise SnapshotError("cannot snapshot an RNG with a cached gauss value")
    return f"{version}:" + struct.pack(f">{len(words)}I", *words).hex()


def _rng_in(s: str) -> random.Random:
    version, blob = s.split(":", 1)
    raw = bytes.fromhex(blob)
    words = struct.unpack(f">{len(raw) // 4}I", raw)
    rng = random.Random()
    rng.setstate((int(version), tuple(words), None))
    return rng


def dumps(auth: Authenticator) -> str:
    cfg, st = auth.config, auth.state
    lines = [
        ("format", FORMAT),
        ("config.profile", json.dumps(cfg.profile)),
        ("config.max_discoverable", str(cfg.max_discoverable)),
        ("config.supports_selection", _b(cfg.supports_selection)),
        ("config.transports", ",".join(sorted(cfg.transports))),
        ("config.countermeasures", ",".join(sorted(c.value for c in cfg.countermeasures)) or "-"),
        ("config.cve_2024_35311", _b(cfg.cve_2024_35311)),
        ("config.trusted_clients", json.dumps(sorted(cfg.trusted_clients))),
        ("config.rotation_period", str(cfg.rotation_period)),
        ("config.aaguid", cfg.aaguid.hex()),
        ("config.manufacturer", json.dumps(cfg.manufacturer)),
        ("config.firmware_version", str(cfg.firmware_version)),
        ("config.versions", ",".join(cfg.versions)),
        ("clock.now", str(auth.clock.now)),
        ("rng.state", _rng_out(auth.rng)),
        ("master_key", st.master_key.hex()),
        ("key_agreement_key", st.key_agreement_key.hex()),
        ("powered_on_at", str(st.powered_on_at)),
        ("session", str(st.session)),
        ("pin.pin_hash", _hex(st.pin.pin_hash)),
        ("pin.total_retries_remaining", str(st.pin.total_retries_remaining)),
        ("pin.consecutive_failures_since_boot", str(st.pin.consecutive_failures_since_boot)),
        ("pin.soft_locked", _b(st.pin.soft_locked)),
        ("pin.hard_locked", _b(st.pin.hard_locked)),
        ("pin.destructive_pin_hash", _hex(st.pin.destructive_pin_hash)),
        ("pin.destructive_retries_remaining", str(st.pin.destructive_retries_remaining)),
    ]
    tok = st.issued_token
    lines.append(("token", "-" if tok is None else
                  f"{tok.token.hex()} {tok.issued_at} {tok.session} {tok.scope} {_b(tok.valid)}"))
    lines += [
        ("cm_enum_cursor", _cursor_out(st.cm_enum_cursor)),
        ("assertion_cursor", _cursor_out(st.assertion_cursor)),
        ("selection_call_log", ",".join(map(str, st.selection_call_log)) or "-"),
        ("assertion_counters", ",".join(f"{k.hex()}={v}" for k, v in st.assertion_counters.items()) or "-"),
        ("retired_ids", ",".join(sorted(x.hex() for x in st.retired_ids)) or "-"),
        ("feedback_log", cbor.encode([[e.blinks, e.api, e.detail, e.at] for e in st.feedback_log]).hex()),
        ("credentials.count", str(len(st.credentials))),
    ]
    for i, c in enumerate(st.credentials):
        pre = f"cred.{i}."
        lines += [
            (pre + "cred_id", c.cred_id.hex()),
            (pre + "rp_id", json.dumps(c.rp_id)),
            (pre + "user_id", c.user_id.hex()),
            (pre + "user_name", json.dumps(c.user_name)),
            (pre + "private_key", c.private_key.hex()),
            (pre + "protect_policy", c.protect_policy.label),
            (pre + "cred_blob", _hex(c.cred_blob)),
            (pre + "discoverable", _b(c.discoverable)),
            (pre + "created_at", str(c.created_at)),
            (pre + "nonce", c.nonce.hex()),
            (pre + "sign_count", str(c.sign_count)),
        ]
    body = "".join(f"{k}: {v}\n" for k, v in lines)
    return body + f"checksum: {hashlib.sha256(body.encode()).hexdigest()}\n"


def loads(text: str) -> Authenticator:
    if not text.endswith("\n") or "\nchecksum: " not in "\n" + text:
        raise SnapshotError("missing checksum line")
    body, _, last = text[:-1].rpartition("\n")
    body += "\n"
    if not last.startswith("checksum: "):
        raise SnapshotError("missing checksum line")
    if hashlib.sha256(body.encode()).hexdigest() != last[len("checksum: "):]:
        raise SnapshotError("checksum mismatch: snapshot was modified or truncated")
    fields = {}
    for line in body.splitlines():
        key, sep, value = line.partition(": ")
        if not sep:
            raise SnapshotError(f"malformed line {line!r}")
        fields[key] = value
    try:
        return _build(fields)
    except SnapshotError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise SnapshotError(f"invalid snapshot field: {exc}") from exc


def _build(f: dict) -> Authenticator:
    if f["format"] != FORMAT:
        raise SnapshotError(f"unsupported snapshot format {f['format']}")
    cms = f["config.countermeasures"]
    cfg = AuthenticatorConfig(
        profile=json.loads(f["config.profile"]),
        max_discoverable=int(f["config.max_discoverable"]),
        supports_selection=_bool(f["config.supports_selection"]),
        transports=frozenset(f["config.transports"].split(",")),
        countermeasures=frozenset() if cms == "-" else frozenset(cms.split(",")),
        cve_2024_35311=_bool(f["config.cve_2024_35311"]),
        trusted_clients=frozenset(json.loads(f["config.trusted_clients"])),
        rotation_period=int(f["config.rotation_period"]),
        aaguid=bytes.fromhex(f["config.aaguid"]),
        manufacturer=json.loads(f["config.manufacturer"]),
        firmware_version=int(f["config.firmware_version"]),
        versions=tuple(f["config.versions"].split(",")),
    )
    pin = PinState(
        pin_hash=_unhex(f["pin.pin_hash"]),
        total_retries_remaining=int(f["pin.total_retries_remaining"]),
        consecutive_failures_since_boot=int(f["pin.consecutive_failures_since_boot"]),
        soft_locked=_bool(f["pin.soft_locked"]),
        hard_locked=_bool(f["pin.hard_locked"]),
        destructive_pin_hash=_unhex(f["pin.destructive_pin_hash"]),
        destructive_retries_remaining=int(f["pin.destructive_retries_remaining"]),
    )
    token = None
    if f["token"] != "-":
        t, issued, session, scope, valid = f["token"].split(" ")
        token = PinUvToken(bytes.fromhex(t), int(issued), int(session), scope, _bool(valid))
    creds = []
    for i in range(int(f["credentials.count"])):
        pre = f"cred.{i}."
        creds.append(Credential(
            cred_id=bytes.fromhex(f[pre + "cred_id"]),
            rp_id=json.loads(f[pre + "rp_id"]),
            user_id=bytes.fromhex(f[pre + "user_id"]),
            user_name=json.loads(f[pre + "user_name"]),
            private_key=bytes.fromhex(f[pre + "private_key"]),
            protect_policy=CredProtect.parse(f[pre + "protect_policy"]),
            cred_blob=_unhex(f[pre + "cred_blob"]),
            discoverable=_bool(f[pre + "discoverable"]),
            created_at=int(f[pre + "created_at"]),
            nonce=bytes.fromhex(f[pre + "nonce"]),
            sign_count=int(f[pre + "sign_count"]),
        ))
    counters = {}
    if f["assertion_counters"] != "-":
        for item in f["assertion_counters"].split(","):
            k, v = item.split("=")
            counters[bytes.fromhex(k)] = int(v)
    state = AuthenticatorState(
        master_key=bytes.fromhex(f["master_key"]),
        key_agreement_key=bytes.fromhex(f["key_agreement_key"]),
        credentials=creds,
        pin=pin,
        powered_on_at=int(f["powered_on_at"]),
        session=int(f["session"]),
        issued_token=token,
        cm_enum_cursor=_cursor_in(f["cm_enum_cursor"]),
        assertion_cursor=_cursor_in(f["assertion_cursor"]),
        selection_call_log=[] if f["selection_call_log"] == "-" else
        [int(x) for x in f["selection_call_log"].split(",")],
        assertion_counters=counters,
        retired_ids=set() if f["retired_ids"] == "-" else
        {bytes.fromhex(x) for x in f["retired_ids"].split(",")},
        feedback_log=[FeedbackEvent(*e) for e in cbor.decode(bytes.fromhex(f["feedback_log"]))],
    )
    return Authenticator(cfg, seed=_rng_in(f["rng.state"]), clock=LogicalClock(int(f["clock.now"])),
                         state=state)


def save(auth: Authenticator, path) -> None:
    Path(path).write_text(dumps(auth), encoding="utf-8")


def load(path) -> Authenticator:
    p = Path(path)
    if not p.exists():
        raise SnapshotError(f"no snapshot at {p}")
    return loads(p.read_text(encoding="utf-8"))
