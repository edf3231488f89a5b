"""The virtual CTAP2 authenticator.

One ``Authenticator`` owns a config, a mutable ``AuthenticatorState``, a
logical clock and a seeded RNG.  ``handle`` runs one request and reports how
long the device stayed busy (and why), so the transport layer can emit
keepalives and refuse other channels meanwhile.
"""

from __future__ import annotations

import hashlib
import random
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from ..codec import cbor
from ..codec.constants import ClientPinSub, Command, Countermeasure, CredMgmtSub, Status
from ..codec.messages import (
    CtapRequest,
    CtapResponse,
    InvalidMessage,
    UnknownCommand,
    UnknownSubcommand,
    decode_request,
    encode_response,
)
from . import pinproto
from .clock import LogicalClock
from .config import AuthenticatorConfig
from .state import (
    MAX_PIN_RETRIES,
    AuthenticatorState,
    Credential,
    CredProtect,
    EnumCursor,
    FeedbackEvent,
    PinState,
    PinUvToken,
    TokenScope,
    TransportContext,
    UpPrompt,
    fresh_state,
)

UP_TIMEOUT_MS = 30_000
USER_PRESS_MS = 600
RESET_PROCESSING_MS = 250
RESET_WINDOW_MS = 10_000
SELECTION_WINDOW_MS = 120_000
SELECTION_MAX_CALLS = 3
SOFT_LOCK_THRESHOLD = 3
MAX_MSG_SIZE = 7609

FLAG_UP, FLAG_UV, FLAG_AT, FLAG_ED = 0x01, 0x04, 0x40, 0x80

# vendor GetInfo key for the discoverable-credential capacity
INFO_MAX_DISCOVERABLE = 0x60
PIN_SCOPE_KEY = 0x20

C1, C2, C3, C4, C5, C6, C7, C8 = (Countermeasure(f"C{i}") for i in range(1, 9))


@dataclass
class Phase:
    kind: str  # "waiting" (UP) or "processing"
    start: int
    duration: int


@dataclass
class Outcome:
    response: CtapResponse
    phases: list = field(default_factory=list)

    @property
    def elapsed(self) -> int:
        return sum(p.duration for p in self.phases)


@dataclass
class Denial:
    countermeasure: Countermeasure
    api: str
    status: Status
    at: int


class _Reject(Exception):
    def __init__(self, status: Status):
        super().__init__(status.name)
        self.status = status


def _need(mapping, key, kind):
    if not isinstance(mapping, dict) or key not in mapping:
        raise _Reject(Status.MISSING_PARAMETER)
    value = mapping[key]
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise _Reject(Status.CBOR_UNEXPECTED_TYPE)
    return value


def _opt(mapping, key, kind, default=None):
    if not isinstance(mapping, dict) or key not in mapping:
        return default
    return _need(mapping, key, kind)


def is_destructive(req: CtapRequest) -> bool:
    return req.command is Command.RESET or (
        req.command is Command.CREDENTIAL_MANAGEMENT
        and req.subcommand is CredMgmtSub.DELETE_CREDENTIAL)


def rp_id_hash(rp_id: str) -> bytes:
    return hashlib.sha256(rp_id.encode("utf-8")).digest()


class Authenticator:
    def __init__(self, config: Optional[AuthenticatorConfig] = None, seed=0,
                 clock: Optional[LogicalClock] = None, state: Optional[AuthenticatorState] = None):
        self.config = config or AuthenticatorConfig()
        self.clock = clock or LogicalClock()
        self.rng = seed if isinstance(seed, random.Random) else random.Random(seed)
        self.state = state or fresh_state(self.rng, self.clock.now)
        self.audit = Counter()
        self.denials: list[Denial] = []
        self.rotations: list[tuple] = []
        self.feedback_listeners = []
        self._t = self.clock.now
        self._phases: list[Phase] = []

    # -- lifecycle ---------------------------------------------------------

    def power_on(self):
        """Unplug/replug or re-enter NFC range: a new power session."""
        st = self.state
        st.powered_on_at = self.clock.now
        st.session += 1
        st.pin.consecutive_failures_since_boot = 0
        st.pin.soft_locked = False
        st.issued_token = None
        st.cm_enum_cursor = None
        st.assertion_cursor = None
        st.key_agreement_key = pinproto.random_scalar(self.rng)

    def valid_token(self) -> Optional[PinUvToken]:
        tok = self.state.issued_token
        if tok is not None and tok.valid and tok.session == self.state.session:
            return tok
        return None

    # -- entry points ------------------------------------------------------

    def handle(self, req: CtapRequest, ctx: TransportContext) -> Outcome:
        self._t = self.clock.now
        self._phases = []
        try:
            resp = self._dispatch(req, ctx)
        except _Reject as rej:
            resp = CtapResponse(rej.status)
        return Outcome(resp, self._phases)

    def handle_request(self, req: CtapRequest, ctx: Optional[TransportContext] = None) -> CtapResponse:
        """Synchronous helper: runs the request and advances the clock past it."""
        out = self.handle(req, ctx or TransportContext())
        self.clock.advance(out.elapsed)
        return out.response

    def handle_bytes(self, data: bytes, ctx: TransportContext) -> tuple[bytes, list]:
        try:
            req = decode_request(data)
        except UnknownCommand:
            return bytes([Status.INVALID_COMMAND]), []
        except UnknownSubcommand:
            return bytes([Status.INVALID_SUBCOMMAND]), []
        except InvalidMessage:
            return bytes([Status.MISSING_PARAMETER]), []
        except cbor.CborError:
            return bytes([Status.INVALID_CBOR]), []
        out = self.handle(req, ctx)
        return encode_response(out.response), out.phases

    # -- plumbing ----------------------------------------------------------

    def _wait(self, ms: int, kind: str = "waiting"):
        self._phases.append(Phase(kind, self._t, ms))
        self._t += ms

    def _deny(self, cm: Countermeasure, req: CtapRequest, status: Status) -> CtapResponse:
        self.denials.append(Denial(cm, req.name(), status, self._t))
        return CtapResponse(status)

    def _user_presence(self, ctx: TransportContext, req: CtapRequest) -> bool:
        if ctx.transport == "nfc" and not self.config.has(C3):
            self.audit["up_implicit"] += 1
            return True
        self.audit["up_prompts"] += 1
        prompt = UpPrompt(api=req.name(), client_id=ctx.client_id, transport=ctx.transport, at=self._t)
        granted = bool(ctx.up_granter(prompt)) if ctx.up_granter else False
        if granted:
            self.audit["up_granted"] += 1
            self._wait(USER_PRESS_MS)
        else:
            self.audit["up_declined"] += 1
            self._wait(UP_TIMEOUT_MS)
        return granted

    def _up_or_deny(self, ctx, req, status=Status.UP_REQUIRED, cm=None) -> Optional[CtapResponse]:
        if self._user_presence(ctx, req):
            return None
        if cm is None and ctx.transport == "nfc" and self.config.has(C3):
            cm = C3
        return self._deny(cm, req, status) if cm else CtapResponse(status)

    def emit_feedback(self, req: CtapRequest) -> Optional[FeedbackEvent]:
        if not self.config.has(C2):
            return None
        ev = FeedbackEvent(2 if is_destructive(req) else 1, req.command.short, req.name(), self._t)
        self.state.feedback_log.append(ev)
        for listener in self.feedback_listeners:
            listener(ev)
        return ev

    def _verify_token(self, pin_auth, protocol, message: bytes):
        """Returns (error status or None, token)."""
        if pin_auth is None:
            return (Status.PIN_REQUIRED if self.state.pin.is_set else Status.PIN_NOT_SET), None
        if protocol is None:
            return Status.MISSING_PARAMETER, None
        if protocol != 1:
            return Status.INVALID_PARAMETER, None
        tok = self.valid_token()
        if tok is None or not pinproto.verify_auth(tok.token, message, pin_auth):
            return Status.PIN_AUTH_INVALID, None
        return None, tok

    # -- dispatch ----------------------------------------------------------

    def _dispatch(self, req: CtapRequest, ctx: TransportContext) -> CtapResponse:
        st, cmd = self.state, req.command
        if self.config.has(C1) and ctx.client_id not in self.config.trusted_clients:
            return self._deny(C1, req, Status.CLIENT_NOT_TRUSTED)
        self.emit_feedback(req)
        if not (cmd is Command.CREDENTIAL_MANAGEMENT and req.subcommand in (
                CredMgmtSub.ENUM_RPS_GET_NEXT_RP, CredMgmtSub.ENUM_CREDS_GET_NEXT)):
            st.cm_enum_cursor = None
        if not req.is_get_next_assertion:
            st.assertion_cursor = None
        if cmd not in (Command.GET_INFO, Command.RESET) and not self._destructive_recovery(req):
            if st.pin.hard_locked:
                return CtapResponse(Status.PIN_BLOCKED)
            if st.pin.soft_locked:
                return CtapResponse(Status.PIN_AUTH_BLOCKED)
        if cmd is Command.GET_INFO:
            return self.get_info()
        if cmd is Command.CLIENT_PIN:
            return self.client_pin(req, ctx)
        if cmd is Command.MAKE_CREDENTIAL:
            return self.make_credential(req, ctx)
        if cmd is Command.GET_ASSERTION:
            if req.is_get_next_assertion:
                return self.get_next_assertion(req, ctx)
            return self.get_assertion(req, ctx)
        if cmd is Command.CREDENTIAL_MANAGEMENT:
            return self.credential_management(req, ctx)
        if cmd is Command.RESET:
            return self.reset(req, ctx)
        if cmd is Command.SELECTION:
            return self.selection(req, ctx)
        return CtapResponse(Status.INVALID_COMMAND)

    def _destructive_recovery(self, req: CtapRequest) -> bool:
        # under C4 the destructive PIN still works while the everyday PIN is locked
        if not (self.config.has(C4) and req.command is Command.CLIENT_PIN):
            return False
        if req.subcommand is ClientPinSub.KEY_AGREEMENT:
            return True
        return isinstance(req.params, dict) and req.params.get(PIN_SCOPE_KEY) == TokenScope.DESTRUCTIVE

    # -- GetInfo -----------------------------------------------------------

    def get_info(self) -> CtapResponse:
        cfg, st = self.config, self.state
        options = {"rk": True, "up": True, "clientPin": st.pin.is_set, "credMgmt": True}
        payload = {
            0x01: list(cfg.versions),
            0x02: ["credProtect", "credBlob"],
            0x03: cfg.aaguid,
            0x04: options,
            0x05: 1200,
            0x06: [1],
            0x09: sorted(cfg.transports),
            0x0A: [{"alg": pinproto.COSE_ES256, "type": "public-key"}],
            0x0E: cfg.firmware_version,
            0x14: cfg.max_discoverable - len(st.discoverable()),
            INFO_MAX_DISCOVERABLE: cfg.max_discoverable,
        }
        return CtapResponse(Status.OK, payload)

    # -- ClientPin ---------------------------------------------------------

    def _regenerate_key_agreement(self):
        self.state.key_agreement_key = pinproto.random_scalar(self.rng)

    def _shared_secret(self, params) -> bytes:
        try:
            peer = pinproto.public_from_cose(_need(params, 3, dict))
        except ValueError:
            raise _Reject(Status.INVALID_PARAMETER) from None
        return pinproto.shared_secret(pinproto.private_key(self.state.key_agreement_key), peer)

    def _check_pin_hash(self, shared: bytes, pin_hash_enc: bytes, scope: str) -> Optional[Status]:
        pin = self.state.pin
        normal = scope == TokenScope.NORMAL
        expected = pin.pin_hash if normal else pin.destructive_pin_hash
        if expected is None:
            return Status.PIN_NOT_SET
        if normal:
            pin.total_retries_remaining -= 1
        else:
            if pin.destructive_retries_remaining <= 0:
                return Status.PIN_BLOCKED
            pin.destructive_retries_remaining -= 1
        try:
            got = pinproto.decrypt(shared, pin_hash_enc)
        except ValueError:
            got = None
        if got != expected:
            self._regenerate_key_agreement()
            self.audit["pin_failures"] += 1
            if not normal:
                return Status.PIN_BLOCKED if pin.destructive_retries_remaining == 0 else Status.PIN_INVALID
            pin.consecutive_failures_since_boot += 1
            if pin.total_retries_remaining <= 0:
                pin.hard_locked = True
                return Status.PIN_BLOCKED
            if pin.consecutive_failures_since_boot >= SOFT_LOCK_THRESHOLD:
                pin.soft_locked = True
                return Status.PIN_AUTH_BLOCKED
            return Status.PIN_INVALID
        if normal:
            pin.total_retries_remaining += 1  # this attempt was not a failure
            pin.consecutive_failures_since_boot = 0
        else:
            pin.destructive_retries_remaining = MAX_PIN_RETRIES
            # the destructive PIN can recover a locked everyday PIN without a wipe
            pin.total_retries_remaining = MAX_PIN_RETRIES
            pin.consecutive_failures_since_boot = 0
            pin.hard_locked = pin.soft_locked = False
        return None

    def client_pin(self, req: CtapRequest, ctx: TransportContext) -> CtapResponse:
        p, sub, pin = req.params, req.subcommand, self.state.pin
        if _need(p, 1, int) != 1:
            return CtapResponse(Status.INVALID_PARAMETER)
        if sub is ClientPinSub.GET_RETRIES:
            return CtapResponse(Status.OK, {3: pin.total_retries_remaining})
        if sub is ClientPinSub.KEY_AGREEMENT:
            pub = pinproto.private_key(self.state.key_agreement_key).public_key()
            return CtapResponse(Status.OK, {1: pinproto.cose_public(pub, pinproto.COSE_ECDH_ES_HKDF_256)})
        scope = _opt(p, PIN_SCOPE_KEY, str, TokenScope.NORMAL)
        if scope not in (TokenScope.NORMAL, TokenScope.DESTRUCTIVE):
            return CtapResponse(Status.INVALID_PARAMETER)
        if scope == TokenScope.DESTRUCTIVE and not self.config.has(C4):
            return CtapResponse(Status.INVALID_PARAMETER)
        shared = self._shared_secret(p)

        if sub is ClientPinSub.SET_PIN:
            slot = pin.pin_hash if scope == TokenScope.NORMAL else pin.destructive_pin_hash
            if slot is not None:
                return CtapResponse(Status.NOT_ALLOWED)
            new_enc, pin_auth = _need(p, 5, bytes), _need(p, 4, bytes)
            if not pinproto.verify_auth(shared, new_enc, pin_auth):
                return CtapResponse(Status.PIN_AUTH_INVALID)
            new_hash = self._decode_new_pin(shared, new_enc)
            self._store_pin(scope, new_hash)
            return CtapResponse(Status.OK)

        if sub is ClientPinSub.CHANGE_PIN:
            new_enc, pin_auth, hash_enc = _need(p, 5, bytes), _need(p, 4, bytes), _need(p, 6, bytes)
            if not pinproto.verify_auth(shared, new_enc + hash_enc, pin_auth):
                return CtapResponse(Status.PIN_AUTH_INVALID)
            err = self._check_pin_hash(shared, hash_enc, scope)
            if err:
                return CtapResponse(err)
            self._store_pin(scope, self._decode_new_pin(shared, new_enc))
            self.state.issued_token = None
            return CtapResponse(Status.OK)

        if sub is ClientPinSub.GET_PIN_TOKEN:
            err = self._check_pin_hash(shared, _need(p, 6, bytes), scope)
            if err:
                return CtapResponse(err)
            token = self.rng.randbytes(32)
            self.state.issued_token = PinUvToken(token, self._t, self.state.session, scope)
            self.audit["tokens_issued"] += 1
            return CtapResponse(Status.OK, {2: pinproto.encrypt(shared, token)})
        return CtapResponse(Status.INVALID_SUBCOMMAND)

    @staticmethod
    def _decode_new_pin(shared: bytes, new_enc: bytes) -> bytes:
        try:
            return pinproto.pin_hash(pinproto.unpad_pin(pinproto.decrypt(shared, new_enc)))
        except (ValueError, UnicodeDecodeError):
            raise _Reject(Status.PIN_POLICY_VIOLATION) from None

    def _store_pin(self, scope: str, pin_hash: bytes):
        pin = self.state.pin
        if scope == TokenScope.NORMAL:
            pin.pin_hash = pin_hash
        else:
            pin.destructive_pin_hash = pin_hash
            pin.destructive_retries_remaining = MAX_PIN_RETRIES

    # -- credentials -------------------------------------------------------

    def _fresh_cred_id(self, rp_id: str) -> tuple[bytes, bytes]:
        st = self.state
        while True:
            nonce = self.rng.randbytes(16)
            cred_id = pinproto.mac(st.master_key, rp_id.encode("utf-8") + nonce)
            if cred_id not in st.retired_ids and st.find(cred_id) is None:
                return cred_id, nonce

    def _new_credential(self, rp_id, user_id, user_name, policy, blob, discoverable) -> Credential:
        st = self.state
        cred_id, nonce = self._fresh_cred_id(rp_id)
        scalar = pinproto.scalar_from_seed(pinproto.mac(st.master_key, b"key" + nonce + rp_id.encode("utf-8")))
        return Credential(cred_id=cred_id, rp_id=rp_id, user_id=user_id, user_name=user_name,
                          private_key=scalar, protect_policy=policy, cred_blob=blob,
                          discoverable=discoverable, created_at=self._t, nonce=nonce)

    def _auth_data(self, rp_id: str, flags: int, counter: int, cred: Optional[Credential] = None,
                   extensions: Optional[dict] = None) -> bytes:
        if cred is not None:
            flags |= FLAG_AT
        if extensions:
            flags |= FLAG_ED
        out = rp_id_hash(rp_id) + bytes([flags]) + struct.pack(">I", counter)
        if cred is not None:
            out += self.config.aaguid + struct.pack(">H", len(cred.cred_id)) + cred.cred_id
            out += cbor.encode(cred.cose_key())
        if extensions:
            out += cbor.encode(extensions)
        return out

    def make_credential(self, req: CtapRequest, ctx: TransportContext) -> CtapResponse:
        st, p = self.state, req.params
        cdh = _need(p, 1, bytes)
        rp = _need(p, 2, dict)
        user = _need(p, 3, dict)
        algs = _need(p, 4, list)
        rp_id = _need(rp, "id", str)
        user_id = _need(user, "id", bytes)
        user_name = _opt(user, "name", str, "")
        if not any(isinstance(a, dict) and a.get("alg") == pinproto.COSE_ES256 for a in algs):
            return CtapResponse(Status.UNSUPPORTED_ALGORITHM)
        options = _opt(p, 7, dict, {})
        rk = _opt(options, "rk", bool, False)
        if _opt(options, "up", bool, True) is False:
            return CtapResponse(Status.INVALID_OPTION)
        ext = _opt(p, 6, dict, {})
        try:
            policy = CredProtect(_opt(ext, "credProtect", int, CredProtect.UV_OPTIONAL))
        except ValueError:
            return CtapResponse(Status.INVALID_PARAMETER)
        blob = _opt(ext, "credBlob", bytes)

        err, _tok = self._verify_token(p.get(8), p.get(9), cdh)
        if err:
            return CtapResponse(err)
        for desc in _opt(p, 5, list, []):
            if isinstance(desc, dict) and isinstance(desc.get("id"), bytes):
                hit = st.find(desc["id"])
                if hit is not None and hit.rp_id == rp_id:
                    return CtapResponse(Status.CREDENTIAL_EXCLUDED)
        replacing = None
        if rk:
            replacing = next((c for c in st.discoverable()
                              if c.rp_id == rp_id and c.user_id == user_id), None)
            if replacing is None and len(st.discoverable()) >= self.config.max_discoverable:
                return CtapResponse(Status.KEY_STORE_FULL)
        denied = self._up_or_deny(ctx, req)
        if denied:
            return denied

        cred = self._new_credential(rp_id, user_id, user_name, policy, blob, rk)
        if replacing is not None:
            st.credentials.remove(replacing)
        st.credentials.append(cred)
        ext_out = {}
        if "credProtect" in ext:
            ext_out["credProtect"] = int(policy)
        if blob is not None:
            ext_out["credBlob"] = True
        auth_data = self._auth_data(rp_id, FLAG_UP | (FLAG_UV if _tok else 0), cred.sign_count, cred, ext_out)
        sig = pinproto.sign(cred.private_key, auth_data + cdh)
        return CtapResponse(Status.OK, {1: "packed", 2: auth_data, 3: {"alg": pinproto.COSE_ES256, "sig": sig}})

    @staticmethod
    def _visible(cred: Credential, uv: bool, allow_listed: bool) -> bool:
        if cred.protect_policy is CredProtect.UV_REQUIRED:
            return uv
        if cred.protect_policy is CredProtect.UV_OPTIONAL_WITH_CRED_ID_LIST:
            return uv or allow_listed
        return True

    def get_assertion(self, req: CtapRequest, ctx: TransportContext) -> CtapResponse:
        st, p = self.state, req.params
        rp_id = _need(p, 1, str)
        cdh = _need(p, 2, bytes)
        allow = _opt(p, 3, list)
        ext = _opt(p, 4, dict, {})
        options = _opt(p, 5, dict, {})
        up = _opt(options, "up", bool, True)
        if ctx.transport == "nfc" and self.config.has(C3):
            up = True
        uv = False
        if p.get(6) is not None:
            err, _tok = self._verify_token(p.get(6), p.get(7), cdh)
            if err:
                return CtapResponse(err)
            uv = True

        if allow:
            wanted = [d.get("id") for d in allow if isinstance(d, dict)]
            creds = [c for c in st.credentials if c.rp_id == rp_id and c.cred_id in wanted]
        else:
            creds = [c for c in st.discoverable() if c.rp_id == rp_id]
            creds.sort(key=lambda c: -c.created_at)
        creds = [c for c in creds if self._visible(c, uv, bool(allow))]
        if not creds:
            return CtapResponse(Status.NO_CREDENTIALS)
        if up:
            denied = self._up_or_deny(ctx, req)
            if denied:
                return denied
        flags = (FLAG_UP if up else 0) | (FLAG_UV if uv else 0)
        count = len(creds) if (len(creds) > 1 and not allow) else None
        if count:
            st.assertion_cursor = EnumCursor("assertions", [c.cred_id for c in creds], 1,
                                             {"cdh": cdh, "flags": flags, "ext": ext})
        return self._assertion(creds[0], cdh, flags, ext, count)

    def get_next_assertion(self, req: CtapRequest, ctx: TransportContext) -> CtapResponse:
        cur = self.state.assertion_cursor
        if cur is None or cur.index >= len(cur.items):
            self.state.assertion_cursor = None
            return CtapResponse(Status.NOT_ALLOWED)
        cred = self.state.find(cur.items[cur.index])
        cur.index += 1
        if cred is None:
            return CtapResponse(Status.NOT_ALLOWED)
        return self._assertion(cred, cur.extra["cdh"], cur.extra["flags"], cur.extra["ext"], None)

    def _assertion(self, cred: Credential, cdh: bytes, flags: int, ext: dict, count) -> CtapResponse:
        cred.sign_count += 1
        ext_out = {}
        if ext.get("credBlob") is True and cred.discoverable:
            ext_out["credBlob"] = cred.cred_blob or b""
        auth_data = self._auth_data(cred.rp_id, flags, cred.sign_count, None, ext_out)
        payload = {
            1: {"id": cred.cred_id, "type": "public-key"},
            2: auth_data,
            3: pinproto.sign(cred.private_key, auth_data + cdh),
        }
        if cred.discoverable:
            payload[4] = {"id": cred.user_id, "name": cred.user_name}
        if count:
            payload[5] = count
        self.audit["assertions"] += 1
        self._count_assertion(cred)
        return CtapResponse(Status.OK, payload)

    def _count_assertion(self, cred: Credential):
        if not self.config.has(C5) or not cred.discoverable:
            return
        counters = self.state.assertion_counters
        counters[cred.cred_id] = counters.get(cred.cred_id, 0) + 1
        if counters[cred.cred_id] >= self.config.rotation_period:
            self.rotate_identifiers(cred.cred_id)

    def rotate_identifiers(self, cred_id: bytes) -> tuple[bytes, bytes]:
        st = self.state
        cred = st.find(cred_id)
        if cred is None:
            raise KeyError("no such credential")
        new_id, nonce = self._fresh_cred_id(cred.rp_id)
        new_user = self.rng.randbytes(32)
        while new_user in st.retired_ids:
            new_user = self.rng.randbytes(32)
        st.retired_ids.update({cred.cred_id, cred.user_id})
        st.assertion_counters.pop(cred.cred_id, None)
        self.rotations.append((cred.cred_id, new_id, self._t))
        cred.cred_id, cred.user_id, cred.nonce = new_id, new_user, nonce
        st.assertion_counters[new_id] = 0
        return new_id, new_user

    # -- CredentialManagement ---------------------------------------------

    def _rp_list(self) -> list[str]:
        seen = []
        for c in self.state.discoverable():
            if c.rp_id not in seen:
                seen.append(c.rp_id)
        return seen

    def _cred_entry(self, cred: Credential) -> dict:
        return {
            6: {"id": cred.user_id, "name": cred.user_name},
            7: {"id": cred.cred_id, "type": "public-key"},
            8: cred.cose_key(),
            0x0A: int(cred.protect_policy),
        }

    def credential_management(self, req: CtapRequest, ctx: TransportContext) -> CtapResponse:
        st, p, sub = self.state, req.params, req.subcommand
        sub_params = p.get(2)
        tok = None
        if sub in (CredMgmtSub.GET_CREDS_METADATA, CredMgmtSub.ENUM_RPS_BEGIN,
                   CredMgmtSub.ENUM_CREDS_BEGIN, CredMgmtSub.DELETE_CREDENTIAL):
            msg = bytes([sub]) + (cbor.encode(sub_params) if sub_params is not None else b"")
            err, tok = self._verify_token(p.get(4), p.get(3), msg)
            if err:
                return CtapResponse(err)

        if sub is CredMgmtSub.GET_CREDS_METADATA:
            n = len(st.discoverable())
            return CtapResponse(Status.OK, {1: n, 2: self.config.max_discoverable - n})

        if sub is CredMgmtSub.ENUM_RPS_BEGIN:
            rps = self._rp_list()
            if not rps:
                return CtapResponse(Status.NO_CREDENTIALS)
            st.cm_enum_cursor = EnumCursor("rps", rps, 1)
            return CtapResponse(Status.OK, {3: {"id": rps[0]}, 4: rp_id_hash(rps[0]), 5: len(rps)})

        if sub is CredMgmtSub.ENUM_RPS_GET_NEXT_RP:
            cur = st.cm_enum_cursor
            if cur is None and self.config.cve_2024_35311:
                # the bug: no Begin, no token, the cursor just starts past the first rp
                cur = st.cm_enum_cursor = EnumCursor("rps", self._rp_list(), 1)
            if cur is None or cur.kind != "rps" or cur.index >= len(cur.items):
                st.cm_enum_cursor = None
                return CtapResponse(Status.NOT_ALLOWED)
            rp = cur.items[cur.index]
            cur.index += 1
            return CtapResponse(Status.OK, {3: {"id": rp}, 4: rp_id_hash(rp)})

        if sub is CredMgmtSub.ENUM_CREDS_BEGIN:
            wanted = _need(sub_params, 1, bytes)
            creds = [c for c in st.discoverable() if rp_id_hash(c.rp_id) == wanted]
            if not creds:
                return CtapResponse(Status.NO_CREDENTIALS)
            st.cm_enum_cursor = EnumCursor("creds", [c.cred_id for c in creds], 1)
            entry = self._cred_entry(creds[0])
            entry[9] = len(creds)
            return CtapResponse(Status.OK, entry)

        if sub is CredMgmtSub.ENUM_CREDS_GET_NEXT:
            cur = st.cm_enum_cursor
            if cur is None or cur.kind != "creds" or cur.index >= len(cur.items):
                st.cm_enum_cursor = None
                return CtapResponse(Status.NOT_ALLOWED)
            cred = st.find(cur.items[cur.index])
            cur.index += 1
            if cred is None:
                return CtapResponse(Status.NOT_ALLOWED)
            return CtapResponse(Status.OK, self._cred_entry(cred))

        if sub is CredMgmtSub.DELETE_CREDENTIAL:
            desc = _need(sub_params, 2, dict)
            cred = st.find(_need(desc, "id", bytes))
            if cred is None or not cred.discoverable:
                return CtapResponse(Status.INVALID_PARAMETER)
            if self.config.has(C4) and tok.scope != TokenScope.DESTRUCTIVE:
                return self._deny(C4, req, Status.UNAUTHORIZED_PERMISSION)
            if self.config.has(C7):
                denied = self._up_or_deny(ctx, req, cm=C7)
                if denied:
                    return denied
            st.credentials.remove(cred)
            st.assertion_counters.pop(cred.cred_id, None)
            self.audit["deleted"] += 1
            return CtapResponse(Status.OK)
        return CtapResponse(Status.INVALID_SUBCOMMAND)

    # -- Reset / Selection -------------------------------------------------

    def reset(self, req: CtapRequest, ctx: TransportContext) -> CtapResponse:
        st = self.state
        if ctx.transport != "nfc" and self._t - st.powered_on_at > RESET_WINDOW_MS:
            return CtapResponse(Status.NOT_ALLOWED)
        tok = self.valid_token()
        if self.config.has(C4):
            if tok is None:
                return self._deny(C4, req, Status.PIN_REQUIRED)
            if tok.scope != TokenScope.DESTRUCTIVE:
                return self._deny(C4, req, Status.UNAUTHORIZED_PERMISSION)
        elif self.config.has(C6) and tok is None:
            return self._deny(C6, req, Status.PIN_REQUIRED)
        denied = self._up_or_deny(ctx, req)
        if denied:
            return denied
        self._wait(RESET_PROCESSING_MS, "processing")
        self.wipe()
        return CtapResponse(Status.OK)

    def wipe(self):
        st = self.state
        st.master_key = self.rng.randbytes(32)
        st.credentials = []
        st.pin = PinState()
        st.issued_token = None
        st.cm_enum_cursor = None
        st.assertion_cursor = None
        st.assertion_counters = {}
        st.retired_ids = set()
        self._regenerate_key_agreement()
        self.audit["resets"] += 1

    def selection(self, req: CtapRequest, ctx: TransportContext) -> CtapResponse:
        st = self.state
        if not self.config.supports_selection:
            return CtapResponse(Status.INVALID_COMMAND)
        if self.config.has(C8):
            recent = [t for t in st.selection_call_log if self._t - t < SELECTION_WINDOW_MS]
            st.selection_call_log = recent
            if len(recent) >= SELECTION_MAX_CALLS:
                return self._deny(C8, req, Status.RATE_LIMITED)
            recent.append(self._t)
        denied = self._up_or_deny(ctx, req, Status.USER_ACTION_TIMEOUT)
        return denied or CtapResponse(Status.OK)
