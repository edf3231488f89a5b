import pytest
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec
from hypothesis import given, settings
from hypothesis import strategies as st

from ctaplab.actors import client as cl
from ctaplab.actors.session import enumerate_credentials
from ctaplab.authenticator import RESET_WINDOW_MS, UP_TIMEOUT_MS, Authenticator, SnapshotError, profile_config
from ctaplab.authenticator import TransportContext, pinproto, snapshot
from ctaplab.authenticator.state import CredProtect, TokenScope
from ctaplab.codec import Command, CredMgmtSub, Status
from ctaplab.codec.authdata import parse_auth_data

from helpers import PIN, PLATFORM_COSE, PLATFORM_SCALAR, Desk, never, strict, weak
from oracles import PinModel, aes_cbc_decrypt_zero_iv, ecdh_shared


def ready(profile="solo2-like", **kw):
    d = Desk(profile, **kw)
    assert d.set_pin() is Status.OK
    return d


def ids(resp):
    return resp.payload[1]["id"], resp.payload.get(4, {}).get("id")


# -- GetInfo ----------------------------------------------------------------------

def test_fresh_yubikey_like_info():
    info = Desk("yubikey5-like").info()
    assert info[0x04]["clientPin"] is False
    assert info[0x60] == 25
    assert "FIDO_2_1" in info[0x01]


def test_info_reflects_pin():
    d = ready()
    assert d.info()[0x04]["clientPin"] is True


def test_info_answers_while_soft_locked():
    d = ready()
    for _ in range(3):
        d.try_pin("0000")
    assert d.auth.state.pin.soft_locked
    assert d.send(cl.simple(Command.GET_INFO)).status is Status.OK


# -- ClientPin ----------------------------------------------------------------------

def test_third_wrong_guess_soft_locks():
    d = ready()
    got = [d.try_pin("0000")[0] for _ in range(3)]
    assert got == [Status.PIN_INVALID, Status.PIN_INVALID, Status.PIN_AUTH_BLOCKED]
    assert d.auth.state.pin.soft_locked
    assert d.try_pin()[0] is Status.PIN_AUTH_BLOCKED


def test_reboot_clears_soft_lock_and_eight_failures_hard_lock():
    d = ready()
    statuses = []
    for i in range(8):
        if i and i % 2 == 0:
            d.replug()
        statuses.append(d.try_pin("0000")[0])
    assert statuses[-1] is Status.PIN_BLOCKED
    assert Status.PIN_AUTH_BLOCKED not in statuses
    d.replug()
    assert d.try_pin()[0] is Status.PIN_BLOCKED
    assert d.auth.state.pin.hard_locked


def test_one_wrong_pin_costs_one_retry():
    d = ready()
    assert d.send(cl.get_retries()).payload[3] == 8
    assert d.try_pin("9999")[0] is Status.PIN_INVALID
    assert d.send(cl.get_retries()).payload[3] == 7


def test_token_decrypts_under_independent_ecdh():
    d = ready()
    ka = d.send(cl.key_agreement()).payload[1]
    peer = (int.from_bytes(ka[-2], "big"), int.from_bytes(ka[-3], "big"))
    shared = ecdh_shared(int.from_bytes(PLATFORM_SCALAR, "big"), peer)
    resp = d.send(cl.get_pin_token(PLATFORM_COSE, shared, PIN))
    assert resp.status is Status.OK
    token = aes_cbc_decrypt_zero_iv(shared, resp.payload[2])
    assert len(token) == 32
    # the token works: a MakeCredential authorized with it goes through
    req = cl.make_credential(b"\x01" * 32, "a.example", b"u" * 8, "u", rk=True, token=token)
    assert d.send(req).status is Status.OK
    assert pinproto.decrypt(shared, resp.payload[2]) == token


@settings(max_examples=150, deadline=None)
@given(st.lists(st.sampled_from("WRP"), max_size=30))
def test_lockout_follows_model_and_retries_never_grow(moves):
    d = ready()
    model = PinModel()
    last = d.auth.state.pin.total_retries_remaining
    for m in moves:
        model, want = model.step(m)
        if m == "P":
            d.replug()
        else:
            got, _ = d.try_pin(PIN if m == "R" else "0000")
            assert got.name == want
        pin = d.auth.state.pin
        assert pin.total_retries_remaining == model.retries
        assert (pin.soft_locked, pin.hard_locked) == (model.soft, model.hard)
        assert pin.total_retries_remaining <= last
        last = pin.total_retries_remaining


def test_hard_lock_blocks_everything_but_info_and_reset():
    d = ready()
    d.register()
    for i in range(8):
        if i % 2 == 0:
            d.replug()
        d.try_pin("0000")
    assert d.auth.state.pin.hard_locked
    reqs = [cl.key_agreement(), cl.get_retries(),
            cl.make_credential(b"\x00" * 32, "x.example", b"u", "u", rk=True),
            cl.get_assertion("example.com", b"\x00" * 32, False),
            cl.cred_mgmt(CredMgmtSub.ENUM_RPS_GET_NEXT_RP), cl.simple(Command.SELECTION)]
    for r in reqs:
        assert d.send(r).status is Status.PIN_BLOCKED, r.name()
    assert d.send(cl.simple(Command.GET_INFO)).status is Status.OK
    d.replug()
    assert d.send(cl.simple(Command.RESET)).status is Status.OK


def test_untrusted_client_refused_with_c1():
    d = Desk(countermeasures={"C1"})
    req = cl.make_credential(b"\x00" * 32, "x.example", b"u", "u", rk=True)
    assert d.send(req, client_id="evil").status is Status.CLIENT_NOT_TRUSTED
    assert d.auth.denials[-1].countermeasure == "C1"


# -- MakeCredential ----------------------------------------------------------------------

def test_store_full_at_profile_capacity():
    d = ready("yubikey5-like")
    tok = d.token()
    for i in range(25):
        assert d.register(f"rp{i}.example", token=tok).status is Status.OK
    assert d.register("one-more.example", token=tok).status is Status.KEY_STORE_FULL
    assert len(d.auth.state.discoverable()) == 25


def test_registration_adds_one_credential():
    d = ready()
    before = len(d.auth.state.discoverable())
    assert d.register().status is Status.OK
    assert len(d.auth.state.discoverable()) == before + 1


def test_declined_touch_on_usb():
    d = ready()
    tok = d.token()
    assert d.register(token=tok, grant=never).status is Status.UP_REQUIRED


def test_attestation_signature_checks_out():
    d = ready()
    resp = d.register("sig.example")
    ad = parse_auth_data(resp.payload[2])
    assert ad.up and ad.uv
    cose = ad.public_key
    pub = ec.EllipticCurvePublicNumbers(int.from_bytes(cose[-2], "big"), int.from_bytes(cose[-3], "big"),
                                        ec.SECP256R1()).public_key()
    pub.verify(resp.payload[3]["sig"], resp.payload[2] + b"\x11" * 32, ec.ECDSA(hashes.SHA256()))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), max_size=12))
def test_store_never_exceeds_capacity(regs):
    d = ready(max_discoverable=3)
    tok = d.token()
    for rp, rk in regs:
        d.register(f"rp{rp}.example", rk=rk, token=tok)
        assert len(d.auth.state.discoverable()) <= 3


# -- GetAssertion ----------------------------------------------------------------------

def test_weak_credentials_leak_without_any_interaction():
    d = ready()
    weak(d)
    before = d.auth.audit["up_granted"]
    resp = d.assertion("weak.example", up=False)
    assert resp.status is Status.OK
    cred_id, user_id = ids(resp)
    assert cred_id and user_id
    assert d.auth.audit["up_granted"] == before
    assert not parse_auth_data(resp.payload[2]).up


def test_uv_required_hidden_without_token():
    d = ready()
    strict(d)
    assert d.assertion("strict.example", up=False).status is Status.NO_CREDENTIALS


def test_unknown_rp_has_no_credentials():
    d = ready()
    assert d.assertion("nobody.example").status is Status.NO_CREDENTIALS


POLICIES = [CredProtect.UV_OPTIONAL, CredProtect.UV_OPTIONAL_WITH_CRED_ID_LIST, CredProtect.UV_REQUIRED]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from(POLICIES), min_size=1, max_size=5), st.booleans())
def test_uv_required_never_released_without_token(policies, with_allow_list):
    d = ready()
    tok = d.token()
    made = []
    for p in policies:
        resp = d.register("gate.example", protect=p, token=tok)
        made.append((parse_auth_data(resp.payload[2]).cred_id, p))
    d.replug()  # no token in this session
    allow = [c for c, _ in made] if with_allow_list else None
    seen = []
    resp = d.assertion("gate.example", up=False, allow=allow)
    if resp.ok:
        seen.append(resp.payload[1]["id"])
        for _ in range(resp.payload.get(5, 1) - 1):
            nxt = d.send(cl.get_next_assertion())
            seen.append(nxt.payload[1]["id"])
    strict_ids = {c for c, p in made if p is CredProtect.UV_REQUIRED}
    assert not strict_ids & set(seen)
    if with_allow_list:
        # one assertion per allow-listed call, from the non-strict ones
        assert resp.ok == bool(set(c for c, _ in made) - strict_ids)
    else:
        assert set(seen) == {c for c, p in made if p is CredProtect.UV_OPTIONAL}


# -- CredentialManagement ----------------------------------------------------------------------

def test_delete_everything_with_zero_touches():
    d = ready()
    for i in range(4):
        d.register(f"rp{i}.example")
    d.replug()
    tok = d.token()
    grants = d.auth.audit["up_granted"]
    listing = enumerate_credentials(d.send, tok)
    for entries in listing.values():
        for e in entries:
            assert d.send(cl.delete_credential(e[7]["id"], tok)).status is Status.OK
    assert d.auth.state.discoverable() == []
    assert d.auth.audit["up_granted"] == grants


@pytest.mark.parametrize("n", [1, 3, 5])
def test_get_next_rp_bug_toggle(n):
    for bug in (True, False):
        d = ready(cve_2024_35311=bug)
        tok = d.token()
        for i in range(n):
            d.register(f"rp{i}.example", token=tok)
        d.replug()
        leaked = []
        while True:
            r = d.send(cl.cred_mgmt(CredMgmtSub.ENUM_RPS_GET_NEXT_RP))
            if not r.ok:
                break
            leaked.append(r.payload[3]["id"])
        assert len(leaked) == (n - 1 if bug else 0)
        if not bug:
            assert r.status is Status.NOT_ALLOWED


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(["begin", "next", "info", "replug", "retries"]), max_size=15))
def test_get_next_rp_needs_a_begin_in_the_same_session(ops):
    d = ready()
    tok = d.token()
    for i in range(3):
        d.register(f"rp{i}.example", token=tok)
    remaining = None  # rps still to hand out, None = no cursor
    for op in ops:
        if op == "begin":
            if d.auth.valid_token() is None:
                tok = d.token()
            r = d.send(cl.cred_mgmt(CredMgmtSub.ENUM_RPS_BEGIN, None, tok))
            assert r.ok
            remaining = 2
        elif op == "next":
            r = d.send(cl.cred_mgmt(CredMgmtSub.ENUM_RPS_GET_NEXT_RP))
            assert r.ok == bool(remaining)
            remaining = remaining - 1 if remaining else None
        elif op == "replug":
            d.replug()
            remaining = None
        else:
            d.send(cl.simple(Command.GET_INFO) if op == "info" else cl.get_retries())
            remaining = None


# -- Reset ----------------------------------------------------------------------

def test_nfc_reset_needs_nobody():
    d = ready(transport="nfc", grant=never)
    d.register()
    prompts = d.auth.audit["up_prompts"]
    assert d.send(cl.simple(Command.RESET)).status is Status.OK
    assert d.auth.audit["up_prompts"] == prompts
    assert d.auth.state.credentials == []


def test_usb_reset_after_eleven_seconds_refused():
    d = ready()
    d.replug()
    d.auth.clock.advance(11_000)
    assert d.send(cl.simple(Command.RESET)).status is Status.NOT_ALLOWED


@pytest.mark.parametrize("delay,ok", [(0, True), (RESET_WINDOW_MS, True), (RESET_WINDOW_MS + 1, False)])
def test_reset_window_edges(delay, ok):
    d = ready()
    d.replug()
    d.auth.clock.advance(delay)
    want = Status.OK if ok else Status.NOT_ALLOWED
    assert d.send(cl.simple(Command.RESET)).status is want


def test_reset_wipes_credentials_and_tokens():
    d = ready()
    first = d.register("same.example", user=b"same-user")
    old_id = parse_auth_data(first.payload[2]).cred_id
    d.replug()
    old_tok = d.token()
    assert d.send(cl.simple(Command.RESET)).status is Status.OK
    assert d.auth.state.credentials == []
    r = d.send(cl.cred_mgmt(CredMgmtSub.GET_CREDS_METADATA, None, old_tok))
    assert r.status is Status.PIN_AUTH_INVALID
    d.set_pin()
    again = d.register("same.example", user=b"same-user")
    assert parse_auth_data(again.payload[2]).cred_id != old_id
    assert parse_auth_data(again.payload[2]).public_key != parse_auth_data(first.payload[2]).public_key


# -- Selection ----------------------------------------------------------------------

def test_selection_grant_and_timeout():
    d = ready()
    assert d.send(cl.simple(Command.SELECTION)).status is Status.OK
    t0 = d.auth.clock.now
    assert d.send(cl.simple(Command.SELECTION), grant=never).status is Status.USER_ACTION_TIMEOUT
    assert d.auth.clock.now - t0 == UP_TIMEOUT_MS


def test_selection_unsupported_on_yubikey_like():
    assert Desk("yubikey5-like").send(cl.simple(Command.SELECTION)).status is Status.INVALID_COMMAND


def test_selection_rate_limit():
    d = ready(countermeasures={"C8"})
    clock = d.auth.clock
    for t in (0, 5_000, 10_000):
        clock.advance_to(t)
        assert d.send(cl.simple(Command.SELECTION)).status is Status.OK
    clock.advance_to(60_000)
    assert d.send(cl.simple(Command.SELECTION)).status is Status.RATE_LIMITED
    clock.advance_to(131_000)
    assert d.send(cl.simple(Command.SELECTION)).status is Status.OK


# -- C5 rotation, C2 feedback ----------------------------------------------------------------------

def test_identifiers_rotate_every_ten_assertions():
    d = ready(countermeasures={"C5"}, rotation_period=10)
    weak(d)
    seen = [ids(d.assertion("weak.example", up=False)) for _ in range(11)]
    assert len(set(seen[:10])) == 1
    assert seen[10] != seen[0]
    assert seen[10][0] != seen[0][0] and seen[10][1] != seen[0][1]


def test_identifiers_stable_without_c5():
    d = ready()
    weak(d)
    seen = {ids(d.assertion("weak.example", up=False)) for _ in range(25)}
    assert len(seen) == 1


def test_feedback_blinks():
    d = ready(countermeasures={"C2"})
    weak(d)
    d.auth.state.feedback_log.clear()
    d.assertion("weak.example")
    d.replug()
    d.send(cl.simple(Command.RESET))
    assert [(e.api, e.blinks) for e in d.auth.state.feedback_log] == [("GA", 1), ("Re", 2)]
    quiet = ready()
    weak(quiet)
    quiet.assertion("weak.example")
    assert quiet.auth.state.feedback_log == []


# -- authorization matrix ----------------------------------------------------------------------

TABLE1 = {"MC": {"UV", "UP"}, "GA": {"UV", "UP"}, "CM": {"UV"}, "CP": set(),
          "Re": {"UP"}, "Se": {"UP"}, "GI": set()}


def expected_demands(api, cms, transport):
    need = set(TABLE1[api])
    if api == "Re" and cms & {"C4", "C6"}:
        need.add("UV")
    if api == "CM" and "C7" in cms:
        need.add("UP")
    if transport == "nfc" and "C3" not in cms:
        need.discard("UP")
    return need


def attempt(api, cms, transport, uv, up):
    d = Desk("solo2-like", transport=transport, grant=(lambda p: True) if up else never,
             countermeasures=cms)
    d.set_pin()
    destructive = "C4" in cms and api in ("Re", "CM")
    if "C4" in cms:
        d.set_pin("271828", TokenScope.DESTRUCTIVE)
    tok = d.token()
    cred = parse_auth_data(d.register("m.example", protect=CredProtect.UV_REQUIRED, token=tok,
                                      grant=lambda p: True).payload[2]).cred_id
    d.replug()
    tok = d.token("271828", TokenScope.DESTRUCTIVE) if (uv and destructive) else (d.token() if uv else None)
    req = {
        "MC": lambda: cl.make_credential(b"\x01" * 32, "n.example", b"u", "u", rk=True, token=tok),
        "GA": lambda: cl.get_assertion("m.example", b"\x02" * 32, True, tok),
        "CM": lambda: cl.delete_credential(cred, tok),
        "CP": lambda: cl.key_agreement(),
        "Re": lambda: cl.simple(Command.RESET),
        "Se": lambda: cl.simple(Command.SELECTION),
        "GI": lambda: cl.simple(Command.GET_INFO),
    }[api]()
    return d.send(req).ok


@pytest.mark.parametrize("cms", [frozenset(), frozenset({"C3"}), frozenset({"C4"}), frozenset({"C6"}),
                                 frozenset({"C7"}), frozenset({"C3", "C7"})], ids=lambda c: "+".join(sorted(c)) or "baseline")
@pytest.mark.parametrize("transport", ["usb", "nfc"])
def test_authorization_matrix(cms, transport):
    for api in TABLE1:
        assert attempt(api, cms, transport, uv=True, up=True), api
        demands = set()
        if not attempt(api, cms, transport, uv=False, up=True):
            demands.add("UV")
        if not attempt(api, cms, transport, uv=True, up=False):
            demands.add("UP")
        assert demands == expected_demands(api, cms, transport), api


# -- snapshots ----------------------------------------------------------------------

def test_snapshot_round_trip(tmp_path):
    d = ready(countermeasures={"C5"})
    weak(d)
    strict(d)
    d.try_pin("0000")
    path = tmp_path / "key.snap"
    snapshot.save(d.auth, path)
    back = snapshot.load(path)
    assert back.state == d.auth.state
    assert back.config == d.auth.config
    assert back.get_info().payload == d.auth.get_info().payload
    assert back.state.pin.total_retries_remaining == 7
    assert back.rng.getstate() == d.auth.rng.getstate()


def test_snapshot_restores_after_reset(tmp_path):
    d = ready()
    weak(d)
    path = tmp_path / "pre.snap"
    snapshot.save(d.auth, path)
    d.replug()
    d.send(cl.simple(Command.RESET))
    assert d.auth.state.credentials == []
    back = snapshot.load(path)
    assert [c.rp_id for c in back.state.credentials] == ["weak.example"]


def test_tampered_snapshot_rejected(tmp_path):
    d = ready()
    path = tmp_path / "t.snap"
    snapshot.save(d.auth, path)
    text = path.read_text()
    path.write_text(text.replace("session: 1", "session: 2", 1))
    with pytest.raises(SnapshotError, match="checksum"):
        snapshot.load(path)
    with pytest.raises(SnapshotError):
        snapshot.load(tmp_path / "missing.snap")


def test_garbage_bytes_get_status_codes():
    a = Authenticator(profile_config("solo2-like"))
    ctx = TransportContext()
    assert a.handle_bytes(b"\x55", ctx)[0] == bytes([Status.INVALID_COMMAND])
    assert a.handle_bytes(b"\x01\xff", ctx)[0] == bytes([Status.INVALID_CBOR])
