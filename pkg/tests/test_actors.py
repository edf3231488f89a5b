import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctaplab.actors import CtapError, FlowDeclined, UserModel, World, builtin_templates, template
from ctaplab.actors import client as cl
from ctaplab.actors.user import FLOW_INFO, FLOW_LOGIN, FLOW_REGISTER, FLOW_RESET
from ctaplab.attacks.runners import build_world, run_ci1
from ctaplab.authenticator import profile_config
from ctaplab.authenticator.state import CredProtect
from ctaplab.codec import Status

NAMES = [t.name for t in builtin_templates()]


def desk(profile="solo2-like", transport="usb", seed=0):
    w = World.build(profile_config(profile), transport, seed=seed)
    w.session.set_pin_flow()
    return w


# -- honest sessions ----------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.lists(st.sampled_from(NAMES), min_size=1, max_size=10, unique=True),
       st.sampled_from([("solo2-like", "usb"), ("solo2-like", "nfc"), ("yubikey5-like", "nfc"),
                        ("opensk-like", "usb")]),
       st.integers(0, 1000))
def test_honest_sessions_never_alarm(names, where, seed):
    profile, transport = where
    w = World.build(profile_config(profile), transport, seed=seed)
    w.setup([template(n) for n in names])
    for n in names:
        rec = w.session.authenticate_flow(w.rp(template(n)))
        assert rec.ok, (n, rec.reason)
    w.session.info_flow()
    w.session.verify_pin_flow()
    if w.auth.config.supports_selection:
        assert w.session.selection_flow().ok
    assert w.user.alarm_log == []
    assert w.user.max_up_in_flow <= 1


def test_policy_inheritance_across_all_templates():
    w = desk()
    for t in builtin_templates():
        rec = w.session.register_flow(w.rp(t))
        assert rec.ok and rec.protect_policy is t.protect_policy
    for c in w.auth.state.credentials:
        t = next(t for t in builtin_templates() if t.rp_id == c.rp_id)
        assert c.protect_policy is t.protect_policy
        assert c.discoverable == t.discoverable
        if t.credential_kind.label == "DiscWeak":
            assert c.protect_policy is CredProtect.UV_OPTIONAL


# -- PIN ceremony ----------------------------------------------------------------------

def test_ceremony_token_authorizes_registration():
    w = desk()
    with w.user.flow(FLOW_REGISTER):
        tok = w.session.pin_ceremony()
        req = cl.make_credential(b"\x00" * 32, "t.example", b"u", "u", rk=True, token=tok)
        assert w.session.call(req).ok


def test_ceremony_inside_info_flow_alarms():
    w = desk()
    with w.user.flow(FLOW_INFO):
        with pytest.raises(FlowDeclined):
            w.session.pin_ceremony()
    assert [a.kind for a in w.user.alarm_log] == ["uv"]


def test_one_mistyped_pin():
    w = desk()
    with pytest.raises(CtapError) as err:
        w.session.pin_ceremony(pin="9999")
    assert err.value.status is Status.PIN_INVALID
    assert w.session.retries() == 7


# -- registration and login ----------------------------------------------------------------------

def test_weak_template_registers_uv_optional_passkey():
    w = desk()
    rec = w.session.register_flow(w.rp(template("microsoft-like")))
    assert rec.discoverable and rec.protect_policy is CredProtect.UV_OPTIONAL


def test_non_discoverable_leaves_store_alone():
    w = desk()
    before = len(w.auth.state.discoverable())
    assert w.session.register_flow(w.rp(template("facebook-like"))).ok
    assert len(w.auth.state.discoverable()) == before


def test_twenty_sixth_registration_fails_on_small_store():
    w = desk("yubikey5-like")
    rp = w.rp(template("github-like"))
    for i in range(25):
        w.session.register_flow(rp, f"acct{i}")
    with pytest.raises(CtapError) as err:
        w.session.register_flow(rp, "acct25")
    assert err.value.status is Status.KEY_STORE_FULL


def test_login_after_registration_verifies():
    w = desk()
    rp = w.rp(template("github-like"))
    w.session.register_flow(rp)
    rec = w.session.authenticate_flow(rp)
    assert rec.ok and rec.uv and rec.account == "alice"


@pytest.mark.parametrize("name", ["microsoft-like", "facebook-like"])
def test_login_after_factory_reset_finds_nothing(name):
    w = build_world("solo2-like", "nfc", templates=[name], seed=4)
    assert run_ci1(w).success
    w.replug()
    with pytest.raises(CtapError) as err:
        w.session.authenticate_flow(w.rp(template(name)))
    assert err.value.status is Status.NO_CREDENTIALS


def test_weak_login_skips_the_pin():
    w = desk()
    rp = w.rp(template("apple-like"))
    w.session.register_flow(rp)
    uv_before = w.user.uv_grants_total
    rec = w.session.authenticate_flow(rp)
    assert rec.ok and not rec.uv
    assert w.user.uv_grants_total == uv_before


# -- user_grant ----------------------------------------------------------------------

def test_second_touch_in_a_login_alarms():
    u = UserModel()
    with u.flow(FLOW_LOGIN):
        assert u.user_grant("up") is True
        assert u.user_grant("up") is False
    assert [a.kind for a in u.alarm_log] == ["up"]


def test_pin_during_reset_alarms():
    u = UserModel()
    with u.flow(FLOW_RESET):
        assert u.user_grant("uv") is False
    assert u.alarm_log and u.alarm_log[0].kind == "uv"


def test_absent_user_grants_nothing_silently():
    u = UserModel(present=False)
    with u.flow(FLOW_LOGIN):
        assert u.user_grant("up") is False
        assert u.user_grant("uv") is False
    assert u.alarm_log == []


@settings(max_examples=50)
@given(st.lists(st.sampled_from(["up", "uv"]), max_size=8))
def test_grants_never_exceed_the_flow(requests):
    u = UserModel()
    with u.flow(FLOW_REGISTER):
        granted = [k for k in requests if u.user_grant(k)]
    assert granted.count("up") <= FLOW_REGISTER.max_up_grants
    assert granted.count("uv") <= 1
