import pytest

from ctaplab.attacks import matrix as mx
from ctaplab.attacks.mapping import MAPPING, expected_outcome, pair_transport
from ctaplab.attacks.model import Constraint, Fingerprint, match_fingerprints
from ctaplab.attacks.oracle import brute_force, disagreements
from ctaplab.attacks.runners import (
    _pair,
    build_world,
    run_ac,
    run_ac1,
    run_ac2,
    run_ac4,
    run_ac6,
    run_attack,
    run_ci1,
    run_ci2,
    run_ci3,
    run_ci4,
    run_cve_rp_leak,
)
from ctaplab.authenticator import profile_config
from ctaplab.codec.constants import ROW_ORDER, TABLE_ORDER

from oracles import APIS, COLUMNS, confusion_cell

DISC = ["github-like", "adobe-like", "nvidia-like", "synology-like", "vaultvision-like", "hancock-like"]

# -- impersonation ----------------------------------------------------------------------


def test_ci1_nfc_wipes_everything_with_no_one_around():
    w = build_world("solo2-like", "nfc", seed=1)
    assert w.auth.state.credentials
    rep = run_ci1(w)
    assert rep.success and rep.stealthy
    assert rep.up_grants_consumed == 0 and not rep.uv_consumed
    assert w.auth.state.credentials == []


def test_ci1_nfc_blocked_by_c3():
    w = build_world("solo2-like", "nfc", countermeasures={"C3"}, seed=1)
    rep = run_ci1(w)
    assert not rep.success and rep.blocked_by == "C3" and rep.outcome == "blocked"
    assert w.auth.state.credentials


def test_ci1_usb_too_late_after_power_on():
    w = build_world("solo2-like", "usb", seed=1)
    rep = run_ci1(w, delay_ms=15_000)
    assert not rep.success and rep.detail["status"] == "NOT_ALLOWED"


def test_ci2_tracks_weak_passkeys():
    w = build_world("solo2-like", "nfc", templates=["microsoft-like", "apple-like"], seed=2)
    rep = run_ci2(w)
    assert rep.success and len(rep.leaked) == 2
    assert rep.up_grants_consumed == 0 and not rep.uv_consumed
    assert rep.detail["fingerprints_match"]


def test_ci2_finds_nothing_behind_uv_required():
    w = build_world("solo2-like", "nfc", templates=["github-like", "adobe-like"], seed=2)
    rep = run_ci2(w)
    assert not rep.success and len(rep.leaked) == 0


def test_ci3_soft_then_hard():
    w = build_world("solo2-like", "nfc", seed=3)
    rep = run_ci3(w, target="soft")
    assert rep.success and rep.detail["soft_locked"] and not rep.detail["hard_locked"]
    w = build_world("solo2-like", "nfc", seed=3)
    rep = run_ci3(w)
    assert rep.success and rep.detail["hard_locked"]
    assert set(rep.detail["assertion_after"].values()) == {"PIN_BLOCKED"}


def test_ci3_victim_recovers_only_by_reset():
    w = build_world("solo2-like", "usb", seed=3)
    run_ci3(w)
    w.replug()
    assert w.session.reset_flow().ok
    assert w.auth.state.credentials == []
    w.session.set_pin_flow()
    assert w.session.verify_pin_flow()


def test_ci4_profiles_the_key():
    w = build_world("yubikey5-like", "nfc", seed=4)
    first = run_ci4(w)
    assert first.leaked["max_creds"] == 25
    assert first.leaked["profile_guess"] == "yubikey5-like"
    assert first.leaked["options"]["clientPin"] is True
    assert run_ci4(w).leaked == first.leaked


@pytest.mark.parametrize("n", range(1, 7))
def test_cve_leaks_all_but_one(n):
    on = run_cve_rp_leak(build_world("yubikey5-like", "nfc", templates=DISC[:n], cve=True, seed=5))
    assert len(on.leaked) == n - 1
    assert on.up_grants_consumed == 0 and not on.uv_consumed
    off = run_cve_rp_leak(build_world("yubikey5-like", "nfc", templates=DISC[:n], cve=False, seed=5))
    assert off.leaked == [] and not off.success


# -- confusion matrix ----------------------------------------------------------------------


def test_matrix_examples():
    m = mx.enumerate_confusions()
    assert m["MC"]["MC"].constraint is Constraint.INFEASIBLE
    assert m["GI"]["Re"].constraint is Constraint.PROXIMITY_ONLY
    assert m["Re"]["GA"].constraint is Constraint.WEAK_CREDPROTECT_ONLY
    assert all(not m[a][a].feasible for a in ROW_ORDER)


@pytest.mark.parametrize("nfc", [True, False])
def test_matrix_matches_requirement_oracle(nfc):
    m = mx.enumerate_confusions(nfc=nfc)
    for a in APIS:
        for b in COLUMNS:
            for weak in (False, True):
                assert m[a][b].feasible_in(nfc, weak) == confusion_cell(a, b, nfc, weak), (a, b, weak)


def test_no_nfc_only_removes_proximity_cells():
    with_nfc, without = mx.enumerate_confusions(nfc=True), mx.enumerate_confusions(nfc=False)
    for a in ROW_ORDER:
        for b in TABLE_ORDER:
            if with_nfc[a][b].constraint is Constraint.PROXIMITY_ONLY:
                assert not without[a][b].feasible
            else:
                assert without[a][b].constraint is with_nfc[a][b].constraint
    assert sum(mx.column_totals(without)) < sum(mx.column_totals(with_nfc))


def test_config_narrows_matrix():
    usb_only = mx.enumerate_confusions(profile_config("opensk-like"))
    assert not any(usb_only[a][b].constraint is Constraint.PROXIMITY_ONLY for a in ROW_ORDER for b in TABLE_ORDER)
    no_sel = mx.enumerate_confusions(profile_config("yubikey5-like"))
    assert not any(no_sel["Se"][b].feasible or no_sel[b]["Se"].feasible for b in TABLE_ORDER)


def test_only_gi_to_mc_differs_from_published():
    meta = mx.metadata(mx.enumerate_confusions())
    assert meta["disagreements_with_published"] == ["GI->MC"]
    assert meta["published_checkmarks"] == 37 and meta["computed_feasible"] == 36


def test_stealthiness_over_all_cells():
    results = brute_force(seed=9)
    assert len(results) == 49 * 4
    assert disagreements(results) == []
    for r in results:
        if r.predicted:
            assert r.stealthy and r.executed
        elif r.api_a != r.api_b:
            assert not (r.executed and r.stealthy)


# -- confusion attacks ----------------------------------------------------------------------


def test_ac1_empties_store_while_login_succeeds():
    w = build_world("solo2-like", "usb", seed=6)
    rep = run_ac1(w)
    assert rep.success and rep.stealthy and rep.pair == "GA->CM"
    assert w.auth.state.discoverable() == []
    assert "flow_error" not in rep.detail


def test_ac1_with_c7_deletes_at_most_one():
    w = build_world("solo2-like", "usb", countermeasures={"C7"}, seed=6)
    rep = run_ac1(w)
    assert not rep.success and rep.detail["deleted"] <= 1
    assert rep.blocked_by == "C7"


def test_ac2_spends_the_selection_touch_on_reset():
    w = build_world("solo2-like", "usb", seed=7)
    rep = run_ac2(w)
    assert rep.pair == "Se->Re" and rep.success and rep.stealthy
    assert rep.up_grants_consumed == 1 and rep.detail["wiped"]


def test_ac4_fills_small_store_over_nfc():
    w = build_world("yubikey5-like", "nfc", seed=8)
    assert len(w.auth.state.discoverable()) == 3
    rep = run_ac4(w)
    assert rep.success and rep.detail["injected"] == 22
    assert rep.detail["honest_register"] == "KEY_STORE_FULL"


def test_ac4_one_credential_per_usb_login():
    w = build_world("yubikey5-like", "usb", seed=8)
    rep = run_ac4(w, max_flows=1)
    assert rep.detail["injected"] == 1 and not rep.success


def test_ac6_keeps_the_key_busy():
    rep = run_ac6(build_world("solo2-like", "usb", seed=10), duration_ms=300_000)
    assert rep.success and rep.detail["honest_completed_at_ms"] is None


def test_ac6_rate_limited_by_c8():
    rep = run_ac6(build_world("solo2-like", "usb", countermeasures={"C8"}, seed=10))
    assert not rep.success and rep.blocked_by == "C8"
    assert rep.detail["statuses"].get("RATE_LIMITED", 0) >= 1
    assert rep.detail["honest_completed_at_ms"] is not None


def test_ac6_needs_selection():
    rep = run_ac6(build_world("yubikey5-like", "usb", seed=10))
    assert rep.outcome == "not_supported"


def test_identity_pair_is_not_an_attack():
    w = build_world("solo2-like", "usb", seed=1)
    rep = run_ac(_pair("GA", "GA"), w)
    assert rep.outcome == "not_applicable" and not rep.success


# -- fingerprints and mapping ----------------------------------------------------------------------


def test_fingerprints_across_rotation_and_devices():
    rotated = run_ci2(build_world("solo2-like", "nfc", countermeasures={"C5"},
                                  templates=["microsoft-like"], seed=11))
    assert not rotated.detail["fingerprints_match"] and rotated.blocked_by == "C5"
    a = run_ci2(build_world("solo2-like", "nfc", templates=["microsoft-like"], seed=11)).leaked
    b = run_ci2(build_world("solo2-like", "nfc", templates=["microsoft-like"], seed=12)).leaked
    assert match_fingerprints(a, a) and not match_fingerprints(a, b)
    assert not match_fingerprints(Fingerprint(), Fingerprint())


@pytest.mark.parametrize("attack", sorted(MAPPING))
def test_attacks_work_with_nothing_switched_on(attack):
    profile = "solo2-like"
    cfg = profile_config(profile)
    transports = {pair_transport(attack, cm, cfg) for cm in MAPPING[attack] if cm not in ("C1",)}
    for transport in sorted(transports):
        rep = run_attack(attack, profile, transport, seed=13)
        assert rep.success and rep.outcome == "success", (attack, transport, rep.detail)


def test_expected_outcomes():
    assert expected_outcome("CI1", "C2") == "degraded"
    assert expected_outcome("AC5", "C4") == "degraded"
    assert expected_outcome("AC1", "C4") == "blocked"
    assert all(expected_outcome(a, "C1") == "blocked" for a in MAPPING)
