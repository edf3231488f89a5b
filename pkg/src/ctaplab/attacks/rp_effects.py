"""What each attack does to one relying party's account.

Every (template, attack) cell runs on a fresh desk where only that template's
account exists, then checks the damage from the victim's side: a login that
stops working, a fingerprint that can be re-identified, or a key that can no
longer register or sign.
"""

from __future__ import annotations

from ..actors import CtapError, FlowDeclined, RelyingPartyTemplate, builtin_templates, template
from ..codec import Status
from . import payloads as pl
from .runners import (
    FLOW_ERRORS,
    _pair,
    build_world,
    run_ac,
    run_ac1,
    run_ac2,
    run_ac3,
    run_ac4,
    run_ac5,
    run_ac6,
    run_ci1,
    run_ci2,
    run_ci3,
)

EFFECTS = {
    "delete": ("AC1", "CI1", "AC2"),
    "track": ("CI2", "AC3"),
    "dos": ("AC4", "CI3", "AC5", "AC6"),
}
EFFECT_ORDER = ("delete", "track", "dos")

# cell values
APPLICABLE = "applicable"
ZERO_UV = "zero-uv"
NEEDS_UV = "needs-uv"
NOT_APPLICABLE = "n/a"


def _login(world, rp):
    """The victim's next honest login: (ok, status name or None)."""
    world.replug()
    try:
        if not world.auth.state.pin.is_set:
            # after a wipe the victim sets their PIN again before retrying
            world.session.set_pin_flow()
        rec = world.session.authenticate_flow(rp)
    except CtapError as exc:
        return False, exc.status.name
    except FLOW_ERRORS as exc:
        return False, type(exc).__name__
    return rec.ok, rec.reason


def _desk(tmpl: RelyingPartyTemplate, profile: str, transport: str, seed, trace=None):
    world = build_world(profile, transport, seed=seed, templates=[tmpl], trace=trace)
    return world, world.rp(tmpl)


def _delete(attack, tmpl, profile, seed, trace=None):
    transport = "nfc" if attack == "CI1" else "usb"
    world, rp = _desk(tmpl, profile, transport, seed, trace)
    {"AC1": run_ac1, "CI1": run_ci1, "AC2": run_ac2}[attack](world)
    ok, status = _login(world, rp)
    return (NOT_APPLICABLE if ok else APPLICABLE), {"login_after": status or "OK"}


def _track_ci2(tmpl, profile, seed, trace=None):
    world, rp = _desk(tmpl, profile, "nfc", seed, trace)
    rep = run_ci2(world, [rp.rp_id])
    if rep.success:
        return ZERO_UV, {"leaked": rep.leaked.rp_ids}
    # an attacker who shoulder-surfed the PIN still gets the triples
    world, rp = _desk(tmpl, profile, "nfc", seed, trace)
    rep = run_ci2(world, [rp.rp_id], pin=world.user.pin)
    return (NEEDS_UV if rep.success else NOT_APPLICABLE), {"leaked": rep.leaked.rp_ids}


def _track_ac3(tmpl, profile, seed, trace=None):
    # GetInfo carries no UV, so anything harvested through it is zero-UV
    world, rp = _desk(tmpl, profile, "usb", seed, trace)
    rep = run_ac(_pair("GI", "GA"), world, pl.harvest([rp.rp_id]), attack="AC3")
    if rep.success and rep.leaked is not None and rep.leaked.triples:
        return ZERO_UV, {"leaked": rep.leaked.rp_ids, "via": "GI->GA"}
    world, rp = _desk(tmpl, profile, "usb", seed, trace)
    rep = run_ac3(world, [rp.rp_id])
    return (NEEDS_UV if rep.success else NOT_APPLICABLE), {"leaked": rep.leaked.rp_ids, "via": "MC->GA"}


def _dos(attack, tmpl, profile, seed, trace=None):
    if attack == "AC4":
        world, rp = _desk(tmpl, profile, "nfc", seed, trace)
        rep = run_ac4(world)
        # a full store only hurts accounts that need a slot on the key
        world.replug()
        try:
            world.session.register_flow(rp, "bob")
            status = "OK"
        except CtapError as exc:
            status = exc.status.name
        except FlowDeclined as exc:
            status = type(exc).__name__
        hit = rep.success and status == Status.KEY_STORE_FULL.name
        return (APPLICABLE if hit else NOT_APPLICABLE), {"register_after": status}
    if attack == "AC6":
        world, rp = _desk(tmpl, profile, "usb", seed, trace)
        rep = run_ac6(world)
        return (APPLICABLE if rep.success else NOT_APPLICABLE), {
            "honest_completed_at_ms": rep.detail.get("honest_completed_at_ms")}
    transport = "nfc" if attack == "CI3" else "usb"
    world, rp = _desk(tmpl, profile, transport, seed, trace)
    (run_ci3 if attack == "CI3" else run_ac5)(world)
    ok, status = _login(world, rp)
    return (NOT_APPLICABLE if ok else APPLICABLE), {"login_after": status or "OK"}


def evaluate_cell(tmpl, attack: str, profile: str = "solo2-like", seed=0, trace=None):
    if isinstance(tmpl, str):
        tmpl = template(tmpl)
    if attack in EFFECTS["delete"]:
        return _delete(attack, tmpl, profile, seed, trace)
    if attack == "CI2":
        return _track_ci2(tmpl, profile, seed, trace)
    if attack == "AC3":
        return _track_ac3(tmpl, profile, seed, trace)
    return _dos(attack, tmpl, profile, seed, trace)


def evaluate_template(tmpl, profile: str = "solo2-like", seed=0, trace=None) -> dict:
    """One table row: per effect, the attacks that apply and how."""
    if isinstance(tmpl, str):
        tmpl = template(tmpl)
    row = {"template": tmpl.name, "rp_id": tmpl.rp_id, "kind": tmpl.credential_kind.label}
    cells, notes = {}, {}
    for effect in EFFECT_ORDER:
        for attack in EFFECTS[effect]:
            cells[attack], notes[attack] = evaluate_cell(tmpl, attack, profile, seed, trace)
    for effect in EFFECT_ORDER:
        hits = [a for a in EFFECTS[effect] if cells[a] != NOT_APPLICABLE]
        row[effect] = hits or NOT_APPLICABLE
    row["zero_uv_tracking"] = [a for a in EFFECTS["track"] if cells[a] == ZERO_UV]
    row["cells"] = cells
    row["notes"] = notes
    return row


def evaluate_templates(templates=None, profile: str = "solo2-like", seed=0, trace=None) -> list:
    templates = builtin_templates() if templates is None else templates
    return [evaluate_template(t, profile, seed, trace) for t in templates]


def expected_row(tmpl) -> dict:
    """The pattern the credential kind alone predicts."""
    if isinstance(tmpl, str):
        tmpl = template(tmpl)
    if not tmpl.discoverable:
        return {"delete": ["CI1", "AC2"], "track": NOT_APPLICABLE, "dos": ["CI3", "AC5", "AC6"],
                "zero_uv_tracking": []}
    weak = tmpl.credential_kind.value == "discoverable_weak"
    return {"delete": ["AC1", "CI1", "AC2"], "track": ["CI2", "AC3"], "dos": ["AC4", "CI3", "AC5", "AC6"],
            "zero_uv_tracking": ["CI2", "AC3"] if weak else []}


def pattern(row: dict) -> dict:
    return {k: row[k] for k in ("delete", "track", "dos", "zero_uv_tracking")}


def render_rows(rows) -> str:
    def cell(v):
        return ", ".join(v) if isinstance(v, list) else v
    lines = [f"{'rp':<24} {'kind':<9} {'delete':<15} {'track':<9} {'dos':<19} zero-uv"]
    for r in rows:
        lines.append(f"{r['rp_id']:<24} {r['kind']:<9} {cell(r['delete']):<15} {cell(r['track']):<9} "
                     f"{cell(r['dos']):<19} {cell(r['zero_uv_tracking']) or '-'}")
    return "\n".join(lines)


def mismatches(rows) -> list:
    out = []
    for r in rows:
        exp = expected_row(r["template"])
        got = pattern(r)
        if got != exp:
            out.append((r["template"], got, exp))
    return out

