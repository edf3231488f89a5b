"""Executable attacks.

Impersonation (CI) runs use an attacker-controlled client with no MitM: over
NFC the victim is absent and the key just sits in range, over USB the victim
has plugged the key into the attacker's machine and is waiting to log in (a
lure).  Confusion (AC) runs put a ConfusionHook on the victim's own pipeline
while the victim runs the flow for API A.
"""

from __future__ import annotations

import random
from collections import Counter
from typing import Callable, Optional

from ..actors import CtapError, FlowDeclined, World, builtin_templates, template
from ..actors.user import FLOW_LOGIN
from ..authenticator import AuthenticatorConfig, profile_config
from ..authenticator.config import PROFILES
from ..authenticator.state import TokenScope
from ..codec import Command, Status, encode_request
from ..codec.messages import decode_response
from ..transports import HidLink, PipelineError, TransportFailure
from ..transports.ctaphid import CtapHidFrame, HidCommand, Reassembler, ctaphid_send
from . import payloads as pl
from .hooks import AttackerContext, ConfusionHook
from .model import AttackId, AttackReport, ConfusionPair, Fingerprint, InfeasiblePair, match_fingerprints

ATTACKER_CLIENT = "attacker-client"
DEFAULT_TEMPLATES = ("github-like", "microsoft-like", "apple-like", "facebook-like")
DESTRUCTIVE_PIN = "271828"
FLOW_ERRORS = (CtapError, FlowDeclined, TransportFailure, PipelineError)
AC_PAIRS = {
    "AC1": ("GA", "CM"),
    "AC3": ("MC", "GA"),
    "AC4": ("GA", "MC"),
    "AC5": ("GA", "CP"),
    "AC7": ("GA", "GI"),
}
NFC_FIRST = {"CI1", "CI2", "CI3", "CI4", "AC4", "CVE"}


# -- setup -------------------------------------------------------------------

def build_world(profile="solo2-like", transport="usb", countermeasures=(), seed=0,
                templates=DEFAULT_TEMPLATES, cve=False, trace=None, rotation_period=10,
                config: Optional[AuthenticatorConfig] = None) -> World:
    """A victim desk: PIN set, one account registered per template."""
    if config is None:
        config = profile_config(profile, countermeasures=frozenset(countermeasures),
                                cve_2024_35311=cve, rotation_period=rotation_period)
    if transport not in config.transports:
        raise ValueError(f"profile {config.profile} has no {transport} transport")
    c4 = config.has("C4")
    world = World.build(config, transport, seed=seed, trace=trace,
                        destructive_pin=DESTRUCTIVE_PIN if c4 else None)
    tmpls = [template(t) if isinstance(t, str) else t for t in templates]
    world.setup(tmpls, set_destructive=c4)
    return world


def resolve_transport(attack: str, config: AuthenticatorConfig, transport: str = "auto") -> str:
    if transport != "auto":
        return transport
    if attack == "AC6":
        return "usb"
    if attack in NFC_FIRST and "nfc" in config.transports:
        return "nfc"
    return "usb"


class Probe:
    """Counter snapshot at attack start, so reports only count the attack."""

    def __init__(self, world: World):
        self.world = world
        a = world.auth
        self.audit = Counter(a.audit)
        self.denials = len(a.denials)
        self.alarms = len(world.user.alarm_log)
        self.rotations = len(a.rotations)
        self.excluded_up = 0

    def up_grants(self) -> int:
        return self.world.auth.audit["up_granted"] - self.audit["up_granted"] - self.excluded_up

    def denials_since(self):
        return self.world.auth.denials[self.denials:]

    def alarms_since(self):
        return self.world.user.alarm_log[self.alarms:]


def _report(attack, world: World, probe: Probe, success: bool, *, leaked=None, pair=None, path="",
            uv_consumed=False, detail=None, extra_block=None, degraded_by=None,
            not_supported=False, outcome=None) -> AttackReport:
    cfg = world.auth.config
    denials = probe.denials_since()
    alarms = probe.alarms_since()
    blocked_by = str(denials[0].countermeasure) if denials else None
    if blocked_by is None:
        blocked_by = extra_block or degraded_by
    if blocked_by is None and cfg.has("C2") and any(a.kind == "feedback" for a in alarms):
        blocked_by = "C2"
    if outcome is not None:
        pass
    elif not_supported:
        outcome = "not_supported"
    elif blocked_by:
        outcome = "degraded" if success else "blocked"
    else:
        outcome = "success" if success else "failed"
    d = dict(detail or {})
    if alarms:
        d["alarms"] = [a.detail for a in alarms]
    return AttackReport(
        attack=str(attack), success=bool(success), stealthy=not alarms, uv_consumed=bool(uv_consumed),
        up_grants_consumed=probe.up_grants(), leaked=leaked, blocked_by=blocked_by, outcome=outcome,
        transport=world.transport, profile=cfg.profile,
        countermeasures=tuple(sorted(c.value for c in cfg.countermeasures)),
        pair=str(pair) if pair else None, path=path, detail=d)


# -- impersonation -------------------------------------------------------------

class _Impersonation:
    """Attacker client on the victim's key; NFC with nobody around, or a USB lure."""

    def __init__(self, world: World, lure=FLOW_LOGIN):
        self.world = world
        self.lure = lure
        self.attacker = world.client(ATTACKER_CLIENT, rng_tag="attacker")
        self.ctx = AttackerContext(random.Random(f"{world.seed}:attacker-ctx"))

    def __enter__(self):
        self.connect()
        return self

    def connect(self):
        w = self.world
        if w.transport == "nfc":
            w.user.present = False
            w.link.connect(ATTACKER_CLIENT, power_cycle=True)
        else:
            w.replug()
            w.user.begin_flow(self.lure)

    def reconnect(self):
        if self.world.transport == "usb":
            self.world.user.end_flow()
        self.connect()

    def run(self, payload):
        return pl.drive(payload(self.ctx), self.attacker.call)

    def __exit__(self, *exc):
        self.world.user.end_flow()
        self.world.user.present = True
        return False


def _path(world: World) -> str:
    return "nfc-unattended" if world.transport == "nfc" else "usb-lure"


def run_ci1(world: World, delay_ms: int = 0) -> AttackReport:
    probe = Probe(world)
    before = len(world.auth.state.credentials)
    with _Impersonation(world) as imp:
        world.clock.advance(delay_ms)
        res = imp.run(pl.reset)
    wiped = res["status"] is Status.OK and not world.auth.state.credentials
    return _report(AttackId.CI1, world, probe, wiped, path=_path(world),
                   detail={"status": res["status"].name, "credentials_before": before,
                           "credentials_after": len(world.auth.state.credentials),
                           "since_power_on_ms": delay_ms})


def _ci2_once(world: World, rp_ids, pin=None, info=None):
    with _Impersonation(world) as imp:
        if pin is not None:
            imp.ctx.token = imp.attacker.pin_ceremony(pin=pin)
        res = imp.run(pl.harvest(rp_ids))
    return Fingerprint.of(res["triples"], info), res


def honest_logins(world: World, count: int, probe: Optional[Probe] = None):
    """The victim keeps using their accounts between two tracking attempts."""
    before = world.auth.audit["up_granted"]
    if world.transport == "nfc":
        world.link.connect("platform", power_cycle=True)
    else:
        world.replug()
    for _ in range(count):
        for rp in world.rps.values():
            if rp.template.discoverable:
                world.session.authenticate_flow(rp)
    if probe is not None:
        # the victim's own touches are not the attacker's
        probe.excluded_up += world.auth.audit["up_granted"] - before


def _tracking_rps(world: World, rp_ids):
    return list(rp_ids) if rp_ids else [rp.rp_id for rp in world.rps.values()]


def run_ci2(world: World, rp_ids=None, pin: Optional[str] = None, with_info: bool = False,
            logins_between: Optional[int] = None) -> AttackReport:
    """Two zero-click harvests separated by ordinary use; tracking works if they match."""
    probe = Probe(world)
    rp_ids = _tracking_rps(world, rp_ids)
    info = None
    if with_info:
        with _Impersonation(world) as imp:
            info = imp.run(pl.get_info)["info"]
    fp1, res1 = _ci2_once(world, rp_ids, pin, info)
    between = world.auth.config.rotation_period if logins_between is None else logins_between
    honest_logins(world, between, probe)
    fp2, _ = _ci2_once(world, rp_ids, pin, info)
    rotated = len(world.auth.rotations) > probe.rotations
    matched = match_fingerprints(fp1, fp2)
    extra = "C5" if (fp1.triples and not matched and rotated and world.auth.config.has("C5")) else None
    return _report(AttackId.CI2, world, probe, bool(fp1.triples) and matched, leaked=fp1,
                   path=_path(world), uv_consumed=pin is not None, extra_block=extra,
                   detail={"leaked_rps": fp1.rp_ids, "fingerprints_match": matched,
                           "rotated": rotated, "per_rp": res1["per_rp"]})


def run_ci3(world: World, target: str = "hard") -> AttackReport:
    probe = Probe(world)
    pin = world.auth.state.pin
    guesses, sessions = 0, 0
    statuses = []
    with _Impersonation(world) as imp:
        while sessions < 8:
            sessions += 1
            res = imp.run(pl.lockout(3))
            guesses += res["guesses"]
            statuses.append(res["status"].name)
            if pin.hard_locked or target == "soft" or res["guesses"] == 0:
                break
            imp.reconnect()
        blocked_status = imp.run(pl.harvest([rp.rp_id for rp in world.rps.values()][:1]))["per_rp"]
    success = pin.hard_locked if target == "hard" else (pin.soft_locked or pin.hard_locked)
    return _report(AttackId.CI3, world, probe, success, path=_path(world),
                   detail={"guesses": guesses, "sessions": sessions, "soft_locked": pin.soft_locked,
                           "hard_locked": pin.hard_locked, "retries_left": pin.total_retries_remaining,
                           "statuses": statuses, "assertion_after": blocked_status})


def guess_profile(info: dict) -> Optional[str]:
    for name, p in PROFILES.items():
        if info.get(0x03) == p["aaguid"] or info.get(0x60) == p["max_discoverable"]:
            return name
    return None


def summarize_info(info: dict) -> dict:
    return {
        "versions": info.get(0x01), "extensions": info.get(0x02),
        "aaguid": info.get(0x03), "options": info.get(0x04),
        "transports": info.get(0x09), "firmware": info.get(0x0E),
        "max_creds": info.get(0x60), "remaining_creds": info.get(0x14),
    }


def run_ci4(world: World) -> AttackReport:
    probe = Probe(world)
    with _Impersonation(world) as imp:
        res = imp.run(pl.get_info)
    leaked = summarize_info(res["info"]) if res["executed"] else None
    if leaked is not None:
        leaked["profile_guess"] = guess_profile(res["info"])
    return _report(AttackId.CI4, world, probe, res["executed"], leaked=leaked, path=_path(world),
                   detail={"status": res["status"].name})


def run_cve_rp_leak(world: World) -> AttackReport:
    probe = Probe(world)
    with _Impersonation(world) as imp:
        res = imp.run(pl.cve_rp_leak)
    return _report("CVE-2024-35311", world, probe, bool(res["rps"]), leaked=res["rps"], path=_path(world),
                   detail={"status": res["status"].name, "leaked_count": len(res["rps"]),
                           "stored_rps": len({c.rp_id for c in world.auth.state.discoverable()})})


# -- confusion -----------------------------------------------------------------

def victim_rp(world: World):
    """The account whose login the victim performs: one that asks for UV if possible."""
    rps = list(world.rps.values())
    for rp in rps:
        if rp.template.login_uses_uv:
            return rp
    return rps[0]


def run_flow(world: World, api: str, rp=None, account: str = "alice"):
    s = world.session
    rp = rp or victim_rp(world)
    if api == "MC":
        n = sum(1 for _ in rp.user_ids)
        return s.register_flow(rp, f"{account}-{n}")
    if api == "GA":
        return s.authenticate_flow(rp, account)
    if api == "CM":
        return s.manage_flow()
    if api == "CP":
        return s.verify_pin_flow()
    if api == "Re":
        return s.reset_flow()
    if api == "Se":
        return s.selection_flow()
    if api == "GI":
        return s.info_flow()
    raise ValueError(f"unknown API {api!r}")


def confuse_once(world: World, api_a: str, payload, rng_tag="mitm", replug=True, rp=None):
    """One victim flow for api_a with the MitM in place; returns (hook, flow error)."""
    hook = ConfusionHook(api_a, payload, random.Random(f"{world.seed}:{rng_tag}"))
    if replug:
        world.replug()
    world.pipeline.hook = hook
    error = None
    try:
        run_flow(world, api_a, rp)
    except FLOW_ERRORS as exc:
        error = exc
    finally:
        world.pipeline.hook = None
    return hook, error


def run_ac(pair: ConfusionPair, world: World, payload=None, rp_ids=None, attack=None,
           success: Optional[Callable[[dict], bool]] = None) -> AttackReport:
    a, b = pair.api_a, pair.api_b
    label = attack or f"AC[{a}->{b}]"
    probe = Probe(world)
    if a == b:
        return _report(label, world, probe, False, pair=pair, path="identity", outcome="not_applicable",
                       detail={"reason": "an API cannot be confused with itself"})
    if payload is None:
        payload = pl.payload_for(b, _tracking_rps(world, rp_ids), flood_calls=1)
    hook, error = confuse_once(world, a, payload)
    res = hook.result or {"executed": False, "status": None}
    ok = success(res) if success else bool(res.get("executed"))
    detail = {k: (v.name if isinstance(v, Status) else v) for k, v in res.items() if k not in ("triples", "info")}
    if error is not None:
        detail["flow_error"] = str(error)
    leaked = None
    if "triples" in res:
        leaked = Fingerprint.of(res["triples"])
    elif "info" in res and res.get("executed"):
        leaked = summarize_info(res["info"])
    return _report(label, world, probe, ok, pair=pair, path=world.transport, leaked=leaked,
                   uv_consumed=hook.token is not None and b in ("CM", "MC", "GA"), detail=detail)


def _pair(a, b):
    from .matrix import classify
    return ConfusionPair(a, b, classify(a, b))


def uv_carrier(world: World, needs_up: bool = False) -> str:
    """The victim flow to hijack when the payload needs a token.

    A login only carries UV when the RP asks for it; otherwise fall back to a
    registration, or over NFC (where proximity is UP) to a PIN check.
    """
    if victim_rp(world).template.login_uses_uv:
        return "GA"
    if needs_up and world.transport == "nfc":
        return "CP"
    return "MC" if not needs_up else "GA"


def run_ac1(world: World) -> AttackReport:
    rep = run_ac(_pair(uv_carrier(world), "CM"), world, pl.delete_all, attack="AC1",
                 success=lambda r: r.get("found", 0) > 0 and r["deleted"] == r["found"])
    return rep


def ac2_pair(world: World):
    if world.transport == "nfc":
        return _pair("GI", "Re")
    if world.auth.config.supports_selection:
        return _pair("Se", "Re")
    return _pair("GA", "Re")


def run_ac2(world: World) -> AttackReport:
    before = world.auth.audit["resets"]
    rep = run_ac(ac2_pair(world), world, pl.reset, attack="AC2",
                 success=lambda r: r["status"] is Status.OK)
    rep.detail["wiped"] = world.auth.audit["resets"] > before
    return rep


def run_ac3(world: World, rp_ids=None) -> AttackReport:
    probe = Probe(world)
    rp_ids = _tracking_rps(world, rp_ids)
    pair = _pair("MC", "GA")
    hook1, err1 = confuse_once(world, "MC", pl.harvest(rp_ids), rng_tag="mitm-1")
    fp1 = Fingerprint.of((hook1.result or {}).get("triples", []))
    honest_logins(world, world.auth.config.rotation_period, probe)
    hook2, _ = confuse_once(world, "MC", pl.harvest(rp_ids), rng_tag="mitm-2")
    fp2 = Fingerprint.of((hook2.result or {}).get("triples", []))
    matched = match_fingerprints(fp1, fp2)
    rotated = len(world.auth.rotations) > probe.rotations
    extra = "C5" if (fp1.triples and not matched and rotated and world.auth.config.has("C5")) else None
    complete = len(fp1.rp_ids) == len({r for r in rp_ids if _has_discoverable(world, r)})
    detail = {"leaked_rps": fp1.rp_ids, "fingerprints_match": matched, "rotated": rotated}
    if err1 is not None:
        detail["flow_error"] = str(err1)
    return _report(AttackId.AC3, world, probe, bool(fp1.triples) and complete and matched, leaked=fp1,
                   pair=pair, path=world.transport, uv_consumed=hook1.token is not None,
                   extra_block=extra, detail=detail)


def _has_discoverable(world: World, rp_id: str) -> bool:
    return any(c.rp_id == rp_id for c in world.auth.state.discoverable())


def run_ac4(world: World, max_flows: Optional[int] = None) -> AttackReport:
    """Flood the discoverable store from inside the victim's login flows.

    Over NFC proximity grants UP for free, so one flow fills the store.  Over
    USB each flow yields one touch, so the attacker adds one credential per
    flow and waits for the next login.
    """
    probe = Probe(world)
    carrier = uv_carrier(world, needs_up=True)
    pair = _pair(carrier, "MC")
    cfg = world.auth.config
    nfc = world.transport == "nfc"
    per_flow = None if nfc else 1
    if max_flows is None:
        # NFC is a one-shot grab relying on proximity; USB waits for login after login
        max_flows = 1 if nfc else cfg.max_discoverable + 2
    limit = max_flows
    injected, flows, full, status = 0, 0, False, None
    token_seen = False
    while flows < limit and not full:
        flows += 1
        hook, _ = confuse_once(world, carrier, pl.flood(cfg.max_discoverable + 1, per_flow),
                               rng_tag=f"mitm-{flows}")
        token_seen |= hook.token is not None
        res = hook.result or {"injected": 0, "full": False, "status": None}
        injected += res["injected"]
        full = res["full"]
        status = res["status"]
        if res["injected"] == 0 and not full:
            break
    honest = None
    if full:
        rp = victim_rp(world)
        try:
            world.session.register_flow(rp, "alice-late")
            honest = "OK"
        except CtapError as exc:
            honest = exc.status.name
    return _report(AttackId.AC4, world, probe, full, pair=pair, uv_consumed=token_seen,
                   path="nfc-implicit-up" if nfc else "usb-one-per-flow",
                   detail={"injected": injected, "flows": flows, "store_full": full,
                           "last_status": status.name if status else None,
                           "honest_register": honest,
                           "stored": len(world.auth.state.discoverable())})


def run_ac5(world: World, max_flows: int = 4) -> AttackReport:
    """Wrong PIN guesses smuggled into logins, one soft lock per power session."""
    probe = Probe(world)
    pair = _pair("GA", "CP")
    pin = world.auth.state.pin
    flows, guesses = 0, 0
    while flows < max_flows and not pin.hard_locked:
        flows += 1
        hook, _ = confuse_once(world, "GA", pl.lockout(3), rng_tag=f"mitm-{flows}")
        res = hook.result or {"guesses": 0}
        guesses += res["guesses"]
        if res["guesses"] == 0:
            break
    locked = pin.hard_locked
    recovered = None
    degraded = None
    if locked and world.auth.config.has("C4"):
        world.replug()
        try:
            world.session.pin_ceremony(scope=TokenScope.DESTRUCTIVE, pin=world.user.destructive_pin)
            recovered = not world.auth.state.pin.hard_locked
        except CtapError:
            recovered = False
        degraded = "C4" if recovered else None
    return _report(AttackId.AC5, world, probe, locked, pair=pair, path=world.transport,
                   degraded_by=degraded,
                   detail={"flows": flows, "guesses": guesses, "hard_locked": locked,
                           "recovered_with_destructive_pin": recovered})


def run_ac7(world: World) -> AttackReport:
    rep = run_ac(_pair("GA", "GI"), world, pl.get_info, attack="AC7")
    if isinstance(rep.leaked, dict):
        rep.leaked["profile_guess"] = None
    return rep


# -- AC6: busy loop -------------------------------------------------------------

def _send_at(link: HidLink, data: bytes, t: int, client_id: str):
    """Put one CBOR message on the wire at time t without moving the clock."""
    replies = []
    for f in ctaphid_send(link.cid, data, HidCommand.CBOR):
        raw = f.to_bytes()
        link._record(t, "c2a", raw)
        replies += link.device.receive(raw, t, client_id)
    replies.sort(key=lambda r: r[0])
    asm, payload, done = Reassembler(), None, t
    for rt, raw in replies:
        link._record(rt, "a2c", raw)
        frame = CtapHidFrame.parse(raw)
        if frame.kind == "init" and frame.command == HidCommand.KEEPALIVE:
            continue
        if frame.kind == "init" and frame.command == HidCommand.ERROR:
            return None, rt
        msg = asm.feed(frame)
        if msg is not None:
            payload, done = msg.payload, rt
    return payload, done


def run_ac6(world: World, duration_ms: int = 300_000, retry_ms: int = 1000,
            start_delay_ms: int = 500) -> AttackReport:
    """Keep the key busy with Selection; the victim retries a login every second."""
    probe = Probe(world)
    cfg = world.auth.config
    if world.transport != "usb":
        raise ValueError("the busy-loop attack needs CTAPHID channels (usb)")
    world.replug()
    attacker = HidLink(world.device, world.clock, world.link.trace, seed=f"{world.seed}:ac6")
    attacker.connect(ATTACKER_CLIENT)
    selection = encode_request(pl.cl.simple(Command.SELECTION))
    if not cfg.supports_selection:
        raw, _ = _send_at(attacker, selection, world.clock.now, ATTACKER_CLIENT)
        status = decode_response(raw).status if raw else None
        return _report(AttackId.AC6, world, probe, False, path="usb", not_supported=True,
                       detail={"status": status.name if status else None})
    rp = victim_rp(world)
    t0 = world.clock.now
    end = t0 + duration_ms
    busy_end, idle_until = t0, t0
    next_honest = t0 + start_delay_ms
    statuses = Counter()
    calls, attempts, honest_done = 0, 0, None
    while True:
        attacker_t = max(busy_end, idle_until)
        if attacker_t <= next_honest and attacker_t < end:
            raw, done = _send_at(attacker, selection, attacker_t, ATTACKER_CLIENT)
            calls += 1
            status = decode_response(raw).status if raw else Status.CHANNEL_BUSY
            statuses[status.name] += 1
            if done > attacker_t:
                busy_end = done  # re-issue the moment the key frees up
            else:
                busy_end, idle_until = attacker_t, attacker_t + retry_ms
            continue
        if next_honest >= end:
            break
        world.clock.advance_to(next_honest)
        attempts += 1
        try:
            rec = world.session.authenticate_flow(rp)
            if rec.verified:
                honest_done = world.clock.now
                break
        except FLOW_ERRORS:
            pass
        next_honest += retry_ms
        busy_end = max(busy_end, world.clock.now)
    world.clock.advance_to(max(busy_end, honest_done or end))
    return _report(AttackId.AC6, world, probe, honest_done is None, path="usb",
                   detail={"selection_calls": calls, "statuses": dict(sorted(statuses.items())),
                           "honest_attempts": attempts,
                           "honest_completed_at_ms": None if honest_done is None else honest_done - t0,
                           "duration_ms": duration_ms})


# -- dispatch -------------------------------------------------------------------

RUNNERS = {
    "CI1": run_ci1, "CI2": run_ci2, "CI3": run_ci3, "CI4": run_ci4,
    "AC1": run_ac1, "AC2": run_ac2, "AC3": run_ac3, "AC4": run_ac4,
    "AC5": run_ac5, "AC6": run_ac6, "AC7": run_ac7, "CVE": run_cve_rp_leak,
}


def run_attack(attack: str, profile: str = "solo2-like", transport: str = "auto", countermeasures=(),
               seed=0, templates=DEFAULT_TEMPLATES, cve: bool = False, trace=None,
               rotation_period: int = 10, options: Optional[dict] = None) -> AttackReport:
    attack = "CVE" if attack.upper().startswith("CVE") else AttackId(attack).value
    config = profile_config(profile, countermeasures=frozenset(countermeasures),
                            cve_2024_35311=cve or attack == "CVE", rotation_period=rotation_period)
    transport = resolve_transport(attack, config, transport)
    world = build_world(config=config, transport=transport, seed=seed, templates=templates, trace=trace)
    return RUNNERS[attack](world, **(options or {}))
