"""Scenario files: what to build, what to run, and the reports that come out.

A scenario is a small YAML mapping::

    name: table3-baseline
    seed: 0
    profile: [yubikey5-like, solo2-like, opensk-like]   # one or several
    transport: auto            # usb, nfc, or auto (NFC first where it makes sense)
    countermeasures: []
    cve: false
    templates: [github-like, microsoft-like]
    attacks: [CI1, CI2, AC1]
    options: {AC6: {duration_ms: 60000}}
    script:                    # optional, runs before the attacks
      - register github-like
      - advance 11000
      - reset
    cases:                     # optional, each entry overrides the fields above
      - {attacks: [AC5], countermeasures: [C4]}
    expand: countermeasure-pairs   # or rp-table, confusion-oracle

Every report is one JSON object per line with a fixed key order, so two runs
with the same seed can be compared byte for byte.
"""

from __future__ import annotations

import itertools
import json
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import yaml

from ..actors import CtapError, FlowDeclined
from ..actors.relying_party import template
from ..attacks import mapping, oracle, rp_effects
from ..attacks.runners import DEFAULT_TEMPLATES, RUNNERS, build_world, resolve_transport
from ..authenticator import PROFILES, profile_config
from ..codec import Countermeasure
from ..transports import PipelineError, TransportFailure

SCENARIO_DIR = Path(__file__).with_name("scenarios")
KNOWN_KEYS = {"name", "seed", "profile", "transport", "countermeasures", "cve", "templates", "attacks",
              "options", "script", "cases", "expand", "rotation_period", "description"}
EXPANSIONS = ("countermeasure-pairs", "rp-table", "confusion-oracle")
STEP_VERBS = {"register", "authenticate", "advance", "reset", "replug", "selection", "info", "verify-pin",
              "set-pin"}


class ScenarioError(ValueError):
    """The file does not describe a runnable scenario (exit code 1)."""


class ScenarioRuntimeError(RuntimeError):
    """A protocol failure while running a valid scenario (exit code 2)."""


RUNTIME_ERRORS = (CtapError, FlowDeclined, TransportFailure, PipelineError)


@dataclass(frozen=True)
class Case:
    profile: str = "solo2-like"
    transport: str = "auto"
    countermeasures: tuple = ()
    cve: bool = False
    templates: tuple = DEFAULT_TEMPLATES
    attacks: tuple = ()
    options: dict = field(default_factory=dict, hash=False)
    script: tuple = ()
    rotation_period: int = 10
    expected: Optional[str] = None


@dataclass
class Scenario:
    name: str
    seed: object = 0
    cases: list = field(default_factory=list)
    expand: Optional[str] = None


def _as_list(value, what):
    if value is None:
        return []
    if isinstance(value, (str, int)):
        return [value]
    if isinstance(value, list):
        return value
    raise ScenarioError(f"{what} must be a name or a list")


def _check_case(case: Case):
    if case.profile not in PROFILES:
        raise ScenarioError(f"unknown profile {case.profile!r}")
    if case.transport not in ("auto", "usb", "nfc"):
        raise ScenarioError(f"unknown transport {case.transport!r}")
    for cm in case.countermeasures:
        try:
            Countermeasure(cm)
        except ValueError:
            raise ScenarioError(f"unknown countermeasure {cm!r}") from None
    for t in case.templates:
        try:
            template(t)
        except KeyError:
            raise ScenarioError(f"unknown relying-party template {t!r}") from None
    for a in case.attacks:
        if a not in RUNNERS:
            raise ScenarioError(f"unknown attack {a!r}")
    for a in case.options:
        if a not in RUNNERS or not isinstance(case.options[a], dict):
            raise ScenarioError(f"options must map attack ids to keyword maps, got {a!r}")
    for step in case.script:
        parse_step(step)


def parse_step(step) -> tuple:
    if not isinstance(step, str) or not step.split():
        raise ScenarioError(f"script steps are strings, got {step!r}")
    verb, *args = step.split()
    if verb not in STEP_VERBS:
        raise ScenarioError(f"unknown script step {verb!r}")
    if verb == "advance":
        if len(args) != 1 or not args[0].rstrip("ms").isdigit():
            raise ScenarioError(f"advance takes a millisecond count, got {step!r}")
        return verb, int(args[0].rstrip("ms"))
    if verb in ("register", "authenticate"):
        if not 1 <= len(args) <= 2:
            raise ScenarioError(f"{verb} takes a template and an optional account")
        try:
            template(args[0])
        except KeyError:
            raise ScenarioError(f"unknown relying-party template {args[0]!r}") from None
        return verb, args[0], args[1] if len(args) == 2 else "alice"
    if args:
        raise ScenarioError(f"{verb} takes no arguments")
    return (verb,)


def _case_from(raw: dict, base: Case) -> Case:
    changes = {}
    if "transport" in raw:
        changes["transport"] = str(raw["transport"])
    if "countermeasures" in raw:
        changes["countermeasures"] = tuple(sorted(str(c) for c in _as_list(raw["countermeasures"], "countermeasures")))
    if "cve" in raw:
        if not isinstance(raw["cve"], bool):
            raise ScenarioError("cve must be true or false")
        changes["cve"] = raw["cve"]
    if "templates" in raw:
        changes["templates"] = tuple(_as_list(raw["templates"], "templates"))
    if "attacks" in raw:
        changes["attacks"] = tuple(str(a) for a in _as_list(raw["attacks"], "attacks"))
    if "options" in raw:
        if not isinstance(raw["options"], dict):
            raise ScenarioError("options must be a mapping")
        changes["options"] = dict(raw["options"])
    if "script" in raw:
        changes["script"] = tuple(_as_list(raw["script"], "script"))
    if "rotation_period" in raw:
        if not isinstance(raw["rotation_period"], int) or raw["rotation_period"] < 1:
            raise ScenarioError("rotation_period must be a positive integer")
        changes["rotation_period"] = raw["rotation_period"]
    return replace(base, **changes)


def parse_scenario(text: str, default_name: str = "scenario") -> Scenario:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"not valid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ScenarioError("a scenario is a YAML mapping")
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {', '.join(sorted(map(str, unknown)))}")
    expand = raw.get("expand")
    if expand is not None and expand not in EXPANSIONS:
        raise ScenarioError(f"unknown expansion {expand!r}")
    base = _case_from(raw, Case())
    profiles = [str(p) for p in _as_list(raw.get("profile", "solo2-like"), "profile")]
    sub = raw.get("cases") or [{}]
    if not isinstance(sub, list) or not all(isinstance(c, dict) for c in sub):
        raise ScenarioError("cases must be a list of mappings")
    cases = []
    for profile, override in itertools.product(profiles, sub):
        extra = set(override) - KNOWN_KEYS
        if extra:
            raise ScenarioError(f"unknown case keys: {', '.join(sorted(map(str, extra)))}")
        case = _case_from(override, replace(base, profile=str(override.get("profile", profile))))
        _check_case(case)
        cases.append(case)
    seed = raw.get("seed", 0)
    if not isinstance(seed, (int, str)):
        raise ScenarioError("seed must be an integer or a string")
    return Scenario(str(raw.get("name", default_name)), seed, cases, expand)


def load_scenario(path) -> Scenario:
    p = Path(path)
    if not p.exists() and (SCENARIO_DIR / f"{path}.yaml").exists():
        p = SCENARIO_DIR / f"{path}.yaml"
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    return parse_scenario(text, p.stem)


def bundled() -> list:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.yaml"))


# -- running ---------------------------------------------------------------------

def _record(scenario: Scenario, index: int, body: dict) -> OrderedDict:
    out = OrderedDict([("scenario", scenario.name), ("case", index)])
    out.update(body)
    return out


def _run_step(world, step):
    verb, *args = parse_step(step)
    if verb == "advance":
        world.clock.advance(args[0])
        return {"now_ms": world.clock.now}
    if verb == "replug":
        world.replug()
        return {"now_ms": world.clock.now}
    s = world.session
    if verb == "register":
        rec = s.register_flow(world.rp(template(args[0])), args[1])
        return {"ok": rec.ok, "rp_id": rec.rp_id}
    if verb == "authenticate":
        rec = s.authenticate_flow(world.rp(template(args[0])), args[1])
        return {"ok": rec.ok, "rp_id": rec.rp_id, "uv": rec.uv}
    if verb == "reset":
        return {"status": s.reset_flow().status.name}
    if verb == "selection":
        return {"status": s.selection_flow().status.name}
    if verb == "info":
        return {"max_creds": s.info_flow().get(0x60)}
    if verb == "set-pin":
        s.set_pin_flow()
        return {"ok": True}
    if verb == "verify-pin":
        s.verify_pin_flow()
        return {"ok": True}
    raise AssertionError(verb)  # parse_step already rejected everything else


def _script_result(step, fn):
    """Script steps report CTAP refusals as data; they are often the point."""
    try:
        return fn()
    except CtapError as exc:
        return {"status": exc.status.name}
    except FlowDeclined as exc:
        return {"declined": str(exc)}


def run_case(scenario: Scenario, index: int, case: Case, seed, trace=None) -> list:
    config = profile_config(case.profile, countermeasures=frozenset(case.countermeasures),
                            cve_2024_35311=case.cve,
                            rotation_period=case.rotation_period)
    records = []
    if case.script:
        transport = "usb" if case.transport == "auto" else case.transport
        world = build_world(config=config, transport=transport, seed=seed, templates=case.templates, trace=trace)
        for n, step in enumerate(case.script):
            res = _script_result(step, lambda: _run_step(world, step))
            records.append(_record(scenario, index, OrderedDict(
                [("profile", case.profile), ("transport", transport), ("step", n), ("action", step),
                 ("result", res)])))
    for attack in case.attacks:
        transport = resolve_transport(attack, config, case.transport)
        world = build_world(config=config, transport=transport, seed=seed, templates=case.templates, trace=trace)
        report = RUNNERS[attack](world, **case.options.get(attack, {}))
        body = report.to_record()
        if case.expected is not None:
            body["expected"] = case.expected
        records.append(_record(scenario, index, body))
    return records


def _pair_cases(scenario: Scenario) -> list:
    cases = []
    for base in scenario.cases:
        config = profile_config(base.profile)
        for attack, cm in mapping.pairs():
            cases.append(replace(base, attacks=(attack,), countermeasures=(cm,),
                                 transport=mapping.pair_transport(attack, cm, config),
                                 expected=mapping.expected_outcome(attack, cm)))
    return cases


def _rp_table(scenario: Scenario, seed, trace=None) -> list:
    out = []
    for index, case in enumerate(scenario.cases):
        rows = rp_effects.evaluate_templates([template(t) for t in case.templates], case.profile, seed, trace)
        for row in rows:
            expected = rp_effects.expected_row(row["template"])
            body = OrderedDict([("profile", case.profile), ("template", row["template"]),
                                ("rp_id", row["rp_id"]), ("kind", row["kind"])])
            for k in ("delete", "track", "dos", "zero_uv_tracking", "cells", "notes"):
                body[k] = row[k]
            body["matches_expected"] = rp_effects.pattern(row) == expected
            out.append(_record(scenario, index, body))
    return out


def _oracle(scenario: Scenario, seed, trace=None) -> list:
    out = []
    for index, case in enumerate(scenario.cases):
        for r in oracle.brute_force(case.profile, seed, trace=trace):
            out.append(_record(scenario, index, OrderedDict(
                [("profile", case.profile), ("pair", f"{r.api_a}->{r.api_b}"),
                 ("transport", "nfc" if r.nfc else "usb"), ("weak_credentials", r.weak),
                 ("predicted", r.predicted), ("executed", r.executed), ("stealthy", r.stealthy),
                 ("agrees", r.agrees)])))
    return out


def run_scenario(scenario: Scenario, seed=None, trace: Optional[list] = None) -> list:
    """All report records of one scenario, in a deterministic order."""
    seed = scenario.seed if seed is None else seed
    try:
        if scenario.expand == "rp-table":
            return _rp_table(scenario, seed, trace)
        if scenario.expand == "confusion-oracle":
            return _oracle(scenario, seed, trace)
        cases = _pair_cases(scenario) if scenario.expand == "countermeasure-pairs" else scenario.cases
        records = []
        for index, case in enumerate(cases):
            records += run_case(scenario, index, case, seed, trace)
        return records
    except RUNTIME_ERRORS as exc:
        raise ScenarioRuntimeError(f"{type(exc).__name__}: {exc}") from exc


def dumps_records(records) -> str:
    return "".join(json.dumps(r, separators=(",", ":"), sort_keys=False) + "\n" for r in records)

