"""ctaplab command line.

    ctaplab run <scenario> [--trace out] [--seed n] [--out reports.jsonl]
    ctaplab matrix [--no-nfc] [--published]
    ctaplab dissect <trace> [--machine]
    ctaplab state save|load <path> [--profile p] [--seed n]
    ctaplab list

Exit codes: 0 ok, 1 bad input (scenario, trace line, snapshot), 2 protocol
failure while running a scenario.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..attacks import matrix as mx
from ..attacks.runners import DEFAULT_TEMPLATES, build_world
from ..authenticator import PROFILE_ORDER, SnapshotError, snapshot
from ..transports import write_trace
from . import dissect as ds
from .scenario import ScenarioError, ScenarioRuntimeError, bundled, dumps_records, load_scenario, run_scenario

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2


def _err(msg: str):
    print(f"ctaplab: {msg}", file=sys.stderr)


def _seed(text):
    return int(text) if text.lstrip("-").isdigit() else text


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        _err(str(exc))
        return EXIT_INPUT
    trace = [] if args.trace else None
    try:
        records = run_scenario(scenario, seed=args.seed, trace=trace)
    except ScenarioRuntimeError as exc:
        _err(f"{scenario.name}: {exc}")
        return EXIT_RUNTIME
    text = dumps_records(records)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.trace:
        write_trace(trace, args.trace)
    return EXIT_OK


def cmd_matrix(args) -> int:
    m = mx.published_matrix() if args.published else mx.enumerate_confusions(nfc=not args.no_nfc)
    print(mx.render(m))
    print(f"totals: {mx.totals_line(m)}")
    meta = mx.metadata(m)
    print(f"note: caption claims {meta['caption_count']} pairs, published checkmarks sum to "
          f"{meta['published_checkmarks']}, this grid has {sum(mx.column_totals(m))}")
    if meta["disagreements_with_published"]:
        print("differs from the published grid at: " + ", ".join(meta["disagreements_with_published"]))
    return EXIT_OK


def cmd_dissect(args) -> int:
    try:
        records = ds.dissect_file(args.trace)
    except OSError as exc:
        _err(f"cannot read {args.trace}: {exc.strerror}")
        return EXIT_INPUT
    sys.stdout.write(ds.render(records, machine=args.machine))
    bad = sum(r.error is not None for r in records)
    if bad:
        _err(f"{bad} line(s) failed to parse")
        return EXIT_INPUT
    return EXIT_OK


def _plain(v):
    if isinstance(v, bytes):
        return v.hex()
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def state_summary(auth) -> dict:
    st = auth.state
    return {
        "profile": auth.config.profile,
        "credentials": len(st.credentials),
        "discoverable": len(st.discoverable()),
        "pin_set": st.pin.is_set,
        "pin_retries": st.pin.total_retries_remaining,
        "clock_ms": auth.clock.now,
        "info": _plain(auth.get_info().payload),
    }


def cmd_state(args) -> int:
    if args.action == "save":
        world = build_world(args.profile, "usb", seed=args.seed, templates=DEFAULT_TEMPLATES)
        snapshot.save(world.auth, args.path)
        print(json.dumps(state_summary(world.auth), sort_keys=False))
        return EXIT_OK
    try:
        auth = snapshot.load(args.path)
    except (SnapshotError, OSError, ValueError) as exc:
        _err(f"cannot load snapshot: {exc}")
        return EXIT_INPUT
    print(json.dumps(state_summary(auth), sort_keys=False))
    return EXIT_OK


def cmd_list(args) -> int:
    for name in bundled():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ctaplab", description="simulated CTAP authenticator attack lab")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario file (or a bundled scenario by name)")
    r.add_argument("scenario")
    r.add_argument("--trace", help="write every transport frame to this file")
    r.add_argument("--seed", type=_seed, default=None, help="override the scenario seed")
    r.add_argument("--out", help="write reports here instead of stdout")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("matrix", help="print the API confusion feasibility grid")
    m.add_argument("--no-nfc", action="store_true", help="no proximity attacker")
    m.add_argument("--published", action="store_true", help="show the published grid instead")
    m.set_defaults(func=cmd_matrix)

    d = sub.add_parser("dissect", help="decode a frame trace")
    d.add_argument("trace")
    d.add_argument("--machine", action="store_true", help="one JSON object per line")
    d.set_defaults(func=cmd_dissect)

    s = sub.add_parser("state", help="save or load an authenticator snapshot")
    s.add_argument("action", choices=("save", "load"))
    s.add_argument("path")
    s.add_argument("--profile", default="solo2-like", choices=PROFILE_ORDER)
    s.add_argument("--seed", type=_seed, default=0)
    s.set_defaults(func=cmd_state)

    ls = sub.add_parser("list", help="list bundled scenarios")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
