import json

import pytest

from ctaplab.attacks import runners
from ctaplab.harness import cli
from ctaplab.harness import dissect as ds
from ctaplab.harness.scenario import bundled, load_scenario, run_scenario
from ctaplab.transports.links import TransportFailure


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


# -- exit codes ----------------------------------------------------------------------


def test_run_ok(capsys):
    code, out, _ = run_cli(capsys, "run", "cve-leak")
    assert code == 0
    assert all(json.loads(line)["scenario"] == "cve-leak" for line in out.splitlines())


@pytest.mark.parametrize("body", [
    "name: [unclosed",
    "- just a list",
    "name: x\nprofile: nokia-like\n",
    "name: x\nattacks: [AC99]\n",
    "name: x\nscript: [dance]\n",
    "name: x\nsurprise: 1\n",
])
def test_bad_scenario_exits_1(tmp_path, capsys, body):
    path = tmp_path / "bad.yaml"
    path.write_text(body)
    code, out, err = run_cli(capsys, "run", str(path))
    assert code == 1 and out == "" and err.startswith("ctaplab:")


def test_missing_scenario_exits_1(capsys):
    assert run_cli(capsys, "run", "no-such-scenario")[0] == 1


def test_protocol_failure_exits_2(capsys, monkeypatch):
    def broken(world, **kw):
        raise TransportFailure("link dropped")

    monkeypatch.setitem(runners.RUNNERS, "CI4", broken)
    tmp = load_scenario("table3-baseline")
    assert any("CI4" in c.attacks for c in tmp.cases)
    code, _, err = run_cli(capsys, "run", "table3-baseline")
    assert code == 2 and "link dropped" in err


def test_refusals_in_scripts_are_data(tmp_path, capsys):
    path = tmp_path / "s.yaml"
    path.write_text("name: s\nprofile: solo2-like\ntransport: usb\ntemplates: []\n"
                    "script:\n  - authenticate github-like\n")
    code, out, _ = run_cli(capsys, "run", str(path))
    assert code == 0 and json.loads(out)["result"] == {"status": "NO_CREDENTIALS"}


# -- determinism ----------------------------------------------------------------------


@pytest.mark.parametrize("name", ["ac1-trace", "cve-leak", "register-authenticate"])
def test_same_seed_same_bytes(tmp_path, capsys, name):
    outs = []
    for i in range(2):
        trace = tmp_path / f"{i}.trace"
        code, out, _ = run_cli(capsys, "run", name, "--trace", str(trace))
        assert code == 0
        outs.append((out, trace.read_bytes()))
    assert outs[0] == outs[1]


def test_seed_override_changes_trace(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    run_cli(capsys, "run", "ac1-trace", "--trace", str(a), "--seed", "1")
    run_cli(capsys, "run", "ac1-trace", "--trace", str(b), "--seed", "2")
    assert a.read_bytes() != b.read_bytes()


def test_out_file(tmp_path, capsys):
    dest = tmp_path / "r.jsonl"
    code, out, _ = run_cli(capsys, "run", "cve-leak", "--out", str(dest))
    assert code == 0 and out == "" and dest.read_text().strip()


# -- dissector ----------------------------------------------------------------------


def test_every_bundled_trace_dissects_cleanly():
    for name in bundled():
        trace = []
        run_scenario(load_scenario(name), trace=trace)
        lines = [f.to_line() for f in trace]
        records = ds.dissect_lines(lines)
        assert len(records) == len(lines)
        assert [r for r in records if r.error] == [], name


def test_ac1_trace_shows_the_deletion(tmp_path, capsys):
    trace = tmp_path / "ac1.trace"
    run_cli(capsys, "run", "ac1-trace", "--trace", str(trace))
    code, out, _ = run_cli(capsys, "dissect", str(trace))
    assert code == 0
    assert "CredentialManagement(DeleteCredential)" in out
    seq = ds.sequence(ds.dissect_file(trace))
    assert "CBOR(CredentialManagement(DeleteCredential))" in seq


def test_register_then_authenticate_in_order(tmp_path, capsys):
    trace = tmp_path / "ra.trace"
    run_cli(capsys, "run", "register-authenticate", "--trace", str(trace))
    seq = [s for s in ds.sequence(ds.dissect_file(trace)) if s in ("CBOR(MakeCredential)", "CBOR(GetAssertion)")]
    assert seq == ["CBOR(MakeCredential)", "CBOR(GetAssertion)"] * 2


def test_machine_output_is_json(tmp_path, capsys):
    trace = tmp_path / "t"
    run_cli(capsys, "run", "register-authenticate", "--trace", str(trace))
    code, out, _ = run_cli(capsys, "dissect", str(trace), "--machine")
    rows = [json.loads(line) for line in out.splitlines()]
    assert code == 0 and rows and all(r["error"] is None for r in rows)


def test_corrupt_line_is_reported(tmp_path, capsys):
    trace = tmp_path / "t"
    run_cli(capsys, "run", "register-authenticate", "--trace", str(trace))
    lines = trace.read_text().splitlines()
    lines.insert(3, "this is not a frame")
    trace.write_text("\n".join(lines) + "\n")
    code, out, err = run_cli(capsys, "dissect", str(trace))
    assert code == 1 and "1 line(s)" in err
    assert len(out.splitlines()) >= len(lines)


def test_dissect_missing_file(tmp_path, capsys):
    assert run_cli(capsys, "dissect", str(tmp_path / "nope"))[0] == 1


# -- matrix ----------------------------------------------------------------------


def _totals(out):
    line = next(l for l in out.splitlines() if l.startswith("totals:"))
    return [int(x) for x in line.split()[1:]]


def test_matrix_cli(capsys):
    _, full, _ = run_cli(capsys, "matrix")
    _, narrow, _ = run_cli(capsys, "matrix", "--no-nfc")
    assert _totals(full) == [3, 6, 6, 3, 6, 6, 6]
    assert _totals(narrow) == [3, 3, 6, 1, 6, 6, 6]
    re_row = next(l for l in full.splitlines() if l.startswith("Re "))
    # columns CM Re GA ...: the Re->GA cell needs a weak credential
    assert re_row.split()[3] == "W"
    assert "GI->MC" in full


def test_matrix_published(capsys):
    code, out, _ = run_cli(capsys, "matrix", "--published")
    assert code == 0 and _totals(out) == [3, 6, 6, 4, 6, 6, 6]


# -- state ----------------------------------------------------------------------


def test_state_roundtrip(tmp_path, capsys):
    snap = tmp_path / "key.snap"
    code, saved, _ = run_cli(capsys, "state", "save", str(snap), "--profile", "yubikey5-like", "--seed", "3")
    assert code == 0
    code, loaded, _ = run_cli(capsys, "state", "load", str(snap))
    assert code == 0 and json.loads(loaded) == json.loads(saved)
    summary = json.loads(loaded)
    assert summary["profile"] == "yubikey5-like" and summary["discoverable"] == 3


def test_state_tampered(tmp_path, capsys):
    snap = tmp_path / "key.snap"
    run_cli(capsys, "state", "save", str(snap))
    raw = snap.read_bytes()
    i = raw.index(b"pin")
    snap.write_bytes(raw[:i] + b"PIN" + raw[i + 3:])
    code, out, err = run_cli(capsys, "state", "load", str(snap))
    assert code == 1 and out == "" and "snapshot" in err


def test_state_missing(tmp_path, capsys):
    assert run_cli(capsys, "state", "load", str(tmp_path / "none"))[0] == 1


def test_list(capsys):
    code, out, _ = run_cli(capsys, "list")
    assert code == 0 and out.split() == bundled()
