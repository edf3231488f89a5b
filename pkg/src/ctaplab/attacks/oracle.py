"""Brute-force check of the confusion matrix against the authenticator itself.

Each of the 49 (a, b) cells is forced through ``run_ac`` on a fresh desk in
four contexts: USB or NFC, and with or without a UVOptional credential on the
key.  A cell counts as observed-feasible when the smuggled API did its job
and the victim noticed nothing.  The prediction comes from the requirement
sets alone, so agreement means the table and the device tell the same story.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..codec.constants import ROW_ORDER, TABLE_ORDER
from . import payloads as pl
from .matrix import enumerate_confusions
from .runners import build_world, run_ac

CONTEXTS = [(nfc, weak) for nfc in (False, True) for weak in (False, True)]


@dataclass(frozen=True)
class CellResult:
    api_a: str
    api_b: str
    nfc: bool
    weak: bool
    predicted: bool
    executed: bool
    stealthy: bool
    outcome: str

    @property
    def observed(self) -> bool:
        return self.executed and self.stealthy

    @property
    def agrees(self) -> bool:
        return self.predicted == self.observed

    def label(self) -> str:
        ctx = ("nfc" if self.nfc else "usb") + ("/weak" if self.weak else "/strict")
        return f"{self.api_a}->{self.api_b} [{ctx}]"


def context_templates(weak: bool):
    # github-like keeps the victim's login UV-carrying in both contexts
    return ("github-like", "microsoft-like") if weak else ("github-like",)


def force_cell(a: str, b: str, nfc: bool, weak: bool, profile: str = "solo2-like", seed=0,
               matrix=None, trace=None) -> CellResult:
    matrix = matrix or enumerate_confusions()
    pair = matrix[a][b]
    world = build_world(profile, "nfc" if nfc else "usb", seed=f"{seed}:{a}{b}",
                        templates=context_templates(weak), trace=trace)
    rp_ids = [rp.rp_id for rp in world.rps.values()]
    rep = run_ac(pair, world, pl.payload_for(b, rp_ids, flood_calls=1))
    return CellResult(a, b, nfc, weak, pair.feasible_in(nfc, weak), rep.success, rep.stealthy, rep.outcome)


def brute_force(profile: str = "solo2-like", seed=0, contexts=CONTEXTS, trace=None) -> list:
    matrix = enumerate_confusions()
    return [force_cell(a, b, nfc, weak, profile, seed, matrix, trace)
            for nfc, weak in contexts for a in ROW_ORDER for b in TABLE_ORDER]


def observed_matrix(results) -> dict:
    """{(a, b): set of contexts where the cell worked}."""
    seen = {}
    for r in results:
        seen.setdefault((r.api_a, r.api_b), set())
        if r.observed:
            seen[(r.api_a, r.api_b)].add((r.nfc, r.weak))
    return seen


def observed_totals(results) -> list:
    """Column totals counting a cell if it worked in any context."""
    seen = observed_matrix(results)
    return [sum(bool(seen[(a, b)]) for a in ROW_ORDER) for b in TABLE_ORDER]


def disagreements(results) -> list:
    return [r for r in results if not r.agrees]
