"""Which user-initiated API can be confused with which attacker API.

A confusion (a -> b) works when everything b needs is already granted by the
flow the user started for a.  NFC adds free user presence (proximity), and
credentials registered with the default UVOptional policy let GetAssertion
run without UV.
"""

from __future__ import annotations

from typing import Optional

from ..codec.constants import ROW_ORDER, TABLE_ORDER
from .model import ConfusionPair, Constraint

UV, UP = "UV", "UP"

# authorizations a user hands over while running each API's flow
GRANTS = {
    "MC": {UV, UP},
    "GA": {UV, UP},
    "CM": {UV},
    "CP": {UV},
    "Re": {UP},
    "Se": {UP},
    "GI": set(),
}

# what each API needs before it does anything useful
NEEDS = {
    "CM": {UV},
    "Re": {UP},
    "GA": {UV},
    "MC": {UV, UP},
    "CP": set(),
    "Se": set(),
    "GI": set(),
}
NEEDS_WEAK = {**NEEDS, "GA": set()}

# published checkmarks, rows = API A in ROW_ORDER, columns = API B in TABLE_ORDER;
# "1" = proximity only, "2" = weak CredProtect only, "" = n/a
PUBLISHED_TABLE2 = {
    "MC": ["x", "x", "x", "", "x", "x", "x"],
    "GA": ["x", "x", "", "x", "x", "x", "x"],
    "CM": ["", "1", "x", "1", "x", "x", "x"],
    "CP": ["x", "1", "x", "1", "", "x", "x"],
    "Re": ["", "", "2", "", "x", "x", "x"],
    "Se": ["", "x", "2", "", "x", "", "x"],
    "GI": ["", "1", "2", "x", "x", "x", ""],
}
PUBLISHED_TOTALS = [3, 6, 6, 4, 6, 6, 6]
CAPTION_COUNT = 49

_MARK = {"x": Constraint.ALWAYS, "1": Constraint.PROXIMITY_ONLY,
         "2": Constraint.WEAK_CREDPROTECT_ONLY, "": Constraint.INFEASIBLE}


def classify(a: str, b: str, nfc: bool = True, selection: bool = True) -> Constraint:
    if a == b:
        return Constraint.INFEASIBLE
    if not selection and "Se" in (a, b):
        return Constraint.INFEASIBLE
    granted = GRANTS[a]
    if NEEDS[b] <= granted:
        return Constraint.ALWAYS
    if nfc and NEEDS[b] <= granted | {UP}:
        return Constraint.PROXIMITY_ONLY
    if NEEDS_WEAK[b] <= granted:
        return Constraint.WEAK_CREDPROTECT_ONLY
    return Constraint.INFEASIBLE


def enumerate_confusions(config=None, nfc: Optional[bool] = None) -> dict:
    """{api_a: {api_b: ConfusionPair}} for the seven APIs.

    With no config the abstract API set is used (NFC available, Selection
    implemented).  A config narrows it: no NFC transport or C3 switched on
    removes proximity, no Selection removes that row and column.
    """
    selection = True
    if config is not None:
        selection = config.supports_selection
        if nfc is None:
            nfc = "nfc" in config.transports
        if config.has("C3"):
            nfc = False
    if nfc is None:
        nfc = True
    return {a: {b: ConfusionPair(a, b, classify(a, b, nfc, selection)) for b in TABLE_ORDER}
            for a in ROW_ORDER}


def column_totals(matrix: dict) -> list:
    return [sum(matrix[a][b].feasible for a in ROW_ORDER) for b in TABLE_ORDER]


def published_matrix() -> dict:
    return {a: {b: ConfusionPair(a, b, _MARK[PUBLISHED_TABLE2[a][i]]) for i, b in enumerate(TABLE_ORDER)}
            for a in ROW_ORDER}


def metadata(matrix: dict) -> dict:
    pub = published_matrix()
    disagreements = [f"{a}->{b}" for a in ROW_ORDER for b in TABLE_ORDER
                     if pub[a][b].constraint is not matrix[a][b].constraint]
    return {
        "caption_count": CAPTION_COUNT,
        "published_checkmarks": sum(PUBLISHED_TOTALS),
        "published_totals": PUBLISHED_TOTALS,
        "computed_totals": column_totals(matrix),
        "computed_feasible": sum(column_totals(matrix)),
        "disagreements_with_published": disagreements,
    }


MARKERS = {Constraint.ALWAYS: "Y", Constraint.PROXIMITY_ONLY: "P",
           Constraint.WEAK_CREDPROTECT_ONLY: "W", Constraint.INFEASIBLE: "."}


def render(matrix: dict) -> str:
    lines = ["A\\B  " + " ".join(f"{b:>3}" for b in TABLE_ORDER)]
    for a in ROW_ORDER:
        lines.append(f"{a:<4} " + " ".join(f"{MARKERS[matrix[a][b].constraint]:>3}" for b in TABLE_ORDER))
    lines.append("tot  " + " ".join(f"{n:>3}" for n in column_totals(matrix)))
    lines.append("Y feasible  P proximity (NFC) only  W weak CredProtect only  . infeasible")
    return "\n".join(lines)


def totals_line(matrix: dict) -> str:
    return " ".join(str(n) for n in column_totals(matrix))
