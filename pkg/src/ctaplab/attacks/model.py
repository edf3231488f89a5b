"""Attack identifiers, fingerprints and the per-run report record."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class AttackId(str, Enum):
    CI1 = "CI1"  # factory reset
    CI2 = "CI2"  # tracking
    CI3 = "CI3"  # PIN lockout
    CI4 = "CI4"  # profiling
    AC1 = "AC1"  # delete credentials
    AC2 = "AC2"  # factory reset
    AC3 = "AC3"  # tracking
    AC4 = "AC4"  # storage flooding
    AC5 = "AC5"  # PIN lockout
    AC6 = "AC6"  # busy loop DoS
    AC7 = "AC7"  # profiling

    @property
    def impersonation(self) -> bool:
        return self.value.startswith("CI")

    def __str__(self):
        return self.value


ATTACK_ORDER = [a.value for a in AttackId]


class Constraint(str, Enum):
    ALWAYS = "always"
    PROXIMITY_ONLY = "proximity_only"
    WEAK_CREDPROTECT_ONLY = "weak_credprotect_only"
    INFEASIBLE = "infeasible"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ConfusionPair:
    api_a: str
    api_b: str
    constraint: Constraint = Constraint.ALWAYS

    @property
    def feasible(self) -> bool:
        return self.constraint is not Constraint.INFEASIBLE

    def feasible_in(self, nfc: bool, weak: bool) -> bool:
        c = self.constraint
        return (c is Constraint.ALWAYS or (c is Constraint.PROXIMITY_ONLY and nfc)
                or (c is Constraint.WEAK_CREDPROTECT_ONLY and weak))

    def __str__(self):
        return f"{self.api_a}->{self.api_b}"


class InfeasiblePair(ValueError):
    pass


@dataclass(frozen=True)
class Fingerprint:
    """Sorted (rp_id, cred_id hex, user_id hex) triples, plus optional GetInfo fields."""
    triples: tuple = ()
    info: tuple = ()

    @classmethod
    def of(cls, triples, info: Optional[dict] = None) -> "Fingerprint":
        norm = sorted((rp, c.hex() if isinstance(c, bytes) else c, u.hex() if isinstance(u, bytes) else u)
                      for rp, c, u in triples)
        info_items = tuple(sorted((str(k), repr(v)) for k, v in (info or {}).items()))
        return cls(tuple(norm), info_items)

    def __len__(self):
        return len(self.triples)

    @property
    def rp_ids(self) -> list:
        return sorted({t[0] for t in self.triples})

    def to_dict(self) -> dict:
        return {"triples": [list(t) for t in self.triples], "info": dict(self.info)}


def match_fingerprints(a: Optional[Fingerprint], b: Optional[Fingerprint]) -> bool:
    if a is None or b is None or not a.triples:
        return False
    return a.triples == b.triples and a.info == b.info


OUTCOMES = ("success", "blocked", "degraded", "not_supported", "failed", "not_applicable")


@dataclass
class AttackReport:
    attack: str
    success: bool
    stealthy: bool
    uv_consumed: bool = False
    up_grants_consumed: int = 0
    leaked: object = None
    blocked_by: Optional[str] = None
    outcome: str = "failed"
    transport: str = ""
    profile: str = ""
    countermeasures: tuple = ()
    pair: Optional[str] = None
    path: str = ""
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")

    FIELD_ORDER = ("attack", "profile", "transport", "countermeasures", "pair", "path", "outcome",
                   "success", "stealthy", "uv_consumed", "up_grants_consumed", "blocked_by",
                   "leaked", "detail")

    def to_record(self) -> "OrderedDict":
        out = OrderedDict()
        for k in self.FIELD_ORDER:
            v = getattr(self, k)
            if k == "countermeasures":
                v = sorted(str(c) for c in v)
            out[k] = _plain(v)
        return out


def _plain(v):
    if isinstance(v, Fingerprint):
        return v.to_dict()
    if isinstance(v, bytes):
        return v.hex()
    if isinstance(v, Enum):
        return v.value
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, set, frozenset)):
        items = [_plain(x) for x in v]
        return sorted(items, key=repr) if isinstance(v, (set, frozenset)) else items
    return v
