from . import payloads
from .hooks import AttackerContext, ConfusionHook
from .mapping import MAPPING, expected_outcome, pair_transport, pairs
from .matrix import (
    column_totals,
    enumerate_confusions,
    metadata,
    published_matrix,
    render,
    totals_line,
)
from .model import (
    ATTACK_ORDER,
    AttackId,
    AttackReport,
    ConfusionPair,
    Constraint,
    Fingerprint,
    InfeasiblePair,
    match_fingerprints,
)
from .oracle import brute_force
from .rp_effects import evaluate_templates
from .runners import (
    RUNNERS,
    build_world,
    run_ac,
    run_ac1,
    run_ac2,
    run_ac3,
    run_ac4,
    run_ac5,
    run_ac6,
    run_ac7,
    run_attack,
    run_ci1,
    run_ci2,
    run_ci3,
    run_ci4,
    run_cve_rp_leak,
)
