"""Print the attack grid, the confusion grid and the relying-party table.

    python3 scripts/reproduce_tables.py [--seed N]
"""

import argparse
import time

from ctaplab.attacks import matrix as mx
from ctaplab.attacks import rp_effects
from ctaplab.harness.scenario import load_scenario, run_scenario

SHORT = {"success": "ok", "not_supported": "n/a"}


def attack_grid(seed):
    start = time.perf_counter()
    records = run_scenario(load_scenario("table3-baseline"), seed=seed)
    took = time.perf_counter() - start
    attacks = list(dict.fromkeys(r["attack"] for r in records))
    rows = {}
    for r in records:
        rows.setdefault(r["profile"], {})[r["attack"]] = SHORT.get(r["outcome"], r["outcome"])
    print(f"{'profile':<15}" + "".join(f"{a:>5}" for a in attacks))
    for profile, cells in rows.items():
        print(f"{profile:<15}" + "".join(f"{cells[a]:>5}" for a in attacks))
    print(f"({len(records)} runs in {took:.2f}s)")


def confusion_grid():
    computed = mx.enumerate_confusions()
    print(mx.render(computed))
    print("computed totals: ", mx.totals_line(computed))
    print("published totals:", mx.totals_line(mx.published_matrix()))
    meta = mx.metadata(computed)
    print(f"caption {meta['caption_count']}, published checkmarks {meta['published_checkmarks']}, "
          f"computed {meta['computed_feasible']}")
    if meta["disagreements_with_published"]:
        print("cells that differ:", ", ".join(meta["disagreements_with_published"]))


def rp_table(seed):
    rows = rp_effects.evaluate_templates(seed=seed)
    print(rp_effects.render_rows(rows))
    bad = rp_effects.mismatches(rows)
    print("pattern matches the published rows" if not bad else f"mismatched rows: {bad}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for title, show in [("attacks per profile", lambda: attack_grid(args.seed)),
                        ("API confusion feasibility", confusion_grid),
                        ("relying-party effects", lambda: rp_table(args.seed))]:
        print(f"\n== {title}")
        show()


if __name__ == "__main__":
    main()
