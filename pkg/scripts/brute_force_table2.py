"""Force every API pair through the man-in-the-middle and compare with the grid.

Each of the 49 (A, B) cells runs in four contexts (USB or NFC, strict or weak
credentials). A cell agrees when "predicted feasible" equals "ran, and the
user noticed nothing".

    python3 scripts/brute_force_table2.py [--seed N] [--all]
"""

import argparse
import sys

from ctaplab.attacks.oracle import brute_force, disagreements, observed_totals


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="brute-force the API confusion grid")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--all", action="store_true", help="print every run, not just the summary")
    args = ap.parse_args(argv)

    results = brute_force(seed=args.seed)
    if args.all:
        for r in results:
            where = f"{'nfc' if r.nfc else 'usb'}/{'weak' if r.weak else 'strict'}"
            print(f"{r.api_a}->{r.api_b:<3} {where:<11} predicted={r.predicted!s:<5} "
                  f"executed={r.executed!s:<5} stealthy={r.stealthy!s:<5} agrees={r.agrees}")
    print("observed totals (nfc, weak):", observed_totals(results))
    bad = disagreements(results)
    print(f"{len(results)} runs, {len(bad)} disagreements")
    for r in bad:
        print("  disagrees:", r)
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
