#!/usr/bin/env python3
"""Run every randomized inequality campaign and print a one-line verdict each.

Each campaign samples the relevant tensor cone and reports the minimum
normalized defect; negative values beyond tolerance mean a counterexample,
which is serialized in the report for replay.
"""

import argparse

from curvlab import verification


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    width = max(map(len, verification.CAMPAIGNS))
    failures = 0
    for name in sorted(verification.CAMPAIGNS):
        report = verification.run_campaign(name, seed=args.seed,
                                           samples=args.samples)
        verdict = "ok" if report.passed else "FAIL"
        print(f"{name:<{width}s}  {report.samples:>9d} samples  "
              f"min defect {report.min_defect:+.3e}  {verdict}")
        failures += not report.passed
    raise SystemExit(1 if failures else 0)


if __name__ == "__main__":
    main()
